// Framed messages exchanged with `genesis bridge` over stdio.
//
// Frame layout (little-endian): 4-byte magic "GBR1", u32 header length,
// UTF-8 JSON header, then concatenated f32 arrays whose shapes are listed
// in header.arrays. Buffers are copied at the boundary; nothing is shared.

export const FRAME_MAGIC = Buffer.from("GBR1", "ascii");

export interface ShapedArray {
  shape: number[];
  data: Float32Array;
}

export function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function checkShapedArray(arr: ShapedArray, what: string): void {
  if (elementCount(arr.shape) !== arr.data.length) {
    throw new RangeError(
      `${what}: shape [${arr.shape}] needs ${elementCount(arr.shape)} elements, ` +
        `buffer holds ${arr.data.length}`
    );
  }
}

export function encodeFrame(header: Record<string, unknown>, arrays: ShapedArray[]): Buffer {
  arrays.forEach((a, i) => checkShapedArray(a, `array ${i}`));
  const body = Buffer.from(
    JSON.stringify({ ...header, arrays: arrays.map((a) => ({ shape: a.shape })) }),
    "utf-8"
  );
  const prefix = Buffer.alloc(8);
  FRAME_MAGIC.copy(prefix, 0);
  prefix.writeUInt32LE(body.length, 4);
  const payload = arrays.map((a) =>
    Buffer.from(a.data.buffer.slice(a.data.byteOffset, a.data.byteOffset + a.data.byteLength))
  );
  return Buffer.concat([prefix, body, ...payload]);
}

export interface DecodedFrame {
  header: any;
  arrays: ShapedArray[];
}

export function decodeFrame(frame: Buffer): DecodedFrame {
  if (frame.length < 8 || !frame.subarray(0, 4).equals(FRAME_MAGIC)) {
    throw new RangeError("bad bridge frame magic");
  }
  const headerLen = frame.readUInt32LE(4);
  if (frame.length < 8 + headerLen) {
    throw new RangeError("truncated bridge frame header");
  }
  const header = JSON.parse(frame.subarray(8, 8 + headerLen).toString("utf-8"));
  const arrays: ShapedArray[] = [];
  let offset = 8 + headerLen;
  for (const spec of header.arrays ?? []) {
    const shape = (spec.shape as number[]).map(Number);
    const bytes = elementCount(shape) * 4;
    if (frame.length < offset + bytes) {
      throw new RangeError("truncated bridge frame payload");
    }
    // fresh ArrayBuffer keeps the f32 view 4-byte aligned
    const copy = new Uint8Array(bytes);
    frame.copy(copy, 0, offset, offset + bytes);
    arrays.push({ shape, data: new Float32Array(copy.buffer) });
    offset += bytes;
  }
  if (offset !== frame.length) {
    throw new RangeError("trailing bytes in bridge frame");
  }
  return { header, arrays };
}

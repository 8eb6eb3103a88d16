// Test utilities: run the engine CLI, read/write its GVOL container, and
// hold temp workspaces. The GVOL codec here is test-only; the public
// bindings surface stays purely in-memory.

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { ShapedArray, elementCount } from "../src/frames";

export function makeTempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function runCli(args: string[]): { status: number; stdout: string; stderr: string } {
  const bin = process.env.GENESIS_BIN ?? "genesis";
  const result = spawnSync(bin, args, { encoding: "utf-8", maxBuffer: 1 << 26 });
  if (result.error) {
    throw result.error;
  }
  return {
    status: result.status ?? -1,
    stdout: result.stdout ?? "",
    stderr: result.stderr ?? "",
  };
}

const GVOL_MAGIC = "GVOL";

export function readGvol(path: string): ShapedArray {
  const raw = readFileSync(path);
  if (raw.subarray(0, 4).toString("ascii") !== GVOL_MAGIC) {
    throw new Error(`${path}: not a GVOL file`);
  }
  const headerLen = Number(raw.readBigUInt64LE(8));
  const header = JSON.parse(raw.subarray(16, 16 + headerLen).toString("utf-8"));
  const shape = header.dims as number[];
  const bytes = elementCount(shape) * 4;
  const payload = new Uint8Array(bytes);
  raw.copy(payload, 0, 16 + headerLen, 16 + headerLen + bytes);
  return { shape, data: new Float32Array(payload.buffer) };
}

export function writeGvol(path: string, arr: ShapedArray): void {
  const header = Buffer.from(
    JSON.stringify({ dims: arr.shape, spacing: null, modality: "OTHER", dtype: "f32le" }),
    "utf-8"
  );
  const prefix = Buffer.alloc(16);
  prefix.write(GVOL_MAGIC, 0, "ascii");
  prefix.writeUInt32LE(1, 4);
  prefix.writeBigUInt64LE(BigInt(header.length), 8);
  const payload = Buffer.from(
    arr.data.buffer.slice(arr.data.byteOffset, arr.data.byteOffset + arr.data.byteLength)
  );
  writeFileSync(path, Buffer.concat([prefix, header, payload]));
}

export function float32Bytes(arr: ShapedArray): Buffer {
  return Buffer.from(
    arr.data.buffer.slice(arr.data.byteOffset, arr.data.byteOffset + arr.data.byteLength)
  );
}

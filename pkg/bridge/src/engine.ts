// Subprocess transport: each call streams one framed request into
// `genesis bridge` and decodes the framed response.

import { spawnSync } from "node:child_process";

import { DecodedFrame, ShapedArray, decodeFrame, encodeFrame } from "./frames";

const DEFAULT_COMMAND = ["genesis", "bridge"];
const MAX_BUFFER = 1 << 29; // 512 MiB of framed payload

export interface EngineOptions {
  /** Engine invocation, e.g. ["genesis", "bridge"]; overrides $GENESIS_BIN. */
  command?: string[];
}

/** Engine-side failure; `category` carries the engine's error category
 * string (argument, config, io, verify). */
export class EngineError extends Error {
  constructor(message: string, readonly category: string) {
    super(message);
    this.name = "EngineError";
  }
}

function engineCommand(options?: EngineOptions): string[] {
  if (options?.command?.length) return options.command;
  const env = process.env.GENESIS_BIN;
  if (env) return [...env.split(" "), "bridge"];
  return DEFAULT_COMMAND;
}

export function callEngine(
  header: Record<string, unknown>,
  arrays: ShapedArray[],
  options?: EngineOptions
): DecodedFrame {
  const [cmd, ...args] = engineCommand(options);
  const result = spawnSync(cmd, args, {
    input: encodeFrame(header, arrays),
    maxBuffer: MAX_BUFFER,
  });
  if (result.error) {
    throw new EngineError(`cannot run engine: ${result.error.message}`, "io");
  }
  if (!result.stdout || result.stdout.length === 0) {
    const stderr = result.stderr?.toString("utf-8").trim();
    throw new EngineError(`engine produced no response${stderr ? `: ${stderr}` : ""}`, "io");
  }
  const frame = decodeFrame(result.stdout);
  if (!frame.header.ok) {
    const err = frame.header.error ?? {};
    throw new EngineError(err.message ?? "engine error", err.category ?? "error");
  }
  return frame;
}

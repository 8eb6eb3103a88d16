// In-memory bindings for the transformation-pair engine: distort patches
// and generate restoration pairs without touching the filesystem. Output
// bytes are identical to the engine's file-based pipeline for the same
// (config, master_seed, sample_index) keys.

import { EngineError, EngineOptions, callEngine } from "./engine";
import { ShapedArray, checkShapedArray } from "./frames";

export { EngineError, EngineOptions } from "./engine";
export { ShapedArray } from "./frames";

/** Scheme configuration: the `scheme` subsection of the engine's run
 * config, as an object or raw JSON string. */
export type SchemeConfig = Record<string, unknown> | string;

export interface SchemeSelection {
  nonlinear: boolean;
  shuffle: boolean;
  paint: "none" | "out" | "in";
}

export interface TransformRecord {
  index: number;
  source_id: string;
  origin: number[];
  shape: number[];
  selection: SchemeSelection;
  nonlinear: { direction: string; p1: number[]; p2: number[]; resolution: number } | null;
  shuffle: {
    master_seed: number;
    sample_index: number;
    num_windows: number;
    max_extent: number[];
    mode: string;
  } | null;
  paint: {
    target: string;
    windows: { offset: number[]; extent: number[] }[];
    cap: number;
    fill?: number;
    fills?: number[];
  } | null;
  checksum_x: string;
  checksum_xt: string;
}

export interface TransformResult {
  transformed: ShapedArray;
  record: TransformRecord;
}

export interface PairResult {
  original: ShapedArray;
  transformed: ShapedArray;
  record: TransformRecord;
}

export interface SizeRange {
  min: number[];
  max: number[];
}

function schemeField(config: SchemeConfig): Record<string, unknown> {
  if (typeof config !== "string") return config;
  let parsed: unknown;
  try {
    parsed = JSON.parse(config);
  } catch (err) {
    throw new EngineError(`scheme config is not valid JSON: ${err}`, "config");
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new EngineError("scheme config must be a JSON object", "config");
  }
  return parsed as Record<string, unknown>;
}

/** Distort one normalized patch; returns the distorted voxels plus the
 * replay record. */
export function transformPatch(
  patch: ShapedArray,
  config: SchemeConfig,
  masterSeed: number | bigint,
  sampleIndex: number | bigint,
  options?: EngineOptions
): TransformResult {
  checkShapedArray(patch, "patch");
  const frame = callEngine(
    {
      op: "transform",
      scheme: schemeField(config),
      master_seed: Number(masterSeed),
      sample_index: Number(sampleIndex),
    },
    [patch],
    options
  );
  return { transformed: frame.arrays[0], record: frame.header.record };
}

/** Generate n (original, distorted, record) pairs from normalized source
 * volumes, mirroring the file-based generator without persistence. Pairs
 * come back ordered by sample index. */
export function generatePairsInproc(
  volumes: ShapedArray[],
  config: SchemeConfig,
  n: number,
  masterSeed: number | bigint,
  options?: EngineOptions & { sizeRange?: SizeRange }
): PairResult[] {
  volumes.forEach((v, i) => checkShapedArray(v, `volume ${i}`));
  const frame = callEngine(
    {
      op: "generate_pairs",
      scheme: schemeField(config),
      master_seed: Number(masterSeed),
      n,
      size_range: options?.sizeRange ?? null,
    },
    volumes,
    options
  );
  const records: TransformRecord[] = frame.header.records;
  return records.map((record, i) => ({
    original: frame.arrays[2 * i],
    transformed: frame.arrays[2 * i + 1],
    record,
  }));
}

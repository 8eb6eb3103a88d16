"""Pair-dataset generation, persistence, and verification.

Directory layout:
  manifest.jsonl   header line, then one record line per sample (index order)
  sources/<id>.gvol   copies of the source volumes
  X_<i>.gvol / Xt_<i>.gvol   original and distorted patches

Every sample is a pure function of (volumes, configs, master_seed, index),
so regeneration with any worker count yields byte-identical trees.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checksum import checksum_hex, voxel_checksum
from .errors import ArgumentError, ConfigError, IoError, VerifyError
from .patches import Patch, SizeRange, sample_patch
from .rng import TAG_CROP, TAG_SCHEME, stream
from .scheme import (
    SchemeConfig,
    TransformRecord,
    draw_scheme,
    enumerate_schemes,
    replay,
    transform,
)
from .volume import Volume, read_gvol, write_gvol

MANIFEST_NAME = "manifest.jsonl"
MANIFEST_VERSION = 1


@dataclass
class SamplePair:
    original: Patch
    distorted: Patch
    record: TransformRecord


@dataclass
class Manifest:
    master_seed: int
    n: int
    scheme: SchemeConfig
    size_range: SizeRange
    volumes: list[tuple[str, str]]  # (id, checksum hex)
    records: list[TransformRecord] = field(default_factory=list)

    def header_json(self) -> str:
        return json.dumps(
            {
                "kind": "header",
                "version": MANIFEST_VERSION,
                "master_seed": self.master_seed,
                "n": self.n,
                "scheme": self.scheme.to_json_dict(),
                "size_range": [list(ax) for ax in self.size_range.axes],
                "volumes": [{"id": vid, "checksum": chk} for vid, chk in self.volumes],
            },
            separators=(",", ":"),
        )


def _sample_one(volumes, config: SchemeConfig, size_range: SizeRange,
                master_seed: int, index: int) -> SamplePair:
    crop_rng = stream(master_seed, index, TAG_CROP)
    vol_idx = crop_rng.uniform_int(0, len(volumes) - 1)
    vid, vol = volumes[vol_idx]
    patch = sample_patch(vol, size_range, crop_rng, source_id=vid)
    selection = draw_scheme(config, stream(master_seed, index, TAG_SCHEME))
    distorted, record = transform(patch, selection, config, master_seed, index)
    return SamplePair(patch, distorted, record)


def generate_pairs(
    volumes,
    scheme_config: SchemeConfig,
    size_range: SizeRange,
    n: int,
    master_seed: int,
    out_dir,
    threads: int = 1,
) -> Manifest:
    """Write n (X, Xt) pairs plus a manifest; returns the manifest.

    volumes: sequence of (id, Volume); the source for each sample is drawn
    per-sample, so output does not depend on worker count or volume file
    iteration order.
    """
    if n < 1:
        raise ArgumentError(f"need n >= 1 samples, got {n}")
    volumes = list(volumes)
    if not volumes:
        raise ArgumentError("need at least one source volume")
    seen = set()
    for vid, vol in volumes:
        if vid in seen:
            raise ArgumentError(f"duplicate volume id {vid!r}")
        seen.add(vid)
        if not vol.is_normalized():
            raise ArgumentError(f"volume {vid!r} is not normalized to [0,1]")
        size_range.validate_for(vol.dims)

    out = Path(out_dir)
    (out / "sources").mkdir(parents=True, exist_ok=True)
    for vid, vol in volumes:
        write_gvol(vol, out / "sources" / f"{vid}.gvol")

    by_id = dict(volumes)

    def build(index: int) -> SamplePair:
        pair = _sample_one(volumes, scheme_config, size_range, master_seed, index)
        spacing = by_id[pair.record.source_id].spacing
        write_gvol(Volume(pair.original.voxels, spacing, "OTHER"), out / f"X_{index}.gvol")
        write_gvol(Volume(pair.distorted.voxels, spacing, "OTHER"), out / f"Xt_{index}.gvol")
        return pair

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(build, range(n)))
    else:
        pairs = [build(i) for i in range(n)]

    manifest = Manifest(
        master_seed=master_seed,
        n=n,
        scheme=scheme_config,
        size_range=size_range,
        volumes=[(vid, checksum_hex(voxel_checksum(vol.voxels))) for vid, vol in volumes],
        records=[p.record for p in pairs],
    )
    with open(out / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        fh.write(manifest.header_json() + "\n")
        for pair in pairs:
            fh.write(pair.record.to_json() + "\n")
    return manifest


def load_manifest(dataset_dir) -> Manifest:
    path = Path(dataset_dir) / MANIFEST_NAME
    if not path.exists():
        raise IoError(f"no {MANIFEST_NAME} in {dataset_dir}", code="missing_manifest")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise IoError(f"{path}: empty manifest", code="bad_manifest")
    try:
        header = json.loads(lines[0])
    except ValueError as exc:
        raise IoError(f"{path}: bad header line ({exc})", code="bad_manifest") from exc
    if header.get("kind") != "header" or header.get("version") != MANIFEST_VERSION:
        raise IoError(f"{path}: unsupported manifest header", code="bad_manifest")
    try:
        manifest = Manifest(
            master_seed=header["master_seed"],
            n=header["n"],
            scheme=SchemeConfig.from_json_dict(header["scheme"]),
            size_range=SizeRange(tuple(tuple(ax) for ax in header["size_range"])),
            volumes=[(v["id"], v["checksum"]) for v in header["volumes"]],
        )
    except (KeyError, TypeError, ConfigError) as exc:
        raise IoError(f"{path}: malformed header ({exc})", code="bad_manifest") from exc
    records = [TransformRecord.from_json(line) for line in lines[1:]]
    for i, record in enumerate(records):
        if record.sample_index != i:
            raise IoError(
                f"{path}: record {i} carries index {record.sample_index}",
                code="bad_manifest",
            )
    if len(records) != manifest.n:
        raise IoError(
            f"{path}: header says {manifest.n} samples, found {len(records)}",
            code="bad_manifest",
        )
    manifest.records = records
    return manifest


def read_pair(dataset_dir, index: int) -> SamplePair:
    """Load one pair and validate voxels against the recorded checksums."""
    manifest = load_manifest(dataset_dir)
    if not 0 <= index < manifest.n:
        raise ArgumentError(f"sample index {index} out of range [0, {manifest.n})")
    record = manifest.records[index]
    base = Path(dataset_dir)
    x = read_gvol(base / f"X_{index}.gvol")
    xt = read_gvol(base / f"Xt_{index}.gvol")
    if checksum_hex(voxel_checksum(x.voxels)) != record.checksum_x:
        raise VerifyError(f"sample {index}: X file does not match record checksum")
    if checksum_hex(voxel_checksum(xt.voxels)) != record.checksum_xt:
        raise VerifyError(f"sample {index}: Xt file does not match record checksum")
    return SamplePair(
        original=Patch(record.origin, x.voxels, record.source_id),
        distorted=Patch(record.origin, xt.voxels, record.source_id),
        record=record,
    )


@dataclass
class VerificationReport:
    total: int
    failures: list[dict]
    scheme_counts: dict[str, int]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def pass_count(self) -> int:
        return self.total - len(self.failures)

    def to_json_dict(self) -> dict:
        return {
            "total": self.total,
            "passed": self.pass_count,
            "failed": len(self.failures),
            "failures": self.failures,
            "scheme_counts": self.scheme_counts,
        }


def verify_manifest(dataset_dir) -> VerificationReport:
    """Replay every record against the stored sources and stored pair files."""
    base = Path(dataset_dir)
    manifest = load_manifest(base)
    sources: dict[str, Volume] = {}
    failures: list[dict] = []
    for vid, expected in manifest.volumes:
        try:
            vol = read_gvol(base / "sources" / f"{vid}.gvol")
        except IoError as exc:
            failures.append({"index": None, "source": vid, "reason": str(exc)})
            continue
        if checksum_hex(voxel_checksum(vol.voxels)) != expected:
            failures.append(
                {"index": None, "source": vid, "reason": "source checksum mismatch"}
            )
            continue
        sources[vid] = vol

    counts = {label: 0 for label in enumerate_schemes()}
    for record in manifest.records:
        counts[record.selection.label()] += 1
        index = record.sample_index
        if record.source_id not in sources:
            failures.append({"index": index, "reason": f"missing source {record.source_id}"})
            continue
        try:
            _original, rebuilt = replay(sources[record.source_id], record)
            stored_x = read_gvol(base / f"X_{index}.gvol")
            stored_xt = read_gvol(base / f"Xt_{index}.gvol")
        except (IoError, VerifyError) as exc:
            failures.append({"index": index, "reason": str(exc)})
            continue
        if checksum_hex(voxel_checksum(stored_x.voxels)) != record.checksum_x:
            failures.append({"index": index, "reason": "X file checksum mismatch"})
        elif not np.array_equal(stored_xt.voxels, rebuilt.voxels):
            failures.append({"index": index, "reason": "Xt file differs from replay"})
    return VerificationReport(total=manifest.n, failures=failures, scheme_counts=counts)

"""Volumes, the GVOL container format, normalization, and test phantoms.

GVOL on-disk layout (all little-endian):
  bytes 0-3   magic "GVOL"
  bytes 4-7   version u32 (=1)
  bytes 8-15  header_len u64
  header      UTF-8 JSON {dims, spacing, modality, dtype: "f32le"}
  payload     d*h*w f32 values, C order (depth-major)

2D images are volumes with d == 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, IoError
from .rng import Rng

MAGIC = b"GVOL"
VERSION = 1

MODALITIES = ("CT", "XRAY", "OTHER")

HU_LO = -1000.0
HU_HI = 1000.0


@dataclass
class Volume:
    """Dense scalar image; voxels are f32, shape (d, h, w)."""

    voxels: np.ndarray
    spacing: tuple[float, float, float] | None = None
    modality: str = "OTHER"

    def __post_init__(self):
        self.voxels = np.asarray(self.voxels, dtype=np.float32)
        if self.voxels.ndim != 3:
            raise ArgumentError(f"volume must be 3-dimensional, got {self.voxels.ndim}")
        if min(self.voxels.shape) < 1:
            raise ArgumentError(f"volume dims must be positive, got {self.dims}")
        if self.modality not in MODALITIES:
            raise ArgumentError(f"unknown modality {self.modality!r}")
        if not np.isfinite(self.voxels).all():
            raise ArgumentError("volume contains non-finite voxels")

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.voxels.shape)

    def is_normalized(self) -> bool:
        return bool((self.voxels >= 0.0).all() and (self.voxels <= 1.0).all())


def write_gvol(volume: Volume, path) -> None:
    header = {
        "dims": list(volume.dims),
        "spacing": list(volume.spacing) if volume.spacing is not None else None,
        "modality": volume.modality,
        "dtype": "f32le",
    }
    body = json.dumps(header).encode("utf-8")
    payload = np.ascontiguousarray(volume.voxels, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(VERSION.to_bytes(4, "little"))
        fh.write(len(body).to_bytes(8, "little"))
        fh.write(body)
        fh.write(payload)


def read_gvol(path) -> Volume:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}", code="missing") from exc
    if len(raw) < 16 or raw[0:4] != MAGIC:
        raise IoError(f"{path}: not a GVOL file", code="bad_magic")
    version = int.from_bytes(raw[4:8], "little")
    if version != VERSION:
        raise IoError(f"{path}: unsupported version {version}", code="version_mismatch")
    header_len = int.from_bytes(raw[8:16], "little")
    if len(raw) < 16 + header_len:
        raise IoError(f"{path}: truncated header", code="truncated")
    try:
        header = json.loads(raw[16 : 16 + header_len])
    except ValueError as exc:
        raise IoError(f"{path}: bad header JSON ({exc})", code="bad_header") from exc
    if header.get("dtype") != "f32le":
        raise IoError(f"{path}: unsupported dtype {header.get('dtype')!r}", code="bad_dtype")
    dims = header.get("dims")
    if (
        not isinstance(dims, list)
        or len(dims) != 3
        or any(not isinstance(d, int) or d < 1 for d in dims)
    ):
        raise IoError(f"{path}: bad dims {dims!r}", code="bad_dims")
    count = dims[0] * dims[1] * dims[2]
    payload = raw[16 + header_len :]
    if len(payload) < count * 4:
        raise IoError(
            f"{path}: payload holds {len(payload)} bytes, need {count * 4}",
            code="truncated",
        )
    if len(payload) > count * 4:
        raise IoError(f"{path}: trailing bytes after payload", code="trailing_data")
    voxels = np.frombuffer(payload, dtype="<f4").reshape(dims)
    if not np.isfinite(voxels).all():
        raise IoError(f"{path}: non-finite voxels", code="non_finite")
    spacing = header.get("spacing")
    return Volume(
        voxels=voxels.copy(),
        spacing=tuple(spacing) if spacing is not None else None,
        modality=header.get("modality", "OTHER"),
    )


def normalize_ct(volume: Volume) -> Volume:
    """Clip to [-1000, 1000] HU, then map linearly onto [0, 1]."""
    if volume.modality != "CT":
        raise ArgumentError(
            f"normalize_ct requires CT modality, got {volume.modality}; "
            "use normalize_minmax instead"
        )
    v = volume.voxels.astype(np.float64)
    out = (np.clip(v, HU_LO, HU_HI) - HU_LO) / (HU_HI - HU_LO)
    return Volume(out.astype(np.float32), volume.spacing, volume.modality)


def normalize_minmax(volume: Volume) -> Volume:
    """Map [min, max] onto [0, 1]; rejects constant volumes."""
    v = volume.voxels.astype(np.float64)
    lo = float(v.min())
    hi = float(v.max())
    if hi <= lo:
        raise ArgumentError("normalize_minmax: constant volume has no defined mapping")
    out = (v - lo) / (hi - lo)
    return Volume(out.astype(np.float32), volume.spacing, volume.modality)


PHANTOM_KINDS = ("sphere", "cube", "gradient", "blobs")

# Soft shell width (voxels): beyond radius + SOFT_EDGE the shape contributes
# exactly zero, keeping the background analytically known.
SOFT_EDGE = 2.0


def _axis_gradient(dims, axis: int, lo: float, hi: float) -> np.ndarray:
    n = dims[axis]
    ramp = np.linspace(lo, hi, n) if n > 1 else np.full(1, (lo + hi) / 2.0)
    shape = [1, 1, 1]
    shape[axis] = n
    return np.broadcast_to(ramp.reshape(shape), dims).astype(np.float64)


def _soft_shape(dims, center, radius: float, metric: str) -> np.ndarray:
    grids = np.ogrid[0 : dims[0], 0 : dims[1], 0 : dims[2]]
    deltas = [(g - c).astype(np.float64) for g, c in zip(grids, center)]
    if metric == "euclidean":
        dist = np.sqrt(sum(d * d for d in deltas))
    else:  # chebyshev -> cube
        dist = np.maximum.reduce([np.broadcast_to(abs(d), dims) for d in deltas])
    # 1 inside, cosine falloff across the soft shell, exactly 0 beyond it
    t = np.clip((dist - radius) / SOFT_EDGE, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * t)) * (dist <= radius + SOFT_EDGE)


def make_phantom(kind: str, dims, rng: Rng) -> Volume:
    """Structured test volume in [0, 1]: gradient background plus a shape.

    Shape parameters (axis, center, radius) come from rng, so equal rng
    states give identical phantoms. The caller keeps track of `kind` when
    building labeled probe sets.
    """
    if kind not in PHANTOM_KINDS:
        raise ArgumentError(f"unknown phantom kind {kind!r}")
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3:
        raise ArgumentError("phantom dims must be (d, h, w)")
    if any(d < 8 for d in dims if d > 1) or all(d < 8 for d in dims):
        raise ArgumentError(f"phantom dims too small: {dims} (need >= 8 per real axis)")

    real_axes = [a for a in range(3) if dims[a] > 1]
    axis = real_axes[rng.uniform_int(0, len(real_axes) - 1)]
    lo = rng.uniform(0.05, 0.15)
    hi = rng.uniform(0.30, 0.45)
    background = _axis_gradient(dims, axis, lo, hi)

    if kind == "gradient":
        return Volume(background.astype(np.float32), None, "OTHER")

    def draw_shape(metric: str) -> np.ndarray:
        short = min(dims[a] for a in real_axes)
        radius = rng.uniform(short / 6.0, short / 3.0)
        center = []
        for a in range(3):
            if dims[a] == 1:
                center.append(0.0)
            else:
                margin = radius + SOFT_EDGE
                c_lo = min(margin, dims[a] / 2.0)
                c_hi = max(dims[a] - margin, dims[a] / 2.0)
                center.append(rng.uniform(c_lo, c_hi))
        amplitude = rng.uniform(0.35, 0.55)
        return amplitude * _soft_shape(dims, center, radius, metric)

    if kind == "sphere":
        body = draw_shape("euclidean")
    elif kind == "cube":
        body = draw_shape("chebyshev")
    else:  # blobs
        count = rng.uniform_int(2, 4)
        body = np.zeros(dims, dtype=np.float64)
        for _ in range(count):
            body = np.maximum(body, draw_shape("euclidean"))

    out = np.clip(background + body, 0.0, 1.0)
    return Volume(out.astype(np.float32), None, "OTHER")

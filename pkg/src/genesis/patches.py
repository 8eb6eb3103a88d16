"""Patch extraction: random crops of arbitrary size from normalized volumes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .rng import Rng
from .volume import Volume

# Default crop ranges when a config leaves sizes open; capped by volume dims.
DEFAULT_3D_RANGE = ((32, 64), (32, 64), (32, 64))
DEFAULT_2D_RANGE = ((1, 1), (64, 64), (64, 64))


@dataclass
class Patch:
    """A crop of a volume; voxels are f32 in [0, 1]."""

    origin: tuple[int, int, int]
    voxels: np.ndarray
    source_id: str = ""

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.voxels.shape)


@dataclass(frozen=True)
class SizeRange:
    """Per-axis inclusive (min, max) crop sizes."""

    axes: tuple[tuple[int, int], tuple[int, int], tuple[int, int]]

    def __post_init__(self):
        for lo, hi in self.axes:
            if not 1 <= lo <= hi:
                raise ArgumentError(f"invalid size range {self.axes}")

    @classmethod
    def fixed(cls, shape) -> "SizeRange":
        return cls(tuple((int(s), int(s)) for s in shape))

    @classmethod
    def of(cls, min_shape, max_shape) -> "SizeRange":
        return cls(tuple((int(a), int(b)) for a, b in zip(min_shape, max_shape)))

    def validate_for(self, dims) -> None:
        for axis, ((lo, _hi), dim) in enumerate(zip(self.axes, dims)):
            if lo > dim:
                raise ArgumentError(
                    f"size range min {lo} exceeds volume dim {dim} on axis {axis}"
                )


def sample_patch(volume: Volume, size_range: SizeRange, rng: Rng, source_id: str = "") -> Patch:
    """Random crop: per-axis size draw, then uniform origin over placements.

    Draw order (pinned for replay): sizes for axes 0,1,2, then origins for
    axes 0,1,2. Sizes above a volume dim are clamped to it.
    """
    size_range.validate_for(volume.dims)
    shape = []
    for (lo, hi), dim in zip(size_range.axes, volume.dims):
        shape.append(rng.uniform_int(lo, min(hi, dim)))
    origin = []
    for size, dim in zip(shape, volume.dims):
        origin.append(rng.uniform_int(0, dim - size))
    return extract(volume, tuple(origin), tuple(shape), source_id)


def extract(volume: Volume, origin, shape, source_id: str = "") -> Patch:
    """Deterministic crop at a known placement (the replay path)."""
    origin = tuple(int(v) for v in origin)
    shape = tuple(int(v) for v in shape)
    for o, s, dim in zip(origin, shape, volume.dims):
        if o < 0 or s < 1 or o + s > dim:
            raise ArgumentError(
                f"crop origin={origin} shape={shape} out of bounds for dims {volume.dims}"
            )
    z, y, x = origin
    d, h, w = shape
    vox = volume.voxels[z : z + d, y : y + h, x : x + w].copy()
    return Patch(origin=origin, voxels=vox, source_id=source_id)


def center_crop(voxels: np.ndarray, shape) -> np.ndarray:
    """Crop the centered sub-block; errors if the input is smaller."""
    shape = tuple(int(s) for s in shape)
    if any(v < s for v, s in zip(voxels.shape, shape)):
        raise ArgumentError(f"cannot center-crop {voxels.shape} to {shape}")
    starts = [(v - s) // 2 for v, s in zip(voxels.shape, shape)]
    z, y, x = starts
    d, h, w = shape
    return voxels[z : z + d, y : y + h, x : x + w].copy()

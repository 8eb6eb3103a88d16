"""In-memory engine entry points: the same pipeline as dataset generation,
minus the filesystem. These back the stdio bridge used by host-language
callers and are handy for Python pipelines that hold arrays already.

Source volumes passed as bare arrays get ids "v0", "v1", ..., matching a
file-based run over volumes named v0.gvol, v1.gvol, ... so records from
both paths compare equal.
"""

from __future__ import annotations

import json
from typing import Iterator

import numpy as np

from .errors import ArgumentError, ConfigError
from .patches import DEFAULT_2D_RANGE, DEFAULT_3D_RANGE, Patch, SizeRange
from .rng import TAG_SCHEME, stream
from .scheme import SchemeConfig, draw_scheme, transform
from .dataset import _sample_one
from .volume import Volume


def _parse_config(config_json) -> SchemeConfig:
    if isinstance(config_json, SchemeConfig):
        return config_json
    if isinstance(config_json, str):
        try:
            config_json = json.loads(config_json)
        except ValueError as exc:
            raise ConfigError(f"scheme config is not valid JSON: {exc}") from exc
    return SchemeConfig.from_json_dict(config_json)


def _as_voxels(array, what: str) -> np.ndarray:
    voxels = np.asarray(array, dtype=np.float32)
    if voxels.ndim == 2:
        voxels = voxels[None, :, :]
    if voxels.ndim != 3:
        raise ArgumentError(f"{what} must be a 2-d or 3-d array, got ndim {voxels.ndim}")
    if voxels.size == 0:
        raise ArgumentError(f"{what} is empty")
    if not np.isfinite(voxels).all():
        raise ArgumentError(f"{what} contains non-finite values")
    return voxels


def default_size_range(dims) -> SizeRange:
    base = DEFAULT_2D_RANGE if dims[0] == 1 else DEFAULT_3D_RANGE
    axes = []
    for (lo, hi), dim in zip(base, dims):
        lo = min(lo, dim)
        hi = min(hi, dim)
        axes.append((lo, hi))
    return SizeRange(tuple(axes))


def transform_patch(array, config_json, master_seed: int, sample_index: int
                    ) -> tuple[np.ndarray, dict]:
    """Distort one in-memory patch; returns (voxels, record dict).

    Byte-compatible with the dataset pipeline: the same (config,
    master_seed, sample_index) keys produce the same draw streams.
    """
    config = _parse_config(config_json)
    voxels = _as_voxels(array, "patch")
    patch = Patch((0, 0, 0), voxels, source_id="inline")
    selection = draw_scheme(config, stream(master_seed, sample_index, TAG_SCHEME))
    distorted, record = transform(patch, selection, config, master_seed, sample_index)
    return distorted.voxels, record.to_json_dict()


def generate_pairs_inproc(
    arrays,
    config_json,
    n: int,
    master_seed: int,
    size_range: SizeRange | None = None,
) -> Iterator[tuple[np.ndarray, np.ndarray, dict]]:
    """Yield n (original, distorted, record) triples without persistence.

    Mirrors dataset.generate_pairs: same streams, same records, no files.
    """
    config = _parse_config(config_json)
    if n < 1:
        raise ArgumentError(f"need n >= 1 samples, got {n}")
    volumes = []
    for i, array in enumerate(arrays):
        vol = Volume(_as_voxels(array, f"volume {i}"))
        if not vol.is_normalized():
            raise ArgumentError(f"volume {i} is not normalized to [0,1]")
        volumes.append((f"v{i}", vol))
    if not volumes:
        raise ArgumentError("need at least one source volume")
    if size_range is None:
        size_range = default_size_range(volumes[0][1].dims)
    for _vid, vol in volumes:
        size_range.validate_for(vol.dims)
    for index in range(n):
        pair = _sample_one(volumes, config, size_range, master_seed, index)
        yield pair.original.voxels, pair.distorted.voxels, pair.record.to_json_dict()

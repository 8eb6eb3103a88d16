"""Labeled phantom sets for measuring representation transfer.

The probe task is shape classification (sphere vs cube) under per-sample
monotone intensity remaps, so a probe rewards features that survive the
appearance variation the restorer was pretrained against; set
intensity_remap=False for the raw-appearance variant.
"""

from __future__ import annotations

import numpy as np

from .rng import TAG_NONLINEAR, TAG_PROBE, stream
from .transforms import apply_nonlinear, bezier_lut, sample_bezier_params
from .volume import make_phantom

PROBE_PATCH_DIMS = (16, 16, 16)


def build_probe_set(
    seed: int,
    samples_per_class: int,
    dims=PROBE_PATCH_DIMS,
    intensity_remap: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Balanced sphere(0)-vs-cube(1) phantoms, flattened f64."""
    patches = []
    labels = []
    for i in range(samples_per_class * 2):
        kind = "sphere" if i < samples_per_class else "cube"
        voxels = make_phantom(kind, dims, stream(seed, i, TAG_PROBE)).voxels
        if intensity_remap:
            params = sample_bezier_params(stream(seed, i, TAG_NONLINEAR))
            voxels = apply_nonlinear(voxels, bezier_lut(params))
        patches.append(voxels.astype(np.float64).ravel())
        labels.append(0 if kind == "sphere" else 1)
    return np.asarray(patches), np.asarray(labels, dtype=np.float64)

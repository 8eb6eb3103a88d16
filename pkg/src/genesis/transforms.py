"""The four patch distortions: monotone intensity remap, windowed voxel
shuffling, exterior fill (out-painting) and interior fill (in-painting).

All operators are pure functions of (voxels, parameters or rng state);
sampling helpers draw parameters from an explicit stream so every result
can be regenerated from its record. Voxels stay f32; arithmetic runs in
f64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .rng import Rng

# ---------------------------------------------------------------------------
# Non-linear intensity transformation (cubic curve with fixed endpoints)
# ---------------------------------------------------------------------------

INCREASING = "increasing"
DECREASING = "decreasing"

DEFAULT_LUT_RESOLUTION = 1000


@dataclass(frozen=True)
class BezierParams:
    """Cubic curve control points; endpoints pinned by direction.

    increasing: (0,0) -> (1,1); decreasing: (0,1) -> (1,0). The two inner
    control points are free in the unit square, which keeps both curve
    coordinates monotone in t, so the curve is a one-to-one value map.
    """

    direction: str
    p1: tuple[float, float]
    p2: tuple[float, float]

    @property
    def p0(self) -> tuple[float, float]:
        return (0.0, 0.0) if self.direction == INCREASING else (0.0, 1.0)

    @property
    def p3(self) -> tuple[float, float]:
        return (1.0, 1.0) if self.direction == INCREASING else (1.0, 0.0)


@dataclass(frozen=True)
class IntensityLUT:
    """Sampled curve knots, sorted by x; maps [0,1] -> [0,1] by lerp."""

    xs: np.ndarray
    ys: np.ndarray


def sample_bezier_params(rng: Rng) -> BezierParams:
    """Draw order (pinned): direction coin, p1.x, p1.y, p2.x, p2.y."""
    direction = INCREASING if rng.chance(0.5) else DECREASING
    p1 = (rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0))
    p2 = (rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0))
    return BezierParams(direction, p1, p2)


def bezier_point(params: BezierParams, t: float) -> tuple[float, float]:
    """Direct cubic evaluation at one t."""
    u = 1.0 - t
    coeff = (u**3, 3.0 * u * u * t, 3.0 * u * t * t, t**3)
    pts = (params.p0, params.p1, params.p2, params.p3)
    x = sum(c * p[0] for c, p in zip(coeff, pts))
    y = sum(c * p[1] for c, p in zip(coeff, pts))
    return x, y


def bezier_lut(params: BezierParams, resolution: int = DEFAULT_LUT_RESOLUTION) -> IntensityLUT:
    """Sample the curve at `resolution` uniform t values and sort by x.

    Equal x knots keep the first occurrence. Monotonicity holds exactly in
    real arithmetic; a running max/min clamps float dust so downstream
    order checks are exact.
    """
    if resolution < 2:
        raise ArgumentError(f"lut resolution must be >= 2, got {resolution}")
    t = np.linspace(0.0, 1.0, resolution)
    u = 1.0 - t
    basis = np.stack([u**3, 3.0 * u * u * t, 3.0 * u * t * t, t**3])
    pts = np.array([params.p0, params.p1, params.p2, params.p3])
    xs = pts[:, 0] @ basis
    ys = pts[:, 1] @ basis
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    keep = np.ones(len(xs), dtype=bool)
    keep[1:] = xs[1:] != xs[:-1]
    xs, ys = xs[keep], ys[keep]
    if params.direction == INCREASING:
        ys = np.maximum.accumulate(ys)
    else:
        ys = np.minimum.accumulate(ys)
    return IntensityLUT(xs, ys)


def apply_nonlinear(voxels: np.ndarray, lut: IntensityLUT) -> np.ndarray:
    """Remap every voxel through the curve; positions untouched."""
    flat = voxels.astype(np.float64, copy=False).ravel()
    out = np.interp(flat, lut.xs, lut.ys)
    return out.reshape(voxels.shape).astype(np.float32)


# ---------------------------------------------------------------------------
# Local voxel shuffling
# ---------------------------------------------------------------------------

AXIS_PERMUTE = "axis_permute"
FREE_SHUFFLE = "free_shuffle"
SHUFFLE_MODES = (AXIS_PERMUTE, FREE_SHUFFLE)

DEFAULT_SHUFFLE_WINDOWS = 1000


@dataclass(frozen=True)
class WindowSpec:
    """Axis-aligned box inside a patch."""

    offset: tuple[int, int, int]
    extent: tuple[int, int, int]

    def slices(self) -> tuple[slice, slice, slice]:
        return tuple(slice(o, o + e) for o, e in zip(self.offset, self.extent))


@dataclass(frozen=True)
class PermutationPair:
    """Per-axis gather indices: out[i,j,k] = in[depth[i], rows[j], cols[k]]."""

    depth: tuple[int, ...]
    rows: tuple[int, ...]
    cols: tuple[int, ...]


def permute_window(window: np.ndarray, perms: PermutationPair) -> np.ndarray:
    """Permute depth slices, rows, and columns of a window.

    Equivalent to pre-/post-multiplying each slice by permutation matrices,
    generalized with a third permutation along the depth axis.
    """
    if (
        len(perms.depth) != window.shape[0]
        or len(perms.rows) != window.shape[1]
        or len(perms.cols) != window.shape[2]
    ):
        raise ArgumentError(
            f"permutation sizes {len(perms.depth)}x{len(perms.rows)}x{len(perms.cols)} "
            f"do not match window {window.shape}"
        )
    return window[np.ix_(perms.depth, perms.rows, perms.cols)]


def _resolve_max_extent(shape, max_extent) -> tuple[int, int, int]:
    if max_extent is None:
        return tuple(max(1, s // 4) for s in shape)
    if isinstance(max_extent, int):
        max_extent = (max_extent,) * 3
    return tuple(int(m) for m in max_extent)


def local_shuffle(
    voxels: np.ndarray,
    rng: Rng,
    num_windows: int = DEFAULT_SHUFFLE_WINDOWS,
    max_extent=None,
    mode: str = AXIS_PERMUTE,
    receptive_field: int | None = None,
) -> np.ndarray:
    """Apply `num_windows` sequential in-window permutations.

    Per window, the draw order is: extent (z, y, x), offset (z, y, x), then
    the permutations (per axis for axis_permute, one flat Fisher-Yates for
    free_shuffle). max_extent defaults to shape//4 per axis and must stay
    at or below `receptive_field` when one is configured.
    """
    if mode not in SHUFFLE_MODES:
        raise ArgumentError(f"unknown shuffle mode {mode!r}")
    shape = voxels.shape
    limits = _resolve_max_extent(shape, max_extent)
    for axis, (limit, size) in enumerate(zip(limits, shape)):
        if limit < 1 or limit > size:
            raise ArgumentError(
                f"shuffle max extent {limit} invalid for axis {axis} of size {size}"
            )
        if receptive_field is not None and limit > receptive_field:
            raise ArgumentError(
                f"shuffle max extent {limit} exceeds receptive-field bound {receptive_field}"
            )
    out = voxels.copy()
    for _ in range(num_windows):
        extent = tuple(rng.uniform_int(1, limit) for limit in limits)
        offset = tuple(rng.uniform_int(0, s - e) for s, e in zip(shape, extent))
        window = WindowSpec(offset, extent)
        block = out[window.slices()]
        if mode == AXIS_PERMUTE:
            perms = PermutationPair(
                tuple(rng.shuffle_indices(extent[0])),
                tuple(rng.shuffle_indices(extent[1])),
                tuple(rng.shuffle_indices(extent[2])),
            )
            out[window.slices()] = permute_window(block, perms)
        else:
            perm = rng.shuffle_indices(block.size)
            out[window.slices()] = block.ravel()[perm].reshape(block.shape)
    return out


# ---------------------------------------------------------------------------
# Painting (exterior / interior fills)
# ---------------------------------------------------------------------------

EXTERIOR = "exterior"
INTERIOR = "interior"

DEFAULT_PAINT_WINDOWS = 10
DEFAULT_PAINT_CAP = 0.25

# Window extents relative to the patch shape, per target.
_EXTERIOR_EXTENT = (0.25, 0.875)  # large boxes whose union is retained
_INTERIOR_EXTENT = (0.125, 0.5)  # small boxes whose union is replaced


def _check_paint_shape(shape) -> None:
    for axis, size in enumerate(shape):
        if size > 1 and size < 8:
            raise ArgumentError(
                f"paint target axis {axis} has size {size}; needs >= 8 (or 1 for 2D)"
            )
    if all(s == 1 for s in shape):
        raise ArgumentError("degenerate patch shape for painting")


def _draw_window(shape, lo_frac: float, hi_frac: float, rng: Rng) -> WindowSpec:
    extent = []
    for size in shape:
        if size == 1:
            extent.append(1)
            continue
        lo = max(1, int(size * lo_frac))
        hi = max(lo, int(size * hi_frac))
        extent.append(rng.uniform_int(lo, hi))
    offset = tuple(rng.uniform_int(0, s - e) for s, e in zip(shape, extent))
    return WindowSpec(offset, tuple(extent))


def _dilate(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    for axis in range(mask.ndim):
        if mask.shape[axis] == 1:
            continue
        lo = [slice(None)] * mask.ndim
        hi = [slice(None)] * mask.ndim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        out[tuple(lo)] |= mask[tuple(hi)]
        out[tuple(hi)] |= mask[tuple(lo)]
    return out


def sample_exterior_windows(shape, rng: Rng, max_windows: int = DEFAULT_PAINT_WINDOWS,
                            cap: float = DEFAULT_PAINT_CAP) -> list[WindowSpec]:
    """Union windows until the uncovered (exterior) fraction drops below cap
    or the window budget runs out."""
    _check_paint_shape(shape)
    kept = np.zeros(shape, dtype=bool)
    windows: list[WindowSpec] = []
    for _ in range(max_windows):
        win = _draw_window(shape, *_EXTERIOR_EXTENT, rng)
        windows.append(win)
        kept[win.slices()] = True
        if 1.0 - kept.mean() < cap:
            break
    return windows


def exterior_mask(shape, windows, cap: float = DEFAULT_PAINT_CAP) -> np.ndarray:
    """Deterministic mask rebuild: union, then dilate until exterior < cap."""
    kept = np.zeros(shape, dtype=bool)
    for win in windows:
        kept[win.slices()] = True
    while 1.0 - kept.mean() >= cap:
        kept = _dilate(kept)
    return kept


def build_paint_mask(shape, target: str, rng: Rng,
                     max_windows: int = DEFAULT_PAINT_WINDOWS,
                     cap: float = DEFAULT_PAINT_CAP) -> np.ndarray:
    """Boolean kept-mask (True = voxel retained) for either paint target."""
    if target == EXTERIOR:
        return exterior_mask(shape, sample_exterior_windows(shape, rng, max_windows, cap), cap)
    if target == INTERIOR:
        windows, _fills = sample_interior_windows(shape, rng, max_windows, cap)
        kept = np.ones(shape, dtype=bool)
        for win in windows:
            kept[win.slices()] = False
        return kept
    raise ArgumentError(f"unknown paint target {target!r}")


def out_paint(voxels: np.ndarray, mask: np.ndarray, rng: Rng) -> tuple[np.ndarray, float]:
    """Fill everything outside the kept mask with one random value."""
    fill = rng.uniform(0.0, 1.0)
    return apply_out_paint(voxels, mask, fill), fill


def apply_out_paint(voxels: np.ndarray, mask: np.ndarray, fill: float) -> np.ndarray:
    if mask.shape != voxels.shape:
        raise ArgumentError(f"mask shape {mask.shape} != patch shape {voxels.shape}")
    out = voxels.copy()
    out[~mask] = np.float32(fill)
    return out


def sample_interior_windows(shape, rng: Rng, max_windows: int = DEFAULT_PAINT_WINDOWS,
                            cap: float = DEFAULT_PAINT_CAP
                            ) -> tuple[list[WindowSpec], list[float]]:
    """Draw interior fill windows, skipping any that would push the replaced
    fraction past cap; at least one window is always produced.

    Per accepted window the draw order is extent, offset, fill value; a
    rejected window consumes no fill draw.
    """
    _check_paint_shape(shape)
    replaced = np.zeros(shape, dtype=bool)
    windows: list[WindowSpec] = []
    fills: list[float] = []
    count = rng.uniform_int(1, max_windows)
    for _ in range(count):
        win = _draw_window(shape, *_INTERIOR_EXTENT, rng)
        candidate = replaced.copy()
        candidate[win.slices()] = True
        if candidate.mean() > cap:
            continue
        replaced = candidate
        windows.append(win)
        fills.append(rng.uniform(0.0, 1.0))
    shrink = _INTERIOR_EXTENT[1]
    while not windows:
        # every draw overflowed a small cap: force one window, shrinking
        # the extent range until it fits
        shrink /= 2.0
        win = _draw_window(shape, min(_INTERIOR_EXTENT[0], shrink), shrink, rng)
        candidate = np.zeros(shape, dtype=bool)
        candidate[win.slices()] = True
        if candidate.mean() <= cap:
            windows.append(win)
            fills.append(rng.uniform(0.0, 1.0))
        elif all(e == 1 for e in win.extent):
            raise ArgumentError(f"cap {cap} unreachable for shape {tuple(shape)}")
    return windows, fills


def in_paint(voxels: np.ndarray, rng: Rng, max_windows: int = DEFAULT_PAINT_WINDOWS,
             cap: float = DEFAULT_PAINT_CAP
             ) -> tuple[np.ndarray, list[WindowSpec], list[float]]:
    """Overwrite interior windows with per-window constants."""
    windows, fills = sample_interior_windows(voxels.shape, rng, max_windows, cap)
    return apply_in_paint(voxels, windows, fills), windows, fills


def apply_in_paint(voxels: np.ndarray, windows, fills) -> np.ndarray:
    if len(windows) != len(fills):
        raise ArgumentError("windows and fills must pair up")
    out = voxels.copy()
    for win, fill in zip(windows, fills):
        out[win.slices()] = np.float32(fill)
    return out

"""Unified distortion schemes: per-patch transformation draws, application
in a pinned order, and replayable records.

Application order is fixed as painting -> shuffling -> intensity remap, so
painted fills also pass through the intensity curve; the order is part of
the replay contract. A record stores explicit parameters for the curve and
the paint windows, and a stream key for the (bulky) shuffle window list.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import transforms as tf
from .checksum import checksum_hex, voxel_checksum
from .errors import ArgumentError, ConfigError, VerifyError
from .patches import Patch, extract
from .rng import TAG_NONLINEAR, TAG_PAINT, TAG_SHUFFLE, Rng, stream
from .volume import Volume

PAINT_NONE = "none"
PAINT_OUT = "out"
PAINT_IN = "in"


@dataclass(frozen=True)
class SchemeConfig:
    """Probabilities and transform settings for the unified framework."""

    p_nonlinear: float = 0.9
    p_shuffle: float = 0.5
    p_paint: float = 0.9
    p_inpaint_given_paint: float = 0.8
    shuffle_windows: int = tf.DEFAULT_SHUFFLE_WINDOWS
    shuffle_max_extent: tuple[int, int, int] | None = None  # None -> shape//4
    shuffle_mode: str = tf.AXIS_PERMUTE
    receptive_field: int | None = None
    paint_max_windows: int = tf.DEFAULT_PAINT_WINDOWS
    paint_cap: float = tf.DEFAULT_PAINT_CAP
    bezier_resolution: int = tf.DEFAULT_LUT_RESOLUTION

    def __post_init__(self):
        for name in ("p_nonlinear", "p_shuffle", "p_paint", "p_inpaint_given_paint"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0,1], got {p}")
        if not 0.0 < self.paint_cap <= 0.25:
            raise ConfigError(f"paint_cap must be in (0, 0.25], got {self.paint_cap}")
        if not 1 <= self.paint_max_windows <= 10:
            raise ConfigError(
                f"paint_max_windows must be in [1,10], got {self.paint_max_windows}"
            )
        if self.shuffle_windows < 0:
            raise ConfigError("shuffle_windows must be >= 0")
        if self.shuffle_mode not in tf.SHUFFLE_MODES:
            raise ConfigError(f"unknown shuffle mode {self.shuffle_mode!r}")
        if self.bezier_resolution < 2:
            raise ConfigError("bezier_resolution must be >= 2")

    # JSON wire form (also the in-process bridge config schema)
    def to_json_dict(self) -> dict:
        return {
            "p_nonlinear": self.p_nonlinear,
            "p_shuffle": self.p_shuffle,
            "p_paint": self.p_paint,
            "p_inpaint_given_paint": self.p_inpaint_given_paint,
            "shuffle": {
                "num_windows": self.shuffle_windows,
                "max_extent": list(self.shuffle_max_extent)
                if self.shuffle_max_extent is not None
                else None,
                "mode": self.shuffle_mode,
                "receptive_field": self.receptive_field,
            },
            "paint": {"max_windows": self.paint_max_windows, "cap": self.paint_cap},
            "bezier_resolution": self.bezier_resolution,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SchemeConfig":
        if not isinstance(data, dict):
            raise ConfigError("scheme config must be a JSON object")
        allowed = {
            "p_nonlinear",
            "p_shuffle",
            "p_paint",
            "p_inpaint_given_paint",
            "shuffle",
            "paint",
            "bezier_resolution",
        }
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown scheme config keys: {sorted(unknown)}")
        kwargs: dict = {}
        for key in ("p_nonlinear", "p_shuffle", "p_paint", "p_inpaint_given_paint",
                    "bezier_resolution"):
            if key in data:
                kwargs[key] = data[key]
        shuffle = data.get("shuffle", {})
        if not isinstance(shuffle, dict):
            raise ConfigError("scheme config 'shuffle' must be an object")
        unknown = set(shuffle) - {"num_windows", "max_extent", "mode", "receptive_field"}
        if unknown:
            raise ConfigError(f"unknown shuffle keys: {sorted(unknown)}")
        if "num_windows" in shuffle:
            kwargs["shuffle_windows"] = shuffle["num_windows"]
        if "max_extent" in shuffle and shuffle["max_extent"] is not None:
            kwargs["shuffle_max_extent"] = tuple(shuffle["max_extent"])
        if "mode" in shuffle:
            kwargs["shuffle_mode"] = shuffle["mode"]
        if "receptive_field" in shuffle:
            kwargs["receptive_field"] = shuffle["receptive_field"]
        paint = data.get("paint", {})
        if not isinstance(paint, dict):
            raise ConfigError("scheme config 'paint' must be an object")
        unknown = set(paint) - {"max_windows", "cap"}
        if unknown:
            raise ConfigError(f"unknown paint keys: {sorted(unknown)}")
        if "max_windows" in paint:
            kwargs["paint_max_windows"] = paint["max_windows"]
        if "cap" in paint:
            kwargs["paint_cap"] = paint["cap"]
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad scheme config: {exc}") from exc


# Presets named after the ablation groupings: distortions only, paintings
# only, everything combined.
PRESETS = {
    "unified": SchemeConfig(),
    "distortion": SchemeConfig(p_nonlinear=1.0, p_shuffle=1.0, p_paint=0.0),
    "painting": SchemeConfig(p_nonlinear=0.0, p_shuffle=0.0, p_paint=1.0),
    "identity": SchemeConfig(p_nonlinear=0.0, p_shuffle=0.0, p_paint=0.0),
}


@dataclass(frozen=True)
class SchemeSelection:
    """Which transforms are active for one patch; paintings are exclusive."""

    use_nonlinear: bool = False
    use_shuffle: bool = False
    paint: str = PAINT_NONE

    def __post_init__(self):
        if self.paint not in (PAINT_NONE, PAINT_OUT, PAINT_IN):
            raise ArgumentError(f"bad paint selection {self.paint!r}")

    @property
    def active_count(self) -> int:
        return int(self.use_nonlinear) + int(self.use_shuffle) + int(self.paint != PAINT_NONE)

    def label(self) -> str:
        parts = []
        if self.use_nonlinear:
            parts.append("NL")
        if self.use_shuffle:
            parts.append("LS")
        if self.paint == PAINT_OUT:
            parts.append("OP")
        elif self.paint == PAINT_IN:
            parts.append("IP")
        return "+".join(parts) if parts else "identity"


def draw_scheme(config: SchemeConfig, rng: Rng) -> SchemeSelection:
    """Three independent activation draws; paint direction drawn only when
    painting activates. Identity (nothing active) is a possible outcome."""
    use_nonlinear = rng.chance(config.p_nonlinear)
    use_shuffle = rng.chance(config.p_shuffle)
    paint = PAINT_NONE
    if rng.chance(config.p_paint):
        paint = PAINT_IN if rng.chance(config.p_inpaint_given_paint) else PAINT_OUT
    return SchemeSelection(use_nonlinear, use_shuffle, paint)


def enumerate_schemes() -> list[str]:
    """The twelve possible selections (identity, four singles, seven combos)."""
    return ["identity", "NL", "LS", "OP", "IP", "NL+LS", "NL+OP", "NL+IP",
            "LS+OP", "LS+IP", "NL+LS+OP", "NL+LS+IP"]


@dataclass
class TransformRecord:
    """Everything needed to rebuild one (X, X-tilde) pair bit-exactly."""

    sample_index: int
    source_id: str
    origin: tuple[int, int, int]
    shape: tuple[int, int, int]
    selection: SchemeSelection
    nonlinear: dict | None
    shuffle: dict | None
    paint: dict | None
    checksum_x: str
    checksum_xt: str

    def to_json_dict(self) -> dict:
        return {
            "index": self.sample_index,
            "source_id": self.source_id,
            "origin": list(self.origin),
            "shape": list(self.shape),
            "selection": {
                "nonlinear": self.selection.use_nonlinear,
                "shuffle": self.selection.use_shuffle,
                "paint": self.selection.paint,
            },
            "nonlinear": self.nonlinear,
            "shuffle": self.shuffle,
            "paint": self.paint,
            "checksum_x": self.checksum_x,
            "checksum_xt": self.checksum_xt,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @classmethod
    def from_json_dict(cls, data: dict) -> "TransformRecord":
        try:
            sel = data["selection"]
            return cls(
                sample_index=data["index"],
                source_id=data["source_id"],
                origin=tuple(data["origin"]),
                shape=tuple(data["shape"]),
                selection=SchemeSelection(sel["nonlinear"], sel["shuffle"], sel["paint"]),
                nonlinear=data["nonlinear"],
                shuffle=data["shuffle"],
                paint=data["paint"],
                checksum_x=data["checksum_x"],
                checksum_xt=data["checksum_xt"],
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed transform record: {exc}") from exc

    @classmethod
    def from_json(cls, line: str) -> "TransformRecord":
        return cls.from_json_dict(json.loads(line))


def _require_normalized(voxels: np.ndarray) -> None:
    if voxels.size == 0 or voxels.min() < 0.0 or voxels.max() > 1.0:
        raise ArgumentError("patch must be normalized to [0,1] before transforming")


def transform(
    patch: Patch,
    selection: SchemeSelection,
    config: SchemeConfig,
    master_seed: int,
    sample_index: int,
) -> tuple[Patch, TransformRecord]:
    """Apply the selected transforms and capture a full replay record."""
    _require_normalized(patch.voxels)
    voxels = patch.voxels
    shape = voxels.shape

    paint_info = None
    if selection.paint == PAINT_OUT:
        rng = stream(master_seed, sample_index, TAG_PAINT)
        windows = tf.sample_exterior_windows(
            shape, rng, config.paint_max_windows, config.paint_cap
        )
        mask = tf.exterior_mask(shape, windows, config.paint_cap)
        voxels, fill = tf.out_paint(voxels, mask, rng)
        paint_info = {
            "target": tf.EXTERIOR,
            "windows": [{"offset": list(w.offset), "extent": list(w.extent)} for w in windows],
            "fill": fill,
            "cap": config.paint_cap,
        }
    elif selection.paint == PAINT_IN:
        rng = stream(master_seed, sample_index, TAG_PAINT)
        voxels, windows, fills = tf.in_paint(
            voxels, rng, config.paint_max_windows, config.paint_cap
        )
        paint_info = {
            "target": tf.INTERIOR,
            "windows": [{"offset": list(w.offset), "extent": list(w.extent)} for w in windows],
            "fills": fills,
            "cap": config.paint_cap,
        }

    shuffle_info = None
    if selection.use_shuffle:
        limits = tf._resolve_max_extent(shape, config.shuffle_max_extent)
        rng = stream(master_seed, sample_index, TAG_SHUFFLE)
        voxels = tf.local_shuffle(
            voxels,
            rng,
            num_windows=config.shuffle_windows,
            max_extent=limits,
            mode=config.shuffle_mode,
            receptive_field=config.receptive_field,
        )
        shuffle_info = {
            "master_seed": master_seed,
            "sample_index": sample_index,
            "num_windows": config.shuffle_windows,
            "max_extent": list(limits),
            "mode": config.shuffle_mode,
        }

    nonlinear_info = None
    if selection.use_nonlinear:
        rng = stream(master_seed, sample_index, TAG_NONLINEAR)
        params = tf.sample_bezier_params(rng)
        lut = tf.bezier_lut(params, config.bezier_resolution)
        voxels = tf.apply_nonlinear(voxels, lut)
        nonlinear_info = {
            "direction": params.direction,
            "p1": list(params.p1),
            "p2": list(params.p2),
            "resolution": config.bezier_resolution,
        }

    record = TransformRecord(
        sample_index=sample_index,
        source_id=patch.source_id,
        origin=patch.origin,
        shape=tuple(shape),
        selection=selection,
        nonlinear=nonlinear_info,
        shuffle=shuffle_info,
        paint=paint_info,
        checksum_x=checksum_hex(voxel_checksum(patch.voxels)),
        checksum_xt=checksum_hex(voxel_checksum(voxels)),
    )
    transformed = Patch(origin=patch.origin, voxels=voxels, source_id=patch.source_id)
    return transformed, record


def apply_record(voxels: np.ndarray, record: TransformRecord) -> np.ndarray:
    """Re-run the recorded transforms on an original crop."""
    out = voxels
    paint = record.paint
    if paint is not None:
        windows = [
            tf.WindowSpec(tuple(w["offset"]), tuple(w["extent"])) for w in paint["windows"]
        ]
        if paint["target"] == tf.EXTERIOR:
            mask = tf.exterior_mask(out.shape, windows, paint["cap"])
            out = tf.apply_out_paint(out, mask, paint["fill"])
        else:
            out = tf.apply_in_paint(out, windows, paint["fills"])
    shuffle = record.shuffle
    if shuffle is not None:
        rng = stream(shuffle["master_seed"], shuffle["sample_index"], TAG_SHUFFLE)
        out = tf.local_shuffle(
            out,
            rng,
            num_windows=shuffle["num_windows"],
            max_extent=tuple(shuffle["max_extent"]),
            mode=shuffle["mode"],
        )
    nonlinear = record.nonlinear
    if nonlinear is not None:
        params = tf.BezierParams(
            nonlinear["direction"], tuple(nonlinear["p1"]), tuple(nonlinear["p2"])
        )
        out = tf.apply_nonlinear(out, tf.bezier_lut(params, nonlinear["resolution"]))
    return out


def replay(source_volume: Volume, record: TransformRecord) -> tuple[Patch, Patch]:
    """Rebuild (X, X-tilde) from a record and verify both checksums."""
    original = extract(source_volume, record.origin, record.shape, record.source_id)
    got_x = checksum_hex(voxel_checksum(original.voxels))
    if got_x != record.checksum_x:
        raise VerifyError(
            f"sample {record.sample_index}: original checksum {got_x} != "
            f"recorded {record.checksum_x}"
        )
    rebuilt = apply_record(original.voxels, record)
    got_xt = checksum_hex(voxel_checksum(rebuilt))
    if got_xt != record.checksum_xt:
        raise VerifyError(
            f"sample {record.sample_index}: transformed checksum {got_xt} != "
            f"recorded {record.checksum_xt}"
        )
    distorted = Patch(origin=record.origin, voxels=rebuilt, source_id=record.source_id)
    return original, distorted

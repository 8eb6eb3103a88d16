"""Run configuration: one JSON document drives every generating command.

Anything that affects output bytes lives here (probabilities, sizes,
seeds); command-line flags only point at paths and tune verbosity. Unknown
keys are rejected so a manifest snapshot can't silently drop settings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .patches import SizeRange
from .scheme import PRESETS, SchemeConfig

_TOP_KEYS = {
    "master_seed",
    "n_samples",
    "threads",
    "volumes",
    "phantoms",
    "patch",
    "scheme",
    "trainer",
    "probe",
}
_TRAINER_KEYS = {"steps", "lr", "batch", "momentum", "holdout_fraction", "seed"}
_PROBE_KEYS = {"samples_per_class", "steps", "lr", "seed", "holdout", "intensity_remap"}
_PHANTOM_KEYS = {"count", "dims", "kinds"}


def _require_int(data: dict, key: str, minimum: int) -> int:
    value = data[key]
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"config {key!r} must be an integer >= {minimum}, got {value!r}")
    return value


@dataclass
class TrainerConfig:
    steps: int = 2000
    lr: float = 0.05
    batch: int = 16
    momentum: float = 0.9
    holdout_fraction: float = 0.2
    seed: int = 0


@dataclass
class ProbeConfig:
    samples_per_class: int = 200
    steps: int = 300
    lr: float = 0.5
    seed: int = 0
    holdout: float = 0.25
    intensity_remap: bool = True


@dataclass
class RunConfig:
    master_seed: int = 0
    n_samples: int = 1
    threads: int | None = None
    volumes: list[str] = field(default_factory=list)
    phantoms: dict | None = None
    size_range: SizeRange | None = None
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)

    @classmethod
    def from_json_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("run config must be a JSON object")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls()
        if "master_seed" in data:
            cfg.master_seed = _require_int(data, "master_seed", 0)
        if "n_samples" in data:
            cfg.n_samples = _require_int(data, "n_samples", 1)
        if "threads" in data:
            cfg.threads = _require_int(data, "threads", 1)
        if "volumes" in data:
            vols = data["volumes"]
            if not isinstance(vols, list) or not all(isinstance(v, str) for v in vols):
                raise ConfigError("config 'volumes' must be a list of paths")
            cfg.volumes = vols
        if "phantoms" in data:
            ph = data["phantoms"]
            if not isinstance(ph, dict) or set(ph) - _PHANTOM_KEYS:
                raise ConfigError(f"config 'phantoms' allows keys {sorted(_PHANTOM_KEYS)}")
            cfg.phantoms = ph
        if "patch" in data:
            patch = data["patch"]
            if (
                not isinstance(patch, dict)
                or set(patch) - {"min_shape", "max_shape"}
                or "min_shape" not in patch
                or "max_shape" not in patch
            ):
                raise ConfigError("config 'patch' needs exactly min_shape and max_shape")
            try:
                cfg.size_range = SizeRange.of(patch["min_shape"], patch["max_shape"])
            except Exception as exc:
                raise ConfigError(f"bad patch size range: {exc}") from exc
        if "scheme" in data:
            scheme = data["scheme"]
            if isinstance(scheme, str):
                if scheme not in PRESETS:
                    raise ConfigError(
                        f"unknown scheme preset {scheme!r}; options: {sorted(PRESETS)}"
                    )
                cfg.scheme = PRESETS[scheme]
            else:
                cfg.scheme = SchemeConfig.from_json_dict(scheme)
        if "trainer" in data:
            tr = data["trainer"]
            if not isinstance(tr, dict) or set(tr) - _TRAINER_KEYS:
                raise ConfigError(f"config 'trainer' allows keys {sorted(_TRAINER_KEYS)}")
            cfg.trainer = TrainerConfig(**{**TrainerConfig().__dict__, **tr})
        if "probe" in data:
            pr = data["probe"]
            if not isinstance(pr, dict) or set(pr) - _PROBE_KEYS:
                raise ConfigError(f"config 'probe' allows keys {sorted(_PROBE_KEYS)}")
            cfg.probe = ProbeConfig(**{**ProbeConfig().__dict__, **pr})
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_json_dict(data)

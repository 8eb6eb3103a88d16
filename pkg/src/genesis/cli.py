"""Command-line surface: every command is reproducible from its config
file alone; flags only choose paths, thread counts, and output format.

Exit codes: 0 ok, 2 config/argument error, 3 I/O error, 4 verification
failure. GENESIS_THREADS is the fallback for --threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bridge as bridge_mod
from . import metrics as metrics_mod
from .config import RunConfig
from .dataset import generate_pairs, load_manifest, read_pair, verify_manifest
from .errors import ArgumentError, ConfigError, GenesisError, IoError, exit_code_for
from .inproc import default_size_range
from .patches import center_crop
from .probes import PROBE_PATCH_DIMS, build_probe_set
from .restorer import (
    Architecture,
    extract_encoder,
    forward,
    init_model,
    l1_loss,
    linear_probe,
    load_model,
    save_history,
    save_model,
    train,
)
from .rng import TAG_MODEL, TAG_PHANTOM, TAG_PROBE, TAG_TRAIN, stream
from .volume import (
    PHANTOM_KINDS,
    Volume,
    make_phantom,
    normalize_ct,
    normalize_minmax,
    read_gvol,
    write_gvol,
)

MODEL_FILE = "model.gmdl"
HISTORY_FILE = "history.csv"


def _emit(args, payload: dict, human: str | None = None) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, separators=(",", ":")))
    elif human is not None:
        print(human)
    else:
        for key, value in payload.items():
            print(f"{key}: {value}")


def _parse_dims(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"dims must be 'd,h,w', got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"dims must be integers: {text!r}") from exc


def _resolve_threads(args, cfg: RunConfig | None = None) -> int:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("GENESIS_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"GENESIS_THREADS must be an integer, got {env!r}") from exc
        if value < 1:
            raise ConfigError("GENESIS_THREADS must be >= 1")
        return value
    if cfg is not None and cfg.threads:
        return cfg.threads
    return 1


# -- sources -------------------------------------------------------------------


def _phantom_sources(cfg: RunConfig) -> list[tuple[str, Volume]]:
    spec = cfg.phantoms or {}
    count = spec.get("count", 0)
    dims = tuple(spec.get("dims", (32, 32, 32)))
    kinds = spec.get("kinds", list(PHANTOM_KINDS))
    for kind in kinds:
        if kind not in PHANTOM_KINDS:
            raise ConfigError(f"unknown phantom kind {kind!r}")
    sources = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        vol = make_phantom(kind, dims, stream(cfg.master_seed, i, TAG_PHANTOM))
        sources.append((f"phantom_{i}_{kind}", vol))
    return sources


def _load_sources(cfg: RunConfig) -> list[tuple[str, Volume]]:
    sources = []
    for path in cfg.volumes:
        vol = read_gvol(path)
        if not vol.is_normalized():
            raise ArgumentError(
                f"volume {path} is not normalized; run `genesis convert --normalize`"
            )
        sources.append((Path(path).stem, vol))
    sources.extend(_phantom_sources(cfg))
    if not sources:
        raise ConfigError("config names no volumes and no phantoms")
    return sources


# -- commands -------------------------------------------------------------------


def cmd_convert(args) -> int:
    try:
        header = json.loads(Path(args.header).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read header {args.header}: {exc}", code="missing") from exc
    except ValueError as exc:
        raise ConfigError(f"header {args.header} is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise ConfigError("header must be a JSON object")
    unknown = set(header) - {"dims", "spacing", "modality"}
    if unknown:
        raise ConfigError(f"unknown header keys: {sorted(unknown)}")
    if "dims" not in header:
        raise ConfigError("header is missing 'dims'")
    dims = header["dims"]
    if not (isinstance(dims, list) and len(dims) == 3):
        raise ConfigError(f"header dims must be [d,h,w], got {dims!r}")
    try:
        raw = Path(args.raw).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {args.raw}: {exc}", code="missing") from exc
    count = int(np.prod(dims))
    if len(raw) != count * 4:
        raise IoError(
            f"{args.raw}: payload is {len(raw)} bytes, dims {dims} need {count * 4}",
            code="size_mismatch",
        )
    voxels = np.frombuffer(raw, dtype="<f4").reshape(dims)
    if not np.isfinite(voxels).all():
        raise IoError(f"{args.raw}: non-finite values", code="non_finite")
    vol = Volume(
        voxels.copy(),
        spacing=tuple(header["spacing"]) if header.get("spacing") else None,
        modality=header.get("modality", "OTHER"),
    )
    if args.normalize == "ct":
        vol = normalize_ct(vol)
    elif args.normalize == "minmax":
        vol = normalize_minmax(vol)
    write_gvol(vol, args.out)
    _emit(args, {"out": args.out, "dims": list(vol.dims), "modality": vol.modality},
          f"wrote {args.out} dims={vol.dims} modality={vol.modality}")
    return 0


def cmd_phantom(args) -> int:
    dims = _parse_dims(args.dims)
    vol = make_phantom(args.kind, dims, stream(args.seed, args.index, TAG_PHANTOM))
    write_gvol(vol, args.out)
    _emit(args, {"out": args.out, "kind": args.kind, "dims": list(dims), "seed": args.seed},
          f"wrote {args.out} ({args.kind}, dims={dims}, seed={args.seed})")
    return 0


def cmd_generate(args) -> int:
    cfg = RunConfig.load(args.config)
    sources = _load_sources(cfg)
    size_range = cfg.size_range or default_size_range(sources[0][1].dims)
    threads = _resolve_threads(args, cfg)
    manifest = generate_pairs(
        sources, cfg.scheme, size_range, cfg.n_samples, cfg.master_seed,
        args.out, threads=threads,
    )
    counts: dict[str, int] = {}
    for record in manifest.records:
        label = record.selection.label()
        counts[label] = counts.get(label, 0) + 1
    _emit(
        args,
        {"out_dir": args.out, "n": manifest.n, "master_seed": manifest.master_seed,
         "threads": threads, "scheme_counts": counts},
        f"wrote {manifest.n} pairs to {args.out} (seed={manifest.master_seed}, "
        f"threads={threads})",
    )
    return 0


def cmd_replay_verify(args) -> int:
    report = verify_manifest(args.dir)
    payload = report.to_json_dict()
    if args.json:
        print(json.dumps(payload, separators=(",", ":")))
    else:
        print(f"verified {report.pass_count}/{report.total} samples")
        for failure in report.failures:
            print(f"  FAIL {failure}")
    return 0 if report.passed else 4


def _load_restoration_split(dataset_dir, holdout_fraction: float):
    manifest = load_manifest(dataset_dir)
    inputs, targets = [], []
    for i in range(manifest.n):
        pair = read_pair(dataset_dir, i)
        inputs.append(center_crop(pair.distorted.voxels, PROBE_PATCH_DIMS).ravel())
        targets.append(center_crop(pair.original.voxels, PROBE_PATCH_DIMS).ravel())
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n_holdout = max(1, int(round(manifest.n * holdout_fraction)))
    if n_holdout >= manifest.n:
        raise ConfigError("holdout fraction leaves no training samples")
    split = manifest.n - n_holdout
    return (inputs[:split], targets[:split]), (inputs[split:], targets[split:])


def cmd_train_demo(args) -> int:
    cfg = RunConfig.load(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.dataset:
        dataset_dir = Path(args.dataset)
    else:
        dataset_dir = out / "dataset"
        sources = _load_sources(cfg)
        size_range = cfg.size_range or default_size_range(sources[0][1].dims)
        generate_pairs(sources, cfg.scheme, size_range, cfg.n_samples,
                       cfg.master_seed, dataset_dir, threads=_resolve_threads(args, cfg))
    (train_x, train_y), (hold_x, hold_y) = _load_restoration_split(
        dataset_dir, cfg.trainer.holdout_fraction
    )
    arch = Architecture()
    started = time.perf_counter()
    model = init_model(arch, stream(cfg.trainer.seed, 0, TAG_MODEL))
    untrained_l1 = l1_loss(forward(model, hold_x), hold_y)
    trained, history = train(
        model, train_x, train_y,
        steps=cfg.trainer.steps, lr=cfg.trainer.lr, batch=cfg.trainer.batch,
        rng=stream(cfg.trainer.seed, 0, TAG_TRAIN), momentum=cfg.trainer.momentum,
    )
    trained_l1 = l1_loss(forward(trained, hold_x), hold_y)
    seconds = time.perf_counter() - started
    save_model(trained, out / MODEL_FILE)
    save_history(history, out / HISTORY_FILE)
    payload = {
        "checkpoint": str(out / MODEL_FILE),
        "history": str(out / HISTORY_FILE),
        "steps": cfg.trainer.steps,
        "train_samples": len(train_x),
        "holdout_samples": len(hold_x),
        "untrained_l1": untrained_l1,
        "trained_l1": trained_l1,
        "ratio": trained_l1 / untrained_l1 if untrained_l1 else None,
        "seconds": round(seconds, 3),
    }
    _emit(args, payload,
          f"holdout L1 {untrained_l1:.4f} -> {trained_l1:.4f} "
          f"({payload['ratio']:.3f}x) in {seconds:.1f}s; saved {out / MODEL_FILE}")
    return 0


def cmd_probe(args) -> int:
    cfg = RunConfig.load(args.config)
    probe_cfg = cfg.probe
    patches, labels = build_probe_set(
        probe_cfg.seed, probe_cfg.samples_per_class,
        intensity_remap=probe_cfg.intensity_remap,
    )
    results: dict[str, dict | None] = {"pretrained": None, "fresh": None}
    # sample_index 2^32 keeps the split stream clear of the per-phantom
    # streams (indices 0..2n-1) on the same tag
    split_key = (probe_cfg.seed, 1 << 32, TAG_PROBE)
    if args.checkpoint:
        model = load_model(args.checkpoint)
        result = linear_probe(
            extract_encoder(model), patches, labels,
            steps=probe_cfg.steps, lr=probe_cfg.lr,
            rng=stream(*split_key),
            holdout=probe_cfg.holdout,
        )
        results["pretrained"] = {"accuracy": result.accuracy, "auc": result.auc,
                                 "holdout": result.n_holdout}
    fresh = init_model(Architecture(), stream(probe_cfg.seed, 1, TAG_MODEL))
    result = linear_probe(
        extract_encoder(fresh), patches, labels,
        steps=probe_cfg.steps, lr=probe_cfg.lr,
        rng=stream(*split_key),
        holdout=probe_cfg.holdout,
    )
    results["fresh"] = {"accuracy": result.accuracy, "auc": result.auc,
                        "holdout": result.n_holdout}
    lines = []
    for name, res in results.items():
        if res:
            lines.append(f"{name}: accuracy={res['accuracy']:.3f} auc={res['auc']:.3f}")
    _emit(args, results, "\n".join(lines))
    return 0


def cmd_eval(args) -> int:
    pred = read_gvol(args.pred)
    truth = read_gvol(args.truth)
    if args.metric in ("l1", "mse", "psnr"):
        value = getattr(metrics_mod, args.metric)(pred.voxels, truth.voxels)
        support = int(pred.voxels.size)
    elif args.metric in ("iou", "dice"):
        value = getattr(metrics_mod, args.metric)(pred.voxels > 0.5, truth.voxels > 0.5)
        support = int(pred.voxels.size)
    else:  # auc: prediction voxels are scores, truth voxels the labels
        value = metrics_mod.auc(
            pred.voxels.ravel().astype(np.float64),
            (truth.voxels.ravel() > 0.5).astype(int),
        )
        support = int(pred.voxels.size)
    report = metrics_mod.MetricReport(args.metric, value, support)
    if args.json:
        print(json.dumps(report.to_json_dict(), separators=(",", ":")))
    elif args.csv:
        print("metric,value,support")
        print(f"{args.metric},{value!r},{support}")
    else:
        print(f"{args.metric} = {value!r} (n={support})")
    return 0


def cmd_inspect(args) -> int:
    manifest = load_manifest(args.dir)
    if not 0 <= args.index < manifest.n:
        raise ArgumentError(f"sample index {args.index} out of range [0, {manifest.n})")
    record = manifest.records[args.index]
    counts: dict[str, int] = {}
    for rec in manifest.records:
        label = rec.selection.label()
        counts[label] = counts.get(label, 0) + 1
    payload = {"record": record.to_json_dict(), "scheme_counts": counts,
               "n": manifest.n, "master_seed": manifest.master_seed}
    if args.json:
        print(json.dumps(payload, separators=(",", ":")))
    else:
        print(json.dumps(record.to_json_dict(), indent=2))
        print("scheme counts:")
        for label, count in sorted(counts.items()):
            print(f"  {label:9s} {count}")
    return 0


def cmd_bridge(_args) -> int:
    return bridge_mod.serve() or 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genesis",
        description="Deterministic transformation-pair engine for "
                    "self-supervised image restoration.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="wrap raw f32 + JSON sidecar into a GVOL file")
    p.add_argument("raw")
    p.add_argument("header")
    p.add_argument("out")
    p.add_argument("--normalize", choices=("none", "ct", "minmax"), default="none")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("phantom", help="write a synthetic test volume")
    p.add_argument("--kind", choices=PHANTOM_KINDS, required=True)
    p.add_argument("--dims", default="32,32,32", help="d,h,w")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("generate", help="write a replayable pair dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("replay-verify", help="replay every record and check checksums")
    p.add_argument("dir")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_replay_verify)

    p = sub.add_parser("train-demo", help="train the tiny restorer on a pair dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dataset", help="reuse an existing dataset directory")
    p.add_argument("--threads", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_train_demo)

    p = sub.add_parser("probe", help="linear-probe an encoder on phantom classification")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("eval", help="compare two GVOL files with a metric")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--metric", choices=("l1", "mse", "psnr", "iou", "dice", "auc"),
                   required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="dump one sample's record and dataset stats")
    p.add_argument("dir")
    p.add_argument("index", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bridge", help="serve the framed stdio protocol (for bindings)")
    p.set_defaults(func=cmd_bridge)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GenesisError as err:
        print(json.dumps({"error": {"category": err.category, "message": str(err)}}),
              file=sys.stderr)
        return exit_code_for(err)


if __name__ == "__main__":
    sys.exit(main())

"""Desk-scale restorer: a fully-connected encoder-decoder trained with
mean-L1 loss to reconstruct original patches from distorted ones.

The model is deliberately tiny (flattened 16^3 input, 64-dim code) with
f64 parameters and hand-written exact gradients, so finite differences can
verify the backward pass and the pretrain-then-probe transfer experiment
runs in seconds on one core.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArgumentError, IoError
from .rng import Rng

MODEL_MAGIC = b"GMDL"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Architecture:
    """Layer widths: input -> hidden -> code -> hidden -> input."""

    input_len: int = 4096  # 16^3 flattened
    hidden: int = 256
    code: int = 64

    def layer_dims(self) -> list[tuple[str, int, int]]:
        return [
            ("w1", self.input_len, self.hidden),
            ("w2", self.hidden, self.code),
            ("w3", self.code, self.hidden),
            ("w4", self.hidden, self.input_len),
        ]

    def validate(self) -> None:
        if min(self.input_len, self.hidden, self.code) < 1:
            raise ArgumentError(f"invalid architecture {self}")


@dataclass
class TinyRestorer:
    arch: Architecture
    params: dict[str, np.ndarray]

    def copy(self) -> "TinyRestorer":
        return TinyRestorer(self.arch, {k: v.copy() for k, v in self.params.items()})


@dataclass
class TrainHistory:
    losses: list[float]
    steps: int
    lr: float
    batch: int
    momentum: float


def init_model(arch: Architecture, rng: Rng) -> TinyRestorer:
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.

    Draw order (pinned): w1, w2, w3, w4, row-major within each tensor.
    """
    arch.validate()
    params: dict[str, np.ndarray] = {}
    for name, fan_in, fan_out in arch.layer_dims():
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params[name] = rng.uniform_array(fan_in * fan_out, -bound, bound).reshape(
            fan_in, fan_out
        )
        params["b" + name[1:]] = np.zeros(fan_out)
    return TinyRestorer(arch, params)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_batch(x: np.ndarray, input_len: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != input_len:
        raise ArgumentError(f"input shape {x.shape} does not match input_len {input_len}")
    return x, single


def _forward_trace(model: TinyRestorer, x: np.ndarray) -> dict[str, np.ndarray]:
    p = model.params
    z1 = x @ p["w1"] + p["b1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ p["w2"] + p["b2"]
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ p["w3"] + p["b3"]
    a3 = np.maximum(z3, 0.0)
    z4 = a3 @ p["w4"] + p["b4"]
    y = _sigmoid(z4)
    return {"x": x, "z1": z1, "a1": a1, "z2": z2, "a2": a2, "z3": z3, "a3": a3,
            "z4": z4, "y": y}


def forward(model: TinyRestorer, x_tilde: np.ndarray) -> np.ndarray:
    """Restored output in (0,1); accepts one flat patch or a batch."""
    batch, single = _as_batch(x_tilde, model.arch.input_len)
    y = _forward_trace(model, batch)["y"]
    return y[0] if single else y


def encode(model: TinyRestorer, x: np.ndarray) -> np.ndarray:
    """Encoder half only: flat patch(es) -> code vector(s)."""
    batch, single = _as_batch(x, model.arch.input_len)
    p = model.params
    a1 = np.maximum(batch @ p["w1"] + p["b1"], 0.0)
    a2 = np.maximum(a1 @ p["w2"] + p["b2"], 0.0)
    return a2[0] if single else a2


def extract_encoder(model: TinyRestorer):
    """Frozen encoder closure over a snapshot of the current weights."""
    frozen = model.copy()
    return lambda x: encode(frozen, x)


def l1_loss(pred: np.ndarray, target: np.ndarray) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ArgumentError(f"shape mismatch {pred.shape} vs {target.shape}")
    return float(np.mean(np.abs(pred - target)))


def backward(model: TinyRestorer, x_tilde: np.ndarray, x: np.ndarray
             ) -> tuple[float, dict[str, np.ndarray]]:
    """Mean-L1 loss and its exact gradients for every parameter.

    Subgradient convention at kinks: d|e|/de = 0 at e == 0, and the ReLU
    derivative is 0 at z == 0.
    """
    inputs, _ = _as_batch(x_tilde, model.arch.input_len)
    targets, _ = _as_batch(x, model.arch.input_len)
    if inputs.shape != targets.shape:
        raise ArgumentError(f"batch shapes differ: {inputs.shape} vs {targets.shape}")
    p = model.params
    t = _forward_trace(model, inputs)
    err = t["y"] - targets
    loss = float(np.mean(np.abs(err)))

    dy = np.sign(err) / err.size
    dz4 = dy * t["y"] * (1.0 - t["y"])
    grads = {
        "w4": t["a3"].T @ dz4,
        "b4": dz4.sum(axis=0),
    }
    da3 = dz4 @ p["w4"].T
    dz3 = da3 * (t["z3"] > 0.0)
    grads["w3"] = t["a2"].T @ dz3
    grads["b3"] = dz3.sum(axis=0)
    da2 = dz3 @ p["w3"].T
    dz2 = da2 * (t["z2"] > 0.0)
    grads["w2"] = t["a1"].T @ dz2
    grads["b2"] = dz2.sum(axis=0)
    da1 = dz2 @ p["w2"].T
    dz1 = da1 * (t["z1"] > 0.0)
    grads["w1"] = t["x"].T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


def train(
    model: TinyRestorer,
    inputs: np.ndarray,
    targets: np.ndarray,
    steps: int,
    lr: float,
    batch: int,
    rng: Rng,
    momentum: float = 0.0,
) -> tuple[TinyRestorer, TrainHistory]:
    """SGD (optional momentum) on mini-batches sampled with replacement."""
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape != targets.shape:
        raise ArgumentError("inputs/targets must be matching (n, input_len) arrays")
    if len(inputs) < 1:
        raise ArgumentError("training set is empty")
    model = model.copy()
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    losses: list[float] = []
    n = len(inputs)
    for _ in range(steps):
        idx = [rng.uniform_int(0, n - 1) for _ in range(batch)]
        loss, grads = backward(model, inputs[idx], targets[idx])
        losses.append(loss)
        for key, grad in grads.items():
            velocity[key] = momentum * velocity[key] - lr * grad
            model.params[key] += velocity[key]
    return model, TrainHistory(losses, steps, lr, batch, momentum)


# -- linear probe -------------------------------------------------------------


@dataclass
class ProbeResult:
    accuracy: float
    auc: float
    n_train: int
    n_holdout: int


def linear_probe(
    encoder,
    patches: np.ndarray,
    labels: np.ndarray,
    steps: int = 300,
    lr: float = 0.5,
    rng: Rng | None = None,
    holdout: float = 0.25,
) -> ProbeResult:
    """Train an affine+logistic classifier on frozen features; report
    held-out accuracy and rank-based AUC."""
    from .metrics import auc as rank_auc

    labels = np.asarray(labels, dtype=np.float64)
    if set(np.unique(labels)) != {0.0, 1.0}:
        raise ArgumentError("linear_probe needs both classes present, labels in {0,1}")
    feats = np.asarray(encoder(np.asarray(patches, dtype=np.float64)))
    n = len(feats)
    order = rng.shuffle_indices(n) if rng is not None else list(range(n))
    split = max(1, int(round(n * (1.0 - holdout))))
    train_idx, test_idx = order[:split], order[split:]
    if not test_idx:
        raise ArgumentError("holdout split left no evaluation samples")
    f_train, y_train = feats[train_idx], labels[train_idx]
    f_test, y_test = feats[test_idx], labels[test_idx]
    if len(set(y_test)) < 2 or len(set(y_train)) < 2:
        raise ArgumentError("train/holdout split lost a class; provide more samples")

    mu = f_train.mean(axis=0)
    sd = f_train.std(axis=0)
    sd[sd == 0.0] = 1.0
    f_train = (f_train - mu) / sd
    f_test = (f_test - mu) / sd

    w = np.zeros(feats.shape[1])
    b = 0.0
    for _ in range(steps):
        scores = _sigmoid(f_train @ w + b)
        grad = scores - y_train
        w -= lr * (f_train.T @ grad) / len(f_train)
        b -= lr * grad.mean()
    test_scores = _sigmoid(f_test @ w + b)
    accuracy = float(((test_scores > 0.5) == (y_test > 0.5)).mean())
    return ProbeResult(
        accuracy=accuracy,
        auc=rank_auc(test_scores, y_test.astype(int)),
        n_train=len(train_idx),
        n_holdout=len(test_idx),
    )


# -- checkpoint container ------------------------------------------------------

_TENSOR_ORDER = ("w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4")


def save_model(model: TinyRestorer, path) -> None:
    header = {
        "arch": {
            "input_len": model.arch.input_len,
            "hidden": model.arch.hidden,
            "code": model.arch.code,
        },
        "tensors": [
            {"name": name, "shape": list(model.params[name].shape)}
            for name in _TENSOR_ORDER
        ],
        "dtype": "f64le",
    }
    body = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(MODEL_VERSION.to_bytes(4, "little"))
        fh.write(len(body).to_bytes(8, "little"))
        fh.write(body)
        for name in _TENSOR_ORDER:
            fh.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())


def load_model(path) -> TinyRestorer:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"{path}: {exc.strerror or exc}", code="missing") from exc
    if len(raw) < 16 or raw[:4] != MODEL_MAGIC:
        raise IoError(f"{path}: not a model checkpoint", code="bad_magic")
    if int.from_bytes(raw[4:8], "little") != MODEL_VERSION:
        raise IoError(f"{path}: unsupported checkpoint version", code="version_mismatch")
    header_len = int.from_bytes(raw[8:16], "little")
    header = json.loads(raw[16 : 16 + header_len])
    arch = Architecture(**header["arch"])
    params: dict[str, np.ndarray] = {}
    offset = 16 + header_len
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape))
        blob = raw[offset : offset + count * 8]
        if len(blob) != count * 8:
            raise IoError(f"{path}: truncated tensor {spec['name']}", code="truncated")
        params[spec["name"]] = np.frombuffer(blob, dtype="<f8").reshape(shape).copy()
        offset += count * 8
    return TinyRestorer(arch, params)


def save_history(history: TrainHistory, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,loss\n")
        for step, loss in enumerate(history.losses):
            fh.write(f"{step},{loss!r}\n")

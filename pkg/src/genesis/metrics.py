"""Evaluation measures: restoration error (L1/MSE/PSNR), overlap scores
(IoU/Dice), and rank-based AUC with midrank tie handling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError


@dataclass
class MetricReport:
    name: str
    value: float
    support: int

    def to_json_dict(self) -> dict:
        infinite = math.isinf(self.value)
        return {
            "name": self.name,
            "value": None if infinite else self.value,
            "infinite": infinite,
            "support": self.support,
        }


def _check_shapes(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ArgumentError(f"shape mismatch: {a.shape} vs {b.shape}")


def l1(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    return float(np.mean(np.abs(a - b)))


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf sentinel for identical inputs."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return float(10.0 * math.log10(peak * peak / err))


def iou(pred_mask: np.ndarray, true_mask: np.ndarray) -> float:
    """Intersection over union; both-empty convention: 1.0."""
    pred = np.asarray(pred_mask, dtype=bool)
    true = np.asarray(true_mask, dtype=bool)
    _check_shapes(pred, true)
    union = np.logical_or(pred, true).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(pred, true).sum() / union)


def dice(pred_mask: np.ndarray, true_mask: np.ndarray) -> float:
    """Dice coefficient; both-empty convention: 1.0."""
    pred = np.asarray(pred_mask, dtype=bool)
    true = np.asarray(true_mask, dtype=bool)
    _check_shapes(pred, true)
    total = int(pred.sum()) + int(true.sum())
    if total == 0:
        return 1.0
    return float(2.0 * np.logical_and(pred, true).sum() / total)


def auc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUC; ties contribute 1/2 via midranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ArgumentError("auc needs matching 1-d scores and labels")
    pos = labels == 1
    neg = labels == 0
    n_pos = int(pos.sum())
    n_neg = int(neg.sum())
    if n_pos + n_neg != len(labels):
        raise ArgumentError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise ArgumentError("auc needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum = ranks[pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))

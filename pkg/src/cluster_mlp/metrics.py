"""Regression and photo-z style evaluation metrics.

Residuals for the normalized statistics use the photo-z convention
delta_i = (pred_i - actual_i) / (1 + actual_i), which underlies the
normalized RMS, the bias, and the 0.15 outlier threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricBlock:
    rms: float
    norm_rms: float
    bias: float
    outlier_fraction: float
    correlation: float
    n: int


def _as_pair(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.ndim != 1 or a.ndim != 1:
        raise ValueError("pred and actual must be 1-d")
    if p.shape[0] != a.shape[0]:
        raise ValueError(f"length mismatch: {p.shape[0]} vs {a.shape[0]}")
    if p.shape[0] == 0:
        raise ValueError("empty input")
    return p, a


def _normalized_residuals(pred, actual) -> np.ndarray:
    p, a = _as_pair(pred, actual)
    denom = 1.0 + a
    if np.any(denom == 0.0):
        raise ValueError("actual contains -1; normalized residual undefined")
    return (p - a) / denom


def rms(pred, actual) -> float:
    """Root mean square of the raw residuals."""
    p, a = _as_pair(pred, actual)
    return float(np.sqrt(np.mean((p - a) ** 2)))


def norm_rms(pred, actual) -> float:
    """Root mean square of the normalized residuals delta."""
    delta = _normalized_residuals(pred, actual)
    return float(np.sqrt(np.mean(delta**2)))


def bias(pred, actual) -> float:
    """Mean normalized residual, computed without any outlier clipping."""
    delta = _normalized_residuals(pred, actual)
    return float(np.mean(delta))


def outlier_fraction(pred, actual, threshold: float = 0.15) -> float:
    """Fraction of points with |delta| strictly above the threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    delta = _normalized_residuals(pred, actual)
    return float(np.mean(np.abs(delta) > threshold))


def correlation(pred, actual) -> float:
    """Pearson product-moment correlation."""
    p, a = _as_pair(pred, actual)
    if p.shape[0] < 2:
        raise ValueError("correlation needs n >= 2")
    sp = p - p.mean()
    sa = a - a.mean()
    denom = np.sqrt(np.sum(sp**2) * np.sum(sa**2))
    if denom == 0.0:
        raise ValueError("undefined correlation: constant input vector")
    return float(np.sum(sp * sa) / denom)


def metric_block(pred, actual, threshold: float = 0.15) -> MetricBlock:
    """All metrics for one (pred, actual) pair."""
    p, a = _as_pair(pred, actual)
    return MetricBlock(
        rms=rms(p, a),
        norm_rms=norm_rms(p, a),
        bias=bias(p, a),
        outlier_fraction=outlier_fraction(p, a, threshold),
        correlation=correlation(p, a),
        n=int(p.shape[0]),
    )

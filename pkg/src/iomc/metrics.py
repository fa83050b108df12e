"""Reconstruction error over a set of matrix positions."""

from __future__ import annotations

import numpy as np

from .errors import MetricError
from .masks import as_mask


def _pair(truth, estimate, omega):
    t = np.asarray(truth, dtype=np.float64)
    e = np.asarray(estimate, dtype=np.float64)
    if t.shape != e.shape:
        raise MetricError(f"shape mismatch: {t.shape} vs {e.shape}")
    try:
        mask = as_mask(omega, t.shape)
    except ValueError as exc:
        raise MetricError(str(exc)) from exc
    if not mask.any():
        raise MetricError("position set is empty")
    return t[mask], e[mask]


def rmse(truth, estimate, omega) -> float:
    """Root mean square error of ``estimate`` against ``truth`` on ``omega``."""
    t, e = _pair(truth, estimate, omega)
    return float(np.sqrt(np.mean((t - e) ** 2)))


def smape(truth, estimate, omega) -> float:
    """Symmetric MAPE in [0, 100].

    Each position contributes ``|t - e| / (|t| + |e|)``; positions where both
    values are zero contribute 0.
    """
    t, e = _pair(truth, estimate, omega)
    num = np.abs(t - e)
    den = np.abs(t) + np.abs(e)
    ratio = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return float(100.0 * ratio.mean())

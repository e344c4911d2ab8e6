"""Polynomial extrapolation to a zero parameter and log-log rate fits."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

__all__ = ["extrapolate_to_zero", "neville_to_zero", "loglog_slope"]


def extrapolate_to_zero(t, y, degree: int = 1) -> tuple[np.ndarray, float]:
    """Least-squares polynomial fit of y against t, evaluated at t = 0.

    With ``degree == len(t) - 1`` this is Richardson extrapolation through all
    points. ``y`` may carry trailing axes (profiles); each column is fitted
    separately.

    Returns:
        (value at 0, RMS fit residual over all columns)
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.ndim != 1 or y.shape[0] != t.size:
        raise ValidationError("t must be 1D and match the leading axis of y")
    if degree < 0 or degree >= t.size:
        raise ValidationError(f"degree {degree} needs at least {degree + 1} points")
    # scale t to O(1) for a well-conditioned Vandermonde matrix
    tau = np.max(np.abs(t))
    A = np.vander(t / tau, degree + 1, increasing=True)
    flat = y.reshape(t.size, -1)
    coef, *_ = np.linalg.lstsq(A, flat, rcond=None)
    fit = A @ coef
    resid = float(np.sqrt(np.mean((fit - flat) ** 2))) if t.size > degree + 1 else 0.0
    return coef[0].reshape(y.shape[1:]), resid


def neville_to_zero(t, y) -> np.ndarray:
    """Value at 0 of the interpolating polynomial through (t_k, y_k)."""
    t = np.asarray(t, dtype=float)
    p = [np.asarray(v, dtype=float) for v in y]
    n = len(p)
    for m in range(1, n):
        for i in range(n - m):
            j = i + m
            p[i] = (t[j] * p[i] - t[i] * p[i + 1]) / (t[j] - t[i])
    return p[0]


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValidationError("log-log fit needs positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])

"""Wasserstein distances, variance traces, rate fits and the mean-field exponent."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "EXACT_WASSERSTEIN_CAP",
    "FitResult",
    "fit_exponential_decay",
    "fit_power_law",
    "gamma_exponent",
    "moment_trace",
    "variance_trace",
    "wasserstein_p",
]

EXACT_WASSERSTEIN_CAP = 512


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float

    def to_dict(self):
        return asdict(self)


def _atoms(a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 1:
        raise ValueError(f"empirical measure must be (N, d) with N >= 1, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("empirical measure has non-finite atoms")
    return a


def wasserstein_p(a, b, p: float = 2.0) -> float:
    """Exact W_p between two uniform empirical measures with the same atom count.

    One-dimensional measures are matched by sorting, higher dimensions by an
    optimal assignment on the N x N cost matrix.
    """
    a, b = _atoms(a), _atoms(b)
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if a.shape != b.shape:
        raise ValueError(f"measures must have equal shapes, got {a.shape} and {b.shape}")
    n = a.shape[0]
    if n > EXACT_WASSERSTEIN_CAP:
        raise ValueError(f"N={n} above the exact-assignment cap {EXACT_WASSERSTEIN_CAP}")
    if a.shape[1] == 1:
        cost = np.abs(np.sort(a[:, 0]) - np.sort(b[:, 0])) ** p
        return float(np.mean(cost) ** (1.0 / p))
    dist = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1) ** p
    rows, cols = linear_sum_assignment(dist)
    return float(np.mean(dist[rows, cols]) ** (1.0 / p))


def variance_trace(snapshots, x_star) -> np.ndarray:
    """Per-time ``(V_1, ..., V_M, V)`` with V_m the particle average of |X - x*_m|^2.

    ``snapshots`` is ``(R, M, N, d)`` or a trajectory carrying snapshots.
    """
    snaps = getattr(snapshots, "snapshots", snapshots)
    if snaps is None:
        raise ValueError("trajectory has no snapshots; simulate with keep_snapshots=True")
    snaps = np.asarray(snaps, dtype=float)
    x_star = np.asarray(x_star, dtype=float).reshape(snaps.shape[1], snaps.shape[3])
    diff = snaps - x_star[None, :, None, :]
    vm = np.einsum("rmnd,rmnd->rmn", diff, diff).mean(axis=2)
    return np.concatenate([vm, vm.sum(axis=1, keepdims=True)], axis=1)


def moment_trace(snapshots, p: float = 2.0) -> np.ndarray:
    """Per-time, per-player p-moments ``(1/N) sum_i |X^{m,i}|^p``, shape (R, M)."""
    snaps = np.asarray(getattr(snapshots, "snapshots", snapshots), dtype=float)
    return (np.linalg.norm(snaps, axis=-1) ** p).mean(axis=-1)


def _linear_fit(x, y) -> FitResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("a rate fit needs at least 3 points")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise ValueError("abscissae are all equal")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    ss_tot = np.sum((y - ym) ** 2)
    ss_res = np.sum((y - (intercept + slope * x)) ** 2)
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - ss_res / ss_tot)
    return FitResult(float(slope), float(intercept), float(min(r2, 1.0)))


def fit_exponential_decay(times, values) -> FitResult:
    """Least-squares line through ``(t, ln v)``; slope is the signed rate."""
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        raise ValueError("exponential fit needs strictly positive values")
    return _linear_fit(times, np.log(values))


def fit_power_law(ns, gaps) -> FitResult:
    """Least-squares line through ``(ln n, ln gap)``."""
    ns = np.asarray(ns, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if np.any(ns <= 0) or np.any(gaps <= 0):
        raise ValueError("power-law fit needs strictly positive data")
    return _linear_fit(np.log(ns), np.log(gaps))


def gamma_exponent(q: float, p: float, p_m: float) -> float:
    """Mean-field rate exponent min{1/2, (q-p)/(2p^2), (q-r)/(2r^2)} with r = max(2, p_m)."""
    if p_m <= 0:
        raise ValueError(f"p_M must be positive, got {p_m}")
    if q < max(4.0, 2.0 * p_m):
        raise ValueError(f"q={q} violates q >= max(4, 2*p_M) = {max(4.0, 2.0 * p_m)}")
    if not 0 < p <= q / 2:
        raise ValueError(f"p={p} violates 0 < p <= q/2")
    r = max(2.0, p_m)
    return min(0.5, (q - p) / (2.0 * p * p), (q - r) / (2.0 * r * r))

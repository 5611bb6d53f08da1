"""Fast invariant checks runnable from an installed package (``cbo-games selftest``)."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .consensus import consensus_all, softmin_weights
from .dynamics import CboParams, UniformInit, simulate
from .games import builtin_game, nash_residual
from .lab import coupled_gaps
from .metrics import gamma_exponent, wasserstein_p
from .noise import philox4x32

__all__ = ["run_selftest"]


def _philox_kat():
    out = philox4x32(0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344, 0xA4093822, 0x299F31D0)
    return [int(w) for w in out] == [0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1]


def _softmin(rng, cases=1000):
    for _ in range(cases):
        n = int(rng.integers(1, 50))
        w = softmin_weights(rng.uniform(-1e6, 1e6, n), rng.uniform(0, 1e6))
        if not (np.all(np.isfinite(w)) and abs(w.sum() - 1) <= 1e-12):
            return False
    return True


def _consensus(rng, cases=200):
    game = builtin_game("coupled-quadratic", 3, 2, 0.5)
    for _ in range(cases):
        ens = rng.normal(size=(3, int(rng.integers(1, 30)), 2)) * rng.uniform(0.1, 5)
        alpha = rng.uniform(0.1, 100)
        pts = consensus_all(game, ens, alpha).points
        radii = np.linalg.norm(ens, axis=-1).max(axis=1)
        if np.any(np.linalg.norm(pts, axis=-1) > radii):
            return False
        perm = ens[:, rng.permutation(ens.shape[1])]
        if not np.array_equal(consensus_all(game, perm, alpha).points, pts):
            return False
    return True


def _wasserstein(rng, cases=100):
    for _ in range(cases):
        n, d, p = int(rng.integers(1, 6)), int(rng.integers(1, 4)), float(rng.integers(1, 4))
        a, b = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        best = min(np.mean(np.linalg.norm(a - b[list(s)], axis=1) ** p)
                   for s in itertools.permutations(range(n))) ** (1 / p)
        if abs(wasserstein_p(a, b, p) - best) > 1e-9:
            return False
    return True


def _gamma():
    return (gamma_exponent(8, 2, 1) == 0.5 and gamma_exponent(6, 2, 1) == 0.5
            and math.isclose(gamma_exponent(5, 2.5, 1), 0.2))


def _dynamics():
    game = builtin_game("decoupled-quadratic", 2, 2)
    prm = CboParams(lam=1.0, sigma=0.5, alpha=40.0, dt=0.05, t_end=1.0)
    x1 = UniformInit().sample(2, np.arange(1), 2, 3)
    single = simulate(game, x1, prm, 3)
    if not np.array_equal(single.snapshots, np.broadcast_to(x1, single.snapshots.shape)):
        return False
    x0 = UniformInit().sample(2, np.arange(32), 2, 5)
    runs = [simulate(game, x0, prm, 5, workers=w).terminal for w in (1, 2, 8)]
    if not all(np.array_equal(runs[0], r) for r in runs[1:]):
        return False
    gaps = coupled_gaps(game, prm, [16], 16, 2.0, seed=5)
    return float(gaps[16].max()) == 0.0


def _nash():
    return all(nash_residual(builtin_game(name, 2, 2, 0.3), np.zeros(4), 2000, 3.0) <= 1e-12
               for name in ("decoupled-quadratic", "coupled-quadratic", "rastrigin-coupled"))


CHECKS = [
    ("philox known-answer vector", lambda rng: _philox_kat()),
    ("softmin weights normalized and finite", _softmin),
    ("consensus bounded and permutation invariant", _consensus),
    ("assignment W_p equals brute force", _wasserstein),
    ("gamma exponent examples", lambda rng: _gamma()),
    ("N=1 fixed point, worker determinism, self-coupling", lambda rng: _dynamics()),
    ("Nash certificates of builtin games", lambda rng: _nash()),
]


def run_selftest(seed: int = 0):
    """Run every check; returns a list of ``(name, passed)``."""
    rng = np.random.default_rng(seed)
    return [(name, bool(check(rng))) for name, check in CHECKS]

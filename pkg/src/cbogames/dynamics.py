"""Euler-Maruyama integration of the multi-species CBO particle system.

One step, with the consensus ``C`` frozen at the start of the step::

    X' = X - lam*h*(X - xi*C_m) + sigma*sqrt(h)*D(X - xi*C_m) eta

where ``eta`` comes from the counter-based stream at address (m, i, k, c).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .consensus import ConsensusSet, as_ensemble, consensus_all
from .games import GameSpec
from .noise import TAG_DYNAMICS, TAG_INIT, NoiseStream

__all__ = [
    "BlowUpError",
    "CboParams",
    "GaussianInit",
    "PointInit",
    "Trajectory",
    "UniformInit",
    "diffusion_apply",
    "n_steps",
    "resolve_workers",
    "simulate",
    "simulate_coupled",
    "step_em",
    "time_grid",
]

DIFFUSIONS = ("isotropic", "anisotropic")


@dataclass(frozen=True)
class CboParams:
    lam: float = 1.0
    sigma: float = 0.5
    alpha: float = 40.0
    xi: float = 1.0
    dt: float = 0.01
    t_end: float = 10.0
    diffusion: str = "anisotropic"

    def __post_init__(self):
        for name in ("lam", "sigma", "alpha", "xi", "dt", "t_end"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.dt > self.t_end:
            raise ValueError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if self.diffusion not in DIFFUSIONS:
            raise ValueError(f"diffusion must be one of {DIFFUSIONS}, got {self.diffusion!r}")

    @property
    def decay_rate(self) -> float:
        """Mean-field variance decay rate (2*lam - sigma**2) / 2."""
        return (2.0 * self.lam - self.sigma ** 2) / 2.0


class BlowUpError(FloatingPointError):
    """Non-finite particle state; carries the offending address and any partial trajectory."""

    def __init__(self, m: int, i: int, k: int, trajectory=None):
        self.m, self.i, self.k = m, i, k
        self.trajectory = trajectory
        super().__init__(f"blow-up at player {m}, particle {i}, step {k}")


@dataclass(frozen=True)
class UniformInit:
    low: float = -3.0
    high: float = 3.0

    def sample(self, M, ids, d, seed):
        ids = np.asarray(ids)
        noise = NoiseStream(seed)
        u = noise.uniform(0, np.repeat(np.arange(M), ids.size), np.tile(ids, M), d, tag=TAG_INIT)
        return (self.low + (self.high - self.low) * u).reshape(M, ids.size, d)


@dataclass(frozen=True)
class GaussianInit:
    mean: float = 0.0
    scale: float = 1.0

    def sample(self, M, ids, d, seed):
        ids = np.asarray(ids)
        noise = NoiseStream(seed)
        z = noise.normal(0, np.repeat(np.arange(M), ids.size), np.tile(ids, M), d, tag=TAG_INIT)
        return (self.mean + self.scale * z).reshape(M, ids.size, d)


@dataclass(frozen=True)
class PointInit:
    point: float = 0.0

    def sample(self, M, ids, d, seed):
        return np.full((M, np.asarray(ids).size, d), float(self.point))


@dataclass
class Trajectory:
    times: np.ndarray            # all K+1 step times
    record_steps: np.ndarray     # indices into times that were recorded
    consensus: np.ndarray        # (R, M, d) consensus at recorded times
    terminal: np.ndarray         # (M, N, d)
    snapshots: Optional[np.ndarray] = None  # (R, M, N, d)
    ids: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def record_times(self) -> np.ndarray:
        return self.times[self.record_steps]


def resolve_workers(workers: Optional[int] = None) -> int:
    """Worker count: explicit value, else ``CBO_GAMES_THREADS`` (0 = all cores)."""
    if workers is None:
        workers = int(os.environ.get("CBO_GAMES_THREADS", "1") or 1)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def n_steps(dt: float, t_end: float) -> int:
    k = math.ceil(t_end / dt)
    if k > 1 and (k - 1) * dt >= t_end * (1 - 1e-12):
        k -= 1
    return k


def time_grid(dt: float, t_end: float) -> np.ndarray:
    """Step times ``0, dt, 2dt, ...`` with the last one clipped to exactly ``t_end``."""
    k = n_steps(dt, t_end)
    t = np.arange(k + 1) * dt
    t[-1] = t_end
    return t


def diffusion_apply(kind: str, v, noise) -> np.ndarray:
    """Apply D(v) to a noise vector; works row-wise on ``(..., d)`` arrays."""
    v = np.asarray(v, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if v.shape != noise.shape:
        raise ValueError(f"shape mismatch {v.shape} vs {noise.shape}")
    if kind == "anisotropic":
        return v * noise
    if kind == "isotropic":
        return np.sqrt(np.einsum("...i,...i->...", v, v))[..., None] * noise
    raise ValueError(f"unknown diffusion {kind!r}")


def _update_rows(ens, cons, params, noise, k, h, ids, rows):
    M, N, d = ens.shape
    m = rows // N
    i = rows % N
    x = ens[m, i]
    diff = x - params.xi * cons[m]
    out = x - params.lam * h * diff
    if params.sigma > 0:
        eta = noise.normal(k, m, ids[i], d, tag=TAG_DYNAMICS)
        out = out + params.sigma * math.sqrt(h) * diffusion_apply(params.diffusion, diff, eta)
    return out


def _chunks(total, parts):
    bounds = np.linspace(0, total, parts + 1).astype(int)
    return [np.arange(bounds[j], bounds[j + 1]) for j in range(parts) if bounds[j + 1] > bounds[j]]


def step_em(game: GameSpec, ens, params: CboParams, noise: NoiseStream, k: int,
            h: Optional[float] = None, ids=None, consensus: Optional[ConsensusSet] = None,
            pool: Optional[ThreadPoolExecutor] = None) -> np.ndarray:
    """One Euler-Maruyama step; returns a new ensemble.

    ``h`` defaults to ``params.dt``; ``ids`` maps particle slots to noise
    addresses (default ``0..N-1``).  A precomputed ``consensus`` of the same
    ensemble may be passed to avoid recomputing it.
    """
    ens = as_ensemble(ens, game)
    if k < 0:
        raise ValueError("step index must be >= 0")
    M, N, d = ens.shape
    h = params.dt if h is None else h
    ids = np.arange(N) if ids is None else np.asarray(ids)
    cons = (consensus if consensus is not None else consensus_all(game, ens, params.alpha)).points
    total = M * N
    if pool is None or pool._max_workers == 1:
        new = _update_rows(ens, cons, params, noise, k, h, ids, np.arange(total))
    else:
        parts = list(pool.map(lambda r: _update_rows(ens, cons, params, noise, k, h, ids, r),
                              _chunks(total, pool._max_workers)))
        new = np.concatenate(parts)
    new = new.reshape(M, N, d)
    bad = ~np.isfinite(new)
    if bad.any():
        m, i, _ = np.argwhere(bad)[0]
        raise BlowUpError(int(m), int(i), k)
    return new


def step_sizes(dt: float, t_end: float) -> np.ndarray:
    """Per-step sizes: ``dt`` throughout, except a genuinely shorter final step."""
    k = n_steps(dt, t_end)
    h = np.full(k, float(dt))
    last = t_end - (k - 1) * dt
    if abs(last - dt) > 1e-12 * dt:
        h[-1] = last
    return h


def simulate(game: GameSpec, init, params: CboParams, seed: int, record_every: int = 1,
             keep_snapshots: bool = True, ids=None, workers: Optional[int] = None,
             callback: Optional[Callable[[int, float, np.ndarray, ConsensusSet], None]] = None
             ) -> Trajectory:
    """Run the particle system from ``init`` to ``params.t_end``.

    ``callback(k, t, ens, consensus)`` sees every state, including the
    initial and terminal ones.  The result depends only on the inputs and
    ``seed``, never on ``workers``.
    """
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    ens = as_ensemble(init, game).copy()
    N = ens.shape[1]
    ids = np.arange(N) if ids is None else np.asarray(ids)
    if ids.shape != (N,):
        raise ValueError("ids must name one address per particle")
    times = time_grid(params.dt, params.t_end)
    K = len(times) - 1
    hs = step_sizes(params.dt, params.t_end)
    noise = NoiseStream(seed)
    workers = resolve_workers(workers)
    steps, cons_path, snaps = [], [], []

    def record(k, cons):
        steps.append(k)
        cons_path.append(cons.points)
        if keep_snapshots:
            snaps.append(ens)

    def partial():
        return Trajectory(times[: steps[-1] + 1] if steps else times[:1], np.array(steps, dtype=int),
                          np.array(cons_path), ens,
                          np.array(snaps) if keep_snapshots and snaps else None, ids)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for k in range(K + 1):
            cons = consensus_all(game, ens, params.alpha, workers=workers)
            if callback is not None:
                callback(k, float(times[k]), ens, cons)
            if k % record_every == 0 or k == K:
                record(k, cons)
            if k == K:
                break
            try:
                ens = step_em(game, ens, params, noise, k, h=float(hs[k]),
                              ids=ids, consensus=cons, pool=pool)
            except BlowUpError as err:
                err.trajectory = partial()
                raise
    finally:
        if pool is not None:
            pool.shutdown()
    return Trajectory(times, np.array(steps, dtype=int), np.array(cons_path), ens,
                      np.array(snaps) if keep_snapshots else None, ids)


def simulate_coupled(game: GameSpec, init_law, params: CboParams, n_small: int, n_ref: int,
                     seed: int, record_every: int = 1, keep_snapshots: bool = True,
                     workers: Optional[int] = None):
    """Run an ``n_small`` system and an ``n_ref`` reference on common random numbers.

    Particle ``i < n_small`` of both systems has the same initial position
    and the same noise addresses; reference particles beyond that draw their
    own initial positions and noise.
    """
    if not 1 <= n_small <= n_ref:
        raise ValueError(f"need 1 <= n_small <= n_ref, got {n_small}, {n_ref}")
    init_ref = init_law.sample(game.M, np.arange(n_ref), game.d, seed)
    small = simulate(game, init_ref[:, :n_small], params, seed, record_every,
                     keep_snapshots=keep_snapshots, workers=workers)
    ref = simulate(game, init_ref, params, seed, record_every,
                   keep_snapshots=keep_snapshots, workers=workers)
    return small, ref

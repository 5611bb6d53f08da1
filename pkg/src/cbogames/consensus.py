"""Softmin-weighted consensus points.

Player ``m``'s consensus is the average of its particles weighted by
``exp(-alpha * E_m(x; M^{-m}))`` where ``M^{-m}`` is the sample average of
every other player's particles.  All sums run over particles in a canonical
(lexicographic) order so that results are bit-identical under any
permutation of particle indices.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .games import GameSpec

__all__ = [
    "ConsensusSet",
    "as_ensemble",
    "canonical_order",
    "consensus_all",
    "consensus_for_player",
    "softmin_weights",
    "weighted_point",
]


@dataclass(frozen=True)
class ConsensusSet:
    points: np.ndarray  # (M, d)
    alpha: float

    def __getitem__(self, m):
        return self.points[m]

    def __len__(self):
        return len(self.points)


def as_ensemble(positions, game: GameSpec = None) -> np.ndarray:
    """Validate an ``(M, N, d)`` particle array and return it as float64."""
    ens = np.asarray(positions, dtype=float)
    if ens.ndim != 3:
        raise ValueError(f"ensemble must have shape (M, N, d), got {ens.shape}")
    if ens.shape[1] < 1:
        raise ValueError("ensemble needs at least one particle per player")
    if game is not None and (ens.shape[0] != game.M or ens.shape[2] != game.d):
        raise ValueError(f"ensemble shape {ens.shape} does not match game (M={game.M}, d={game.d})")
    if not np.all(np.isfinite(ens)):
        raise ValueError("ensemble has non-finite entries")
    return ens


def softmin_weights(costs, alpha: float) -> np.ndarray:
    """Normalized weights proportional to ``exp(-alpha * costs)``.

    The minimum cost is subtracted before exponentiation, so the largest
    weight before normalization is exactly 1 and nothing overflows.
    """
    costs = np.asarray(costs, dtype=float).ravel()
    if costs.size == 0:
        raise ValueError("softmin_weights needs at least one cost")
    if np.any(np.isnan(costs)):
        raise ValueError("NaN cost")
    if not np.all(np.isfinite(costs)):
        raise ValueError("infinite cost")
    if not (alpha >= 0 and np.isfinite(alpha)):
        raise ValueError(f"alpha must be finite and >= 0, got {alpha}")
    e = np.exp(-alpha * (costs - costs.min()))
    return e / e.sum()


def weighted_point(positions, w) -> np.ndarray:
    """Convex combination ``sum_i w_i x_i`` of ``(N, d)`` positions.

    Computed as an offset from the heaviest particle, so identical positions
    and one-hot weights reproduce that particle exactly.  The result is
    pulled back onto the ball of radius ``max_i |x_i|`` if rounding pushed it
    outside.
    """
    positions = np.asarray(positions, dtype=float)
    w = np.asarray(w, dtype=float).ravel()
    if positions.ndim != 2 or positions.shape[0] != w.size:
        raise ValueError(f"{w.size} weights for positions of shape {positions.shape}")
    ref = positions[int(np.argmax(w))]
    out = ref + (w[:, None] * (positions - ref)).sum(axis=0)
    rmax = np.sqrt(np.max(np.einsum("ij,ij->i", positions, positions)))
    r = np.sqrt(out @ out)
    if r > rmax:
        out = out * (rmax / r)
        while np.sqrt(out @ out) > rmax:
            out = np.nextafter(out, 0.0)
    return out


def canonical_order(points: np.ndarray) -> np.ndarray:
    """Indices sorting ``(N, d)`` points lexicographically by coordinate."""
    return np.lexsort(points.T[::-1])


def _sorted_players(ens):
    return [ens[j][canonical_order(ens[j])] for j in range(ens.shape[0])]


def _one_player(game, sorted_pos, means, m, alpha):
    y = np.delete(means, m, axis=0).ravel()
    costs = game.cost(m, sorted_pos[m], y)
    return weighted_point(sorted_pos[m], softmin_weights(costs, alpha))


def consensus_for_player(game: GameSpec, ens, m: int, alpha: float) -> np.ndarray:
    """Consensus point of player ``m`` (0-based), opponents at their sample averages."""
    ens = as_ensemble(ens, game)
    if not 0 <= m < game.M:
        raise ValueError(f"player index {m} outside 0..{game.M - 1}")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    sorted_pos = _sorted_players(ens)
    means = np.stack([p.mean(axis=0) for p in sorted_pos])
    return _one_player(game, sorted_pos, means, m, alpha)


def consensus_all(game: GameSpec, ens, alpha: float, workers: int = 1) -> ConsensusSet:
    """Consensus points of every player from one pass over the ensemble.

    ``alpha = 0`` is accepted here (plain per-player means); it is useful for
    the alpha -> 0 limit checks.
    """
    ens = as_ensemble(ens, game)
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    sorted_pos = _sorted_players(ens)
    means = np.stack([p.mean(axis=0) for p in sorted_pos])
    if workers > 1 and game.M > 1:
        with ThreadPoolExecutor(max_workers=min(workers, game.M)) as pool:
            pts = list(pool.map(lambda m: _one_player(game, sorted_pos, means, m, alpha),
                                range(game.M)))
    else:
        pts = [_one_player(game, sorted_pos, means, m, alpha) for m in range(game.M)]
    return ConsensusSet(np.stack(pts), float(alpha))

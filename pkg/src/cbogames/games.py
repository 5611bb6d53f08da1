"""M-player games with per-player cost functions and benchmark instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .noise import TAG_PROBE, NoiseStream

__all__ = [
    "GameSpec",
    "GrowthMeta",
    "GameError",
    "EvaluationError",
    "builtin_game",
    "BUILTIN_GAMES",
    "eval_cost",
    "nash_residual",
    "opponents",
    "as_strategy",
    "rastrigin",
]

# A cost evaluator takes x_m with shape (..., d) and x_{-m} with shape
# (..., (M-1)*d) and returns costs with shape (...). Broadcasting between the
# leading axes is expected (N particles against one opponent vector).
CostFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class GameError(ValueError):
    """Invalid game definition or input of the wrong shape."""


class EvaluationError(ArithmeticError):
    """A cost evaluator produced a non-finite value."""

    def __init__(self, player: int, message: str = ""):
        self.player = player
        super().__init__(message or f"non-finite cost for player {player}")


@dataclass(frozen=True)
class GrowthMeta:
    """Declared constants of the Lipschitz (s) and growth (ell, c, G) hypotheses.

    ``radius`` is the ball |(x, y)| <= radius on which the declaration was
    checked; ``None`` means it is claimed globally.
    """

    s: float
    ell: float
    c: float
    G: float
    radius: Optional[float] = None

    def __post_init__(self):
        if self.s < 0 or self.ell < 0 or self.c <= 0 or self.G <= 0:
            raise GameError(f"invalid growth constants {self}")

    @property
    def p_m(self) -> float:
        """Stability exponent floor: 2 + s for bounded costs, 1 otherwise."""
        return 2.0 + self.s if self.ell == 0 else 1.0


@dataclass(frozen=True)
class GameSpec:
    name: str
    M: int
    d: int
    costs: tuple
    growth_meta: Optional[GrowthMeta] = None
    known_nash: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.M < 2:
            raise GameError(f"a game needs at least 2 players, got M={self.M}")
        if self.d < 1:
            raise GameError(f"strategy dimension must be >= 1, got d={self.d}")
        if len(self.costs) != self.M:
            raise GameError(f"expected {self.M} cost evaluators, got {len(self.costs)}")
        if self.known_nash is not None:
            x = np.array(self.known_nash, dtype=float).reshape(self.M, self.d)
            x.setflags(write=False)
            object.__setattr__(self, "known_nash", x)

    def cost(self, m: int, x_m, x_minus_m) -> np.ndarray:
        """Vectorized cost of player ``m`` (0-based), finiteness-checked."""
        val = np.asarray(self.costs[m](np.asarray(x_m, dtype=float),
                                       np.asarray(x_minus_m, dtype=float)), dtype=float)
        if not np.all(np.isfinite(val)):
            raise EvaluationError(m)
        return val


def opponents(strategy: np.ndarray, m: int) -> np.ndarray:
    """Flatten the opponents of player ``m`` (0-based) in player order.

    Works on the trailing two axes, so ``(M, d)`` gives ``((M-1)*d,)``.
    """
    strategy = np.asarray(strategy)
    rest = np.delete(strategy, m, axis=-2)
    return rest.reshape(rest.shape[:-2] + (-1,))


def as_strategy(game: GameSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size != game.M * game.d:
        raise GameError(f"strategy needs {game.M}x{game.d} entries, got shape {x.shape}")
    x = x.reshape(game.M, game.d)
    if not np.all(np.isfinite(x)):
        raise GameError("strategy has non-finite entries")
    return x


def eval_cost(game: GameSpec, m: int, x_m, x_minus_m) -> float:
    """Cost of player ``m`` (0-based) at ``(x_m; x_{-m})``."""
    if not 0 <= m < game.M:
        raise GameError(f"player index {m} outside 0..{game.M - 1}")
    x_m = np.asarray(x_m, dtype=float)
    x_minus_m = np.asarray(x_minus_m, dtype=float)
    if x_m.shape != (game.d,):
        raise GameError(f"x_m must have shape ({game.d},), got {x_m.shape}")
    if x_minus_m.shape != ((game.M - 1) * game.d,):
        raise GameError(f"x_minus_m must have shape ({(game.M - 1) * game.d},), got {x_minus_m.shape}")
    return float(game.cost(m, x_m, x_minus_m))


def _ball_samples(noise: NoiseStream, m: int, count: int, d: int) -> np.ndarray:
    # uniform in the unit ball: gaussian direction, radius u^(1/d)
    z = noise.normal(0, np.full(count, m), np.arange(count), d, tag=TAG_PROBE)
    u = noise.uniform(1, np.full(count, m), np.arange(count), 1, tag=TAG_PROBE)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return z / norms * u ** (1.0 / d)


def nash_residual(game: GameSpec, x, probe_budget: int = 1000, probe_radius: float = 1.0,
                  rng_seed: int = 0, candidates: Optional[Sequence[np.ndarray]] = None) -> float:
    """Largest sampled unilateral improvement available to any player.

    For every player the current cost is compared against ``probe_budget``
    candidates drawn uniformly from the ball of radius ``probe_radius`` around
    that player's strategy.  ``candidates`` overrides the sampling with
    explicit per-player arrays of shape ``(budget, d)``.
    """
    if probe_budget < 1:
        raise ValueError("probe_budget must be >= 1")
    if probe_radius <= 0:
        raise ValueError("probe_radius must be positive")
    x = as_strategy(game, x)
    noise = NoiseStream(rng_seed)
    worst = 0.0
    for m in range(game.M):
        y = opponents(x, m)
        current = float(game.cost(m, x[m], y))
        if candidates is not None:
            cand = np.asarray(candidates[m], dtype=float).reshape(-1, game.d)
        else:
            cand = x[m] + probe_radius * _ball_samples(noise, m, probe_budget, game.d)
        best = float(np.min(game.cost(m, cand, y)))
        worst = max(worst, current - best)
    return max(worst, 0.0)


def _opp_mean(y: np.ndarray, M: int, d: int) -> np.ndarray:
    return y.reshape(y.shape[:-1] + (M - 1, d)).mean(axis=-2)


def rastrigin(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return 10.0 * z.shape[-1] + np.sum(z * z - 10.0 * np.cos(2.0 * np.pi * z), axis=-1)


def _decoupled_quadratic(M, d, coupling):
    def cost(x, y):
        return np.sum(x * x, axis=-1)

    # checked on |(x, y)| <= 10 only: a decoupled cost cannot be sandwiched globally
    meta = GrowthMeta(s=1.0, ell=2.0, c=1.0, G=100.0, radius=10.0)
    return GameSpec("decoupled-quadratic", M, d, tuple(cost for _ in range(M)),
                    meta, np.zeros((M, d)))


def _coupled_quadratic(M, d, coupling):
    if abs(coupling) >= 1:
        raise GameError(f"coupled-quadratic needs |coupling| < 1 (contraction), got {coupling}")

    def cost(x, y):
        z = x - coupling * _opp_mean(y, M, d)
        return np.sum(z * z, axis=-1)

    meta = GrowthMeta(s=1.0, ell=2.0, c=2.0, G=100.0, radius=10.0)
    return GameSpec("coupled-quadratic", M, d, tuple(cost for _ in range(M)),
                    meta, np.zeros((M, d)))


def _rastrigin_coupled(M, d, coupling):
    if abs(coupling) >= 1:
        raise GameError(f"rastrigin-coupled needs |coupling| < 1, got {coupling}")

    def cost(x, y):
        return rastrigin(x - coupling * _opp_mean(y, M, d))

    meta = GrowthMeta(s=1.0, ell=2.0, c=2.0, G=max(100.0, 10.0 * d), radius=10.0)
    return GameSpec("rastrigin-coupled", M, d, tuple(cost for _ in range(M)),
                    meta, np.zeros((M, d)))


BUILTIN_GAMES = {
    "decoupled-quadratic": _decoupled_quadratic,
    "coupled-quadratic": _coupled_quadratic,
    "rastrigin-coupled": _rastrigin_coupled,
}


def builtin_game(name: str, M: int = 2, d: int = 2, coupling: float = 0.0) -> GameSpec:
    """Benchmark game by name; all three have their Nash equilibrium at the origin."""
    try:
        factory = BUILTIN_GAMES[name]
    except KeyError:
        raise GameError(f"unknown game {name!r}; choose from {sorted(BUILTIN_GAMES)}") from None
    return factory(int(M), int(d), float(coupling))

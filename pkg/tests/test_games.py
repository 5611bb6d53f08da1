import numpy as np
import pytest

from cbogames.games import (BUILTIN_GAMES, EvaluationError, GameError, GameSpec, builtin_game,
                            eval_cost, nash_residual, opponents)


def test_eval_cost_decoupled():
    g = builtin_game("decoupled-quadratic", 2, 2)
    assert eval_cost(g, 0, [3.0, 4.0], [7.0, -1.0]) == 25.0


def test_eval_cost_dimension_mismatch():
    g = builtin_game("decoupled-quadratic", 2, 2)
    with pytest.raises(GameError):
        eval_cost(g, 0, [1.0, 2.0, 3.0], [0.0, 0.0])
    with pytest.raises(GameError):
        eval_cost(g, 0, [1.0, 2.0], [0.0])
    with pytest.raises(GameError):
        eval_cost(g, 2, [1.0, 2.0], [0.0, 0.0])


def test_non_finite_cost_names_player():
    g = GameSpec("bad", 2, 1, (lambda x, y: np.sum(x * 0, axis=-1), lambda x, y: np.full(np.shape(x)[:-1], np.inf)))
    with pytest.raises(EvaluationError) as err:
        eval_cost(g, 1, [1.0], [0.0])
    assert err.value.player == 1


def test_opponents_order():
    x = np.arange(8.0).reshape(4, 2)
    assert np.array_equal(opponents(x, 2), [0, 1, 2, 3, 6, 7])


def test_eval_cost_is_pure():
    g = builtin_game("rastrigin-coupled", 3, 2, 0.4)
    x, y = np.array([0.3, -1.2]), np.array([1.0, 2.0, -0.5, 0.1])
    assert eval_cost(g, 1, x, y) == eval_cost(g, 1, x, y)


def test_coupled_quadratic_nash_by_fixed_point():
    # independent oracle: iterate best responses, which contract for |a| < 1
    for M, d, a in [(2, 2, 0.1), (3, 1, 0.5), (4, 3, -0.9)]:
        x = np.random.default_rng(M).normal(size=(M, d)) * 5
        for _ in range(2000):
            x = np.stack([a * np.delete(x, m, axis=0).mean(axis=0) for m in range(M)])
        assert np.abs(x).max() < 1e-12
        g = builtin_game("coupled-quadratic", M, d, a)
        assert np.array_equal(g.known_nash, np.zeros((M, d)))
        for m in range(M):
            assert eval_cost(g, m, np.zeros(d), np.zeros((M - 1) * d)) == 0.0


def test_known_nash_beats_random_deviations():
    rng = np.random.default_rng(1)
    for name in BUILTIN_GAMES:
        g = builtin_game(name, 3, 2, 0.3)
        x = g.known_nash
        for m in range(g.M):
            y = opponents(x, m)
            base = eval_cost(g, m, x[m], y)
            others = g.cost(m, rng.normal(size=(100, 2)) * 3, y)
            assert np.all(base <= others)


def test_rastrigin_origin():
    g = builtin_game("rastrigin-coupled", 2, 2, 0.0)
    assert eval_cost(g, 0, [0.0, 0.0], [0.5, 0.5]) == 0.0
    assert np.array_equal(g.known_nash.ravel(), np.zeros(4))


def test_builtin_errors():
    with pytest.raises(GameError):
        builtin_game("nope")
    with pytest.raises(GameError):
        builtin_game("coupled-quadratic", 2, 2, 1.0)
    with pytest.raises(GameError):
        builtin_game("decoupled-quadratic", 1, 2)


def test_nash_residual_examples():
    g = builtin_game("decoupled-quadratic", 2, 2)
    assert nash_residual(g, np.zeros(4)) == 0.0
    x = np.array([1.0, 0.0, 0.0, 0.0])
    r = nash_residual(g, x, probe_budget=1000, probe_radius=2.0)
    # oracle: best sampled |y|^2 from an independent cloud in the same ball is close to 0
    assert 0.0 < r <= 1.0
    assert r > 0.95
    cand = [x.reshape(2, 2)[0][None], np.zeros((1, 2))]
    assert nash_residual(g, x, probe_budget=1, candidates=cand) == 0.0


def test_nash_residual_preconditions():
    g = builtin_game("decoupled-quadratic", 2, 2)
    with pytest.raises(ValueError):
        nash_residual(g, np.zeros(4), probe_budget=0)
    with pytest.raises(ValueError):
        nash_residual(g, np.zeros(4), probe_radius=0.0)


@pytest.mark.parametrize("name", sorted(BUILTIN_GAMES))
def test_nash_certificate(name):
    g = builtin_game(name, 2, 2, 0.3)
    assert nash_residual(g, g.known_nash, probe_budget=10_000, probe_radius=3.0) <= 1e-12


@pytest.mark.parametrize("name", sorted(BUILTIN_GAMES))
def test_growth_conformance(name):
    g = builtin_game(name, 2, 2, 0.5)
    gm = g.growth_meta
    rng = np.random.default_rng(7)
    z = rng.normal(size=(1000, 4))
    z *= (10 * rng.uniform(size=(1000, 1)) ** 0.25) / np.linalg.norm(z, axis=1, keepdims=True)
    r = np.linalg.norm(z, axis=1)
    for m in range(g.M):
        e = g.cost(m, z[:, :2], z[:, 2:])
        assert np.all(e >= (r ** gm.ell - gm.G) / gm.c)
        assert np.all(e <= gm.c * (r ** gm.ell + gm.G))


def test_game_spec_is_immutable():
    g = builtin_game("decoupled-quadratic", 2, 2)
    with pytest.raises(ValueError):
        g.known_nash[0, 0] = 1.0

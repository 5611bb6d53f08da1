import numpy as np
import pytest

from cbogames.consensus import consensus_all
from cbogames.dynamics import (BlowUpError, CboParams, GaussianInit, PointInit, UniformInit,
                               diffusion_apply, n_steps, resolve_workers, step_sizes, simulate,
                               simulate_coupled, step_em, time_grid)
from cbogames.games import GameSpec, builtin_game
from cbogames.metrics import variance_trace
from cbogames.noise import NoiseStream

G = builtin_game("decoupled-quadratic", 2, 2)


def test_params_validation():
    CboParams()
    for bad in (dict(lam=-1), dict(sigma=-1), dict(alpha=0), dict(xi=1.5), dict(dt=0),
                dict(dt=2, t_end=1), dict(diffusion="weird"), dict(sigma=np.nan)):
        with pytest.raises(ValueError):
            CboParams(**bad)
    assert CboParams(lam=1, sigma=0.5).decay_rate == 0.875


def test_diffusion_apply():
    for kind in ("isotropic", "anisotropic"):
        assert np.array_equal(diffusion_apply(kind, np.zeros(2), np.array([1.0, -2.0])), [0, 0])
    assert np.array_equal(diffusion_apply("anisotropic", np.array([3.0, 4.0]), np.ones(2)), [3, 4])
    assert np.array_equal(diffusion_apply("isotropic", np.array([3.0, 4.0]), np.array([0.0, 1.0])),
                          [0, 5])
    with pytest.raises(ValueError):
        diffusion_apply("isotropic", np.ones(2), np.ones(3))


def test_time_grid_truncates_last_step():
    assert n_steps(0.3, 1.0) == 4
    t = time_grid(0.3, 1.0)
    assert t[-1] == 1.0 and np.all(np.diff(t) > 0) and t.size == 5
    assert time_grid(0.01, 10.0)[-1] == 10.0


def test_step_sizes():
    assert np.array_equal(step_sizes(0.1, 1.0), np.full(10, 0.1))
    h = step_sizes(0.3, 1.0)
    assert np.array_equal(h[:3], np.full(3, 0.3)) and abs(h[-1] - 0.1) < 1e-15


def test_step_sigma_zero_is_exact_drift():
    prm = CboParams(lam=1.3, sigma=0.0, dt=0.1, t_end=1.0)
    ens = np.random.default_rng(0).normal(size=(2, 5, 2))
    before = ens.copy()
    out = step_em(G, ens, prm, NoiseStream(0), 0)
    c = consensus_all(G, ens, prm.alpha).points
    assert np.array_equal(ens, before)
    assert np.array_equal(out, ens - 1.3 * 0.1 * (ens - c[:, None, :]))


def test_step_identical_particles_fixed():
    prm = CboParams(sigma=0.0, dt=0.1, t_end=1.0)
    ens = np.zeros((2, 4, 2))
    ens[0] = [1.5, -0.5]
    out = step_em(G, ens, prm, NoiseStream(0), 0)
    assert np.array_equal(out[0], ens[0])


def test_single_particle_constant_to_the_bit():
    x0 = UniformInit().sample(2, np.arange(1), 2, 11)
    for diffusion in ("anisotropic", "isotropic"):
        prm = CboParams(sigma=2.0, dt=0.05, t_end=5.0, diffusion=diffusion)
        traj = simulate(G, x0, prm, 11)
        assert np.array_equal(traj.snapshots, np.broadcast_to(x0, traj.snapshots.shape))


def test_identity_dynamics():
    x0 = GaussianInit(0.0, 2.0).sample(2, np.arange(20), 2, 1)
    prm = CboParams(lam=0.0, sigma=0.0, dt=0.1, t_end=1.0)
    assert np.array_equal(simulate(G, x0, prm, 1).terminal, x0)


def test_xi_zero_sigma_zero_contracts_geometrically():
    x0 = UniformInit().sample(2, np.arange(8), 2, 2)
    prm = CboParams(lam=1.0, sigma=0.0, xi=0.0, dt=0.1, t_end=1.0)
    traj = simulate(G, x0, prm, 2)
    x = x0
    for k in range(10):
        x = x - 0.1 * x
        assert np.array_equal(traj.snapshots[k + 1], x)


def test_record_every_and_final_step():
    x0 = UniformInit().sample(2, np.arange(5), 2, 0)
    prm = CboParams(dt=0.1, t_end=1.05)
    traj = simulate(G, x0, prm, 0, record_every=4)
    assert list(traj.record_steps) == [0, 4, 8, 11]
    assert traj.record_times[-1] == 1.05
    assert traj.snapshots.shape == (4, 2, 5, 2) and traj.consensus.shape == (4, 2, 2)
    assert np.array_equal(traj.snapshots[-1], traj.terminal)


def test_determinism_across_workers():
    x0 = UniformInit().sample(2, np.arange(64), 2, 9)
    prm = CboParams(dt=0.02, t_end=1.0)
    runs = [simulate(G, x0, prm, 9, workers=w) for w in (1, 2, 8)]
    for r in runs[1:]:
        assert np.array_equal(r.snapshots, runs[0].snapshots)
        assert np.array_equal(r.consensus, runs[0].consensus)


def test_env_var_workers(monkeypatch):
    monkeypatch.setenv("CBO_GAMES_THREADS", "3")
    assert resolve_workers() == 3
    monkeypatch.setenv("CBO_GAMES_THREADS", "0")
    assert resolve_workers() >= 1
    assert resolve_workers(2) == 2


def test_exchangeability():
    ids = np.arange(12)
    x0 = UniformInit().sample(2, ids, 2, 4)
    perm = np.random.default_rng(0).permutation(12)
    prm = CboParams(dt=0.05, t_end=1.0)
    a = simulate(G, x0, prm, 4, ids=ids)
    b = simulate(G, x0[:, perm], prm, 4, ids=ids[perm])
    assert np.array_equal(b.terminal, a.terminal[:, perm])


def test_self_coupling_is_bit_identical():
    prm = CboParams(dt=0.05, t_end=1.0)
    small, ref = simulate_coupled(G, UniformInit(), prm, 32, 32, seed=5)
    assert np.array_equal(small.snapshots, ref.snapshots)
    small, ref = simulate_coupled(G, UniformInit(), prm, 1, 1, seed=5)
    assert np.array_equal(small.terminal, ref.terminal)


def test_coupled_shares_initials():
    prm = CboParams(dt=0.05, t_end=0.5)
    small, ref = simulate_coupled(G, UniformInit(), prm, 8, 64, seed=6)
    assert np.array_equal(small.snapshots[0], ref.snapshots[0][:, :8])
    with pytest.raises(ValueError):
        simulate_coupled(G, UniformInit(), prm, 65, 64, seed=6)


def test_decay_example():
    x0 = UniformInit(-3, 3).sample(2, np.arange(100), 2, 0)
    traj = simulate(G, x0, CboParams(), 0, record_every=100)
    v = variance_trace(traj, G.known_nash)[:, -1]
    assert v[-1] <= 1e-3 * v[0]


def test_no_blowup_and_consensus_bound():
    x0 = UniformInit().sample(2, np.arange(50), 2, 1)
    traj = simulate(G, x0, CboParams(), 1, record_every=10)
    m2 = (np.linalg.norm(traj.snapshots, axis=-1) ** 2).mean(axis=-1)
    assert np.all(np.isfinite(m2)) and m2.sum(axis=1).max() <= 1e3 * m2[0].sum()
    radius = np.linalg.norm(traj.snapshots, axis=-1).max(axis=-1)
    assert np.all(np.linalg.norm(traj.consensus, axis=-1) <= radius)


def test_blow_up_reports_partial_trajectory():
    def explode(x, y):
        return np.where(np.abs(x[..., 0]) > 50, np.nan, np.sum(x ** 2, axis=-1))
    g = GameSpec("explode", 2, 1, (explode, explode))
    prm = CboParams(lam=0.5, sigma=3.0, dt=1.0, t_end=500.0, diffusion="anisotropic")
    x0 = PointInit(1.0).sample(2, np.arange(3), 1, 0)
    x0[:, 1] = -1.0
    with pytest.raises((BlowUpError, ArithmeticError)) as err:
        simulate(g, x0, prm, 0)
    if isinstance(err.value, BlowUpError):
        assert err.value.trajectory is not None

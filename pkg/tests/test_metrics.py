import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbogames.metrics import (EXACT_WASSERSTEIN_CAP, fit_exponential_decay, fit_power_law,
                              gamma_exponent, moment_trace, variance_trace, wasserstein_p)


def brute_wp(a, b, p):
    a = np.asarray(a, float).reshape(len(a), -1)
    b = np.asarray(b, float).reshape(len(b), -1)
    best = min(sum(np.linalg.norm(a[i] - b[s[i]]) ** p for i in range(len(a)))
               for s in itertools.permutations(range(len(a))))
    return (best / len(a)) ** (1 / p)


def test_wasserstein_examples():
    a = np.random.default_rng(0).normal(size=(6, 2))
    assert wasserstein_p(a, a[::-1]) == 0.0
    assert math.isclose(wasserstein_p([[1.0, 2.0]], [[4.0, 6.0]], 3), 5.0)
    assert math.isclose(wasserstein_p([0.0, 1.0], [0.0, 3.0], 2), math.sqrt(2), rel_tol=1e-15)


def test_wasserstein_errors():
    with pytest.raises(ValueError):
        wasserstein_p(np.zeros((3, 2)), np.zeros((4, 2)))
    big = np.zeros((EXACT_WASSERSTEIN_CAP + 1, 1))
    with pytest.raises(ValueError):
        wasserstein_p(big, big)
    with pytest.raises(ValueError):
        wasserstein_p([0.0], [1.0], 0.5)


@given(st.integers(1, 6), st.integers(1, 3), st.sampled_from([1.0, 2.0, 3.0]),
       st.integers(0, 2 ** 32 - 1))
def test_wasserstein_matches_brute_force(n, d, p, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n, d)), rng.normal(size=(n, d)) * 2
    assert abs(wasserstein_p(a, b, p) - brute_wp(a, b, p)) <= 1e-9


@given(st.integers(1, 8), st.integers(1, 3), st.sampled_from([1.0, 2.0, 3.0]),
       st.integers(0, 2 ** 32 - 1))
def test_wasserstein_axioms(n, d, p, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.normal(size=(n, d)) for _ in range(3))
    ab = wasserstein_p(a, b, p)
    assert ab == wasserstein_p(b, a, p) or math.isclose(ab, wasserstein_p(b, a, p), rel_tol=1e-12)
    assert wasserstein_p(a, a[rng.permutation(n)], p) == 0.0
    assert ab <= wasserstein_p(a, c, p) + wasserstein_p(c, b, p) + 1e-9
    # mean difference and index-aligned coupling bounds
    assert np.linalg.norm(a.mean(0) - b.mean(0)) <= ab + 1e-12
    assert ab ** p <= np.mean(np.linalg.norm(a - b, axis=1) ** p) + 1e-12


def test_variance_trace_examples():
    x_star = np.array([[1.0, -2.0], [0.5, 0.0]])
    snaps = np.broadcast_to(x_star[:, None, :], (3, 2, 4, 2))
    assert np.array_equal(variance_trace(snaps, x_star), np.zeros((3, 3)))
    e1 = np.array([1.0, 0.0])
    one = (x_star + e1)[None, :, None, :]
    assert np.array_equal(variance_trace(one, x_star)[0], [1.0, 1.0, 2.0])
    two = np.stack([x_star - e1, x_star + e1], axis=1)[None]
    assert np.array_equal(variance_trace(two, x_star)[0], [1.0, 1.0, 2.0])


def test_moment_trace():
    snaps = np.ones((2, 2, 3, 2))
    assert np.allclose(moment_trace(snaps, 2), 2.0)
    assert np.allclose(moment_trace(snaps, 4), 4.0)


def test_fit_exponential_examples():
    t = np.arange(6.0)
    f = fit_exponential_decay(t, np.exp(-0.875 * t))
    assert math.isclose(f.slope, -0.875, abs_tol=1e-12) and math.isclose(f.r_squared, 1.0)
    assert fit_exponential_decay(t, np.full(6, 3.0)).slope == 0.0
    f = fit_exponential_decay(t, 2 * np.exp(-3 * t))
    assert math.isclose(f.slope, -3, rel_tol=1e-12) and math.isclose(f.intercept, math.log(2))
    with pytest.raises(ValueError):
        fit_exponential_decay(t, np.r_[1.0, 1.0, 0.0, 1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        fit_exponential_decay(t[:2], [1.0, 2.0])


def test_fit_power_law_examples():
    n = np.array([16.0, 32, 64, 128, 256])
    f = fit_power_law(n, n ** -0.5)
    assert math.isclose(f.slope, -0.5, rel_tol=1e-12) and math.isclose(f.r_squared, 1.0)
    assert math.isclose(fit_power_law(n, 3 / n).slope, -1.0, rel_tol=1e-12)
    assert fit_power_law(n, np.full(5, 0.2)).slope == 0.0


@given(st.floats(-5, 5), st.floats(-3, 3))
def test_fits_recover_planted_slopes(slope, c):
    t = np.linspace(0, 4, 9)
    f = fit_exponential_decay(t, np.exp(c + slope * t))
    assert abs(f.slope - slope) < 1e-9 and abs(f.intercept - c) < 1e-9


def gamma_oracle(q, p, pm):
    r = max(2.0, pm)
    terms = [0.5, (q - p) / (2 * p * p), (q - r) / (2 * r * r)]
    return min(terms)


def test_gamma_examples():
    assert gamma_exponent(8, 2, 1) == 0.5
    assert gamma_exponent(6, 2, 1) == 0.5
    assert math.isclose(gamma_exponent(5, 2.5, 1), 0.2, rel_tol=1e-15)
    for bad in ((3, 1, 1), (8, 5, 1), (8, 0, 1), (6, 2, 4)):
        with pytest.raises(ValueError):
            gamma_exponent(*bad)


@given(st.floats(0.5, 6), st.floats(1, 4), st.floats(0.1, 1))
def test_gamma_matches_oracle(pm, p, frac):
    q = max(4.0, 2 * pm, 2 * p) * (1 + 3 * frac)
    assert gamma_exponent(q, p, pm) == gamma_oracle(q, p, pm)

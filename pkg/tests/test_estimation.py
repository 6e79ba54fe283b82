import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsecmul.estimation import (
    CovariancePair,
    DegenerateWarning,
    lmmse_weights,
    mse_from_snr,
    snr_from_cov,
    snr_from_factor,
)
from dpsecmul.montecarlo import simulate_linear_estimate


def random_instance(rng, n, m=None):
    m = n + 1 if m is None else m
    nu = rng.standard_normal(n)
    f = rng.standard_normal((n, m))
    gamma2 = float(np.exp(rng.uniform(-1, 1)))
    k2 = f @ f.T
    return nu, f, gamma2, CovariancePair(k2 + gamma2 * np.outer(nu, nu), k2)


def brute_force_mse(nu, k2, gamma2):
    # normal equations for w minimising E[(w.y - X)^2]
    k1 = k2 + gamma2 * np.outer(nu, nu)
    w = np.linalg.solve(k1, gamma2 * nu)
    return gamma2 - gamma2 * nu @ w


def test_no_signal_gives_zero():
    k = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert snr_from_cov(CovariancePair(k, k)) == 0.0


def test_scalar_case():
    eta, s2 = 1.7, 0.4
    assert snr_from_cov(CovariancePair([[eta + s2]], [[s2]])) == pytest.approx(eta / s2, rel=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_snr_matches_normal_equations(seed):
    rng = np.random.default_rng(seed)
    nu, f, gamma2, cov = random_instance(rng, 3)
    mse = brute_force_mse(nu, cov.k2, gamma2)
    assert snr_from_cov(cov) == pytest.approx(gamma2 / mse - 1, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_factor_and_cov_routes_agree(seed, n):
    rng = np.random.default_rng(seed)
    nu, f, gamma2, cov = random_instance(rng, n)
    assert snr_from_factor(math.sqrt(gamma2) * nu, f) == pytest.approx(snr_from_cov(cov), rel=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_congruence_invariance(seed, n):
    rng = np.random.default_rng(seed)
    _, _, _, cov = random_instance(rng, n)
    m = rng.standard_normal((n, n)) + 3 * np.eye(n)
    moved = CovariancePair(m.T @ cov.k1 @ m, m.T @ cov.k2 @ m)
    assert snr_from_cov(moved) == pytest.approx(snr_from_cov(cov), rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_determinant_order_and_nonnegative(seed, n):
    rng = np.random.default_rng(seed)
    _, _, _, cov = random_instance(rng, n)
    cov.check()
    assert np.linalg.det(cov.k1) >= np.linalg.det(cov.k2) >= 0
    assert snr_from_cov(cov) >= 0


def test_singular_noise_with_leak_is_infinite():
    # noise only along the first coordinate, signal along the second
    k2 = np.diag([1.0, 0.0])
    k1 = k2 + np.outer([0.0, 1.0], [0.0, 1.0])
    assert math.isinf(snr_from_cov(CovariancePair(k1, k2)))
    assert math.isinf(snr_from_factor([0.0, 1.0], [[1.0], [0.0]]))


def test_singular_noise_without_leak_is_finite():
    # a duplicated observation adds nothing
    k2 = np.full((2, 2), 0.5)
    k1 = k2 + 2.0
    assert snr_from_cov(CovariancePair(k1, k2)) == pytest.approx(4.0, rel=1e-12)
    assert snr_from_factor([math.sqrt(2)] * 2, [[math.sqrt(0.5)]] * 2) == pytest.approx(4.0, rel=1e-12)


def test_zero_noise_factor():
    assert math.isinf(snr_from_factor([1.0, 2.0], np.zeros((2, 3))))
    assert snr_from_factor([0.0, 0.0], np.ones((2, 1))) == 0.0


def test_check_rejects_bad_pairs():
    with pytest.raises(ValueError):
        CovariancePair([[1.0, 0.5], [0.0, 1.0]], np.eye(2)).check()
    with pytest.raises(ValueError):
        CovariancePair(np.eye(2), 2 * np.eye(2)).check()
    with pytest.raises(ValueError):
        CovariancePair(np.eye(2), np.eye(3))


def test_lmmse_weights_examples():
    assert np.array_equal(lmmse_weights(np.eye(3), np.zeros(3)), np.zeros(3))
    assert lmmse_weights([[2.0]], [1.0]) == pytest.approx([0.5])
    rng = np.random.default_rng(4)
    a = rng.standard_normal((4, 4))
    k1 = a @ a.T + 0.1 * np.eye(4)
    c = rng.standard_normal(4)
    w = lmmse_weights(k1, c)
    assert np.linalg.norm(k1 @ w - c) <= 1e-10


def test_lmmse_weights_singular_warns():
    k1 = np.ones((2, 2))
    with pytest.warns(DegenerateWarning):
        w = lmmse_weights(k1, [1.0, 1.0])
    assert w == pytest.approx([0.5, 0.5])


def test_lmmse_weights_regular_is_silent():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        lmmse_weights(np.diag([1.0, 2.0]), [1.0, 1.0])


def test_mse_from_snr():
    assert mse_from_snr(2.0, 0.0) == 2.0
    assert mse_from_snr(1.0, 3.0) == 0.25
    assert mse_from_snr(1.0, math.inf) == 0.0
    with pytest.raises(ValueError):
        mse_from_snr(0.0, 1.0)


def test_lmmse_monte_carlo():
    # a 3-SE band holds for ~99.7% of instances; require 19 of 20
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(1, 6))
        nu, f, gamma2, cov = random_instance(rng, n)
        w = lmmse_weights(cov.k1, gamma2 * nu)
        sim = simulate_linear_estimate(nu, f, w, gamma2, n=10**5, seed=seed)
        hits += abs(sim.mse - mse_from_snr(gamma2, snr_from_cov(cov))) <= 3 * sim.stderr
    assert hits >= 19


@pytest.mark.parametrize("seed", range(5))
def test_lmmse_mismatched_power(seed):
    # weights tuned for power gamma2, applied to weaker data
    rng = np.random.default_rng(200 + seed)
    nu, f, gamma2, cov = random_instance(rng, 3)
    w = lmmse_weights(cov.k1, gamma2 * nu)
    sim = simulate_linear_estimate(nu, f, w, 0.5 * gamma2, n=2 * 10**5, seed=seed)
    assert sim.mse <= mse_from_snr(gamma2, snr_from_cov(cov)) + 3 * sim.stderr

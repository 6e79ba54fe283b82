import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsecmul.accuracy import snr_a
from dpsecmul.distributions import NoiseSpec, epsilon_from_variance
from dpsecmul.privacy import snr_p
from dpsecmul.schemes import (
    LayeredParams,
    LinearCode,
    baseline1_epsilon_lower,
    baseline1_mse,
    baseline1_pair_snr,
    build_iid_baseline,
    build_layered,
    build_shamir_real,
    check_g,
    default_g,
    extract_layered,
    lagrange_at_zero,
    random_code,
    validate_g,
)

# mpmath determinant ratios on the complex shares (notes/oracles/oracles.py)
BASELINE1 = {
    0.01: (400.0, 0.00052813374647819448158),
    1.0: (4.0, 0.39455782312925170068),
    100.0: (0.04, 0.99889888860197356338),
}


def test_layered_small_example_rows():
    d = 1e-2
    code = build_layered(LayeredParams(2, 1.0, d**1.5, d, g=[[1.0, -1.0]]))
    expected = np.array([[1, 1 + d**1.5, d], [1, 1 + d**1.5, -d], [1, 1, 0]])
    assert np.array_equal(code.v, expected)
    assert np.array_equal(code.w, code.v)


def test_layered_t1_zero_alpha_duplicates_node():
    code = build_layered(LayeredParams(1, 1.0, 0.0))
    assert np.array_equal(code.v, [[1.0, 1.0], [1.0, 1.0]])
    single = code.subset([0])
    assert snr_a(code).snr_a == pytest.approx(snr_a(single).snr_a, rel=1e-12)


def test_layered_zero_alphas_all_rows_equal():
    x, eta = 1.7, 0.8
    code = build_layered(LayeredParams(3, x, 0.0, 0.0), eta=eta)
    assert np.all(code.v == code.v[-1])
    assert snr_p(code, 3).snr_p == pytest.approx(eta / x**2, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.floats(0.2, 5.0), st.floats(1e-6, 0.1), st.floats(1e-6, 0.1))
def test_layered_round_trip(t, x, a1, a2):
    p = LayeredParams(t, x, a1, a2 if t > 1 else 0.0)
    back = extract_layered(build_layered(p))
    assert back.t == t
    assert back.x == pytest.approx(x, rel=1e-15)
    assert back.alpha1 == pytest.approx(a1, rel=1e-8)
    assert back.alpha2 == pytest.approx(p.alpha2, rel=1e-12)


def test_layered_staircase_noise():
    code = build_layered(LayeredParams(3, 2.0, 1e-3, 1e-2), noise="staircase")
    first = code.noise_a[0]
    assert first.kind == "staircase"
    assert first.variance() == pytest.approx(1.0, rel=1e-10)
    assert first.epsilon == pytest.approx(epsilon_from_variance(4.0), rel=1e-12)
    assert all(s == NoiseSpec.laplace(1.0) for s in code.noise_a[1:])


def test_default_g_t2():
    g = default_g(2)
    assert g.shape == (1, 2)
    assert g[0, 0] != g[0, 1] and np.all(g != 0)
    assert g[0, 1] == pytest.approx(2 * g[0, 0])


@pytest.mark.parametrize("t", range(2, 17))
def test_default_g_passes_checks(t):
    g = default_g(t)
    assert g.shape == (t - 1, t)
    assert min(check_g(g)) >= 1e-8
    assert np.array_equal(g, default_g(t))


def test_user_g_accepted_and_bad_g_rejected():
    build_layered(LayeredParams(2, 1.0, 1e-3, 1e-2, g=[[1.0, -1.0]]))
    with pytest.raises(ValueError, match="full rank"):
        validate_g([[1.0, 1.0]], 2)
    with pytest.raises(ValueError, match="column subset"):
        validate_g([[0.0, 1.0]], 2)
    with pytest.raises(ValueError, match="column subset"):
        build_layered(LayeredParams(3, 1.0, 1e-3, 1e-2, g=[[1.0, 2.0, 3.0], [2.0, 4.0, 1.0]]))


def test_params_validation():
    with pytest.raises(ValueError):
        LayeredParams(0, 1.0, 0.1)
    with pytest.raises(ValueError):
        LayeredParams(2, -1.0, 0.1)
    with pytest.raises(ValueError):
        LayeredParams(3, 1.0, 0.1, 0.1, g=[[1.0, 2.0]])


def test_shamir_rows():
    code = build_shamir_real(3, 2, [1.0, 2.0, 3.0], noise_variance=4.0)
    assert np.array_equal(code.v, [[1, 2, 2], [1, 4, 8], [1, 6, 18]])
    with pytest.raises(ValueError):
        build_shamir_real(3, 1, [1.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        build_shamir_real(2, 1, [0.0, 1.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10**6))
def test_lagrange_reproduces_polynomials(deg, seed):
    rng = np.random.default_rng(seed)
    pts = np.arange(1, deg + 2, dtype=float)
    coef = rng.standard_normal(deg + 1)
    vals = np.polynomial.polynomial.polyval(pts, coef)
    assert lagrange_at_zero(pts) @ vals == pytest.approx(coef[0], abs=1e-8 * np.abs(coef).sum() * 10**deg)


def test_shamir_2t_plus_1_interpolates_product():
    t = 2
    pts = np.arange(1, 2 * t + 2, dtype=float)
    code = build_shamir_real(2 * t + 1, t, pts)
    rng = np.random.default_rng(0)
    n = 10**4
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    gam = code.v @ np.vstack([a, rng.standard_normal((t, n))])
    the = code.w @ np.vstack([b, rng.standard_normal((t, n))])
    est = lagrange_at_zero(pts) @ (gam * the)
    assert np.max(np.abs(est - a * b) / np.maximum(np.abs(a * b), 1.0)) <= 1e-9


def test_shamir_privacy_vanishes_with_noise():
    snrs = [snr_p(build_shamir_real(3, 1, [1.0, 2.0, 3.0], s2), 1).snr_p for s2 in (1.0, 1e2, 1e4)]
    assert snrs[0] > snrs[1] > snrs[2]
    assert snrs[2] < 1e-3


def test_iid_baseline_structure():
    code = build_iid_baseline(3, 1.0)
    assert np.array_equal(code.v[:, 1:], np.eye(3))
    assert all(s == NoiseSpec.staircase(1.0) for s in code.noise_a)
    assert snr_a(build_iid_baseline(3, 30.0)).lmse < 1e-6


@pytest.mark.parametrize("s2", sorted(BASELINE1))
def test_baseline1_against_high_precision(s2):
    pair, mse = BASELINE1[s2]
    assert baseline1_pair_snr(s2) == pytest.approx(pair, rel=1e-12)
    assert baseline1_mse(s2) == pytest.approx(mse, rel=1e-12)


def test_baseline1_pair_snr_closed_form():
    # the worst pair sees 4 eta / sigma^2 for every sigma^2
    for s2 in np.geomspace(1e-3, 1e3, 13):
        assert baseline1_pair_snr(s2, 1.5) == pytest.approx(6.0 / s2, rel=1e-9)


def test_baseline1_epsilon_limits():
    eps = [baseline1_epsilon_lower(s2) for s2 in (1e-3, 1.0, 1e3)]
    assert eps[0] > eps[1] > eps[2] > 0
    assert baseline1_epsilon_lower(1e-6) > 20
    assert baseline1_epsilon_lower(1.0) == pytest.approx(epsilon_from_variance(0.25), rel=1e-12)
    with pytest.raises(ValueError):
        baseline1_epsilon_lower(0.0)


def _codes():
    rng = np.random.default_rng(5)
    yield random_code(rng, 4)
    yield build_layered(LayeredParams(3, 0.7, 1e-4, 1e-3), noise="staircase", eta=1.3)
    yield build_shamir_real(5, 2)
    yield build_iid_baseline(3, 0.4)


@pytest.mark.parametrize("code", list(_codes()))
def test_json_round_trip_bit_exact(code):
    doc = json.loads(code.to_json())
    for key in ("n_nodes", "eta", "a", "b", "v", "w", "noise_specs_a", "noise_specs_b"):
        assert key in doc
    back = LinearCode.from_json(code.to_json())
    assert back == code
    assert np.array_equal(back.v, code.v) and np.array_equal(back.w, code.w)
    assert back.to_json() == code.to_json()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_json_round_trip_random(seed, n):
    code = random_code(np.random.default_rng(seed), n)
    back = LinearCode.from_dict(json.loads(json.dumps(code.to_dict())))
    assert back == code
    assert [s.variance() for s in back.noise_b] == [s.variance() for s in code.noise_b]


def test_from_dict_rejects_inconsistent_documents():
    doc = build_shamir_real(3, 1).to_dict()
    doc["a"] = [2.0, 1.0, 1.0]
    with pytest.raises(ValueError):
        LinearCode.from_dict(doc)
    doc = build_shamir_real(3, 1).to_dict()
    doc["noise_specs_a"] = []
    with pytest.raises(ValueError):
        LinearCode.from_dict(doc)


def test_code_is_immutable():
    code = build_shamir_real(3, 1)
    with pytest.raises(ValueError):
        code.v[0, 0] = 5.0
    assert math.isclose(code.a[0], 1.0)

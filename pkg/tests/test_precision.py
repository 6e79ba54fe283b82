import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dpsecmul.precision import (
    QuantizerConfig,
    evaluate_bits,
    layered_limit_mse,
    layered_setup,
    min_bits,
    precision_sweep,
    quantize,
    shamir_setup,
    slope_estimate,
)


def test_quantizer_config():
    cfg = QuantizerConfig(3, 4.0)
    assert cfg.step == 1.0
    d = cfg.dither(np.random.default_rng(0), 10**5)
    assert d.min() >= -0.5 and d.max() <= 0.5
    for bad in (dict(bits=0, range=1.0), dict(bits=4, range=0.0), dict(bits=4, range=1.0, mode="additive")):
        with pytest.raises(ValueError):
            QuantizerConfig(**bad)


def test_quantize_rounding_example():
    cfg = QuantizerConfig(3, 4.0)
    q, over = quantize(0.4, cfg, 0.0)
    assert q == 0.0 and not over


def test_quantize_overload_flag():
    cfg = QuantizerConfig(4, 1.0)
    q, over = quantize(np.array([0.5, 3.0, -2.0]), cfg, np.zeros(3))
    assert list(over) == [False, True, True]
    assert abs(q[1] - 1.0) <= cfg.step / 2 and abs(q[2] + 1.0) <= cfg.step / 2


def test_error_is_uniform_and_independent():
    cfg = QuantizerConfig(6, 6.0)
    rng = np.random.default_rng(1)
    n = 10**6
    x = rng.standard_normal(n)
    q, over = quantize(x, cfg, cfg.dither(rng, n))
    assert not over.any()
    err = q - x
    assert np.abs(err).max() <= cfg.step / 2 * (1 + 1e-12)
    assert np.var(err) == pytest.approx(cfg.step**2 / 12, rel=0.01)
    assert abs(np.corrcoef(err, x)[0, 1]) <= 3 / math.sqrt(n)
    # uniform on the cell: each quarter of the cell holds a quarter of the errors
    counts = np.histogram(err, bins=4, range=(-cfg.step / 2, cfg.step / 2))[0] / n
    assert np.all(np.abs(counts - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / n))


@given(st.integers(2, 30), st.floats(-0.99, 0.99), st.floats(-0.5, 0.5))
def test_error_bounded_property(bits, x, u):
    cfg = QuantizerConfig(bits, 1.0)
    q, _ = quantize(x, cfg, u * cfg.step)
    assert abs(q - x) <= cfg.step / 2 * (1 + 1e-9)


def test_more_bits_converge_to_exact():
    s = shamir_setup(1)
    errs = [evaluate_bits(s, m, 10**5, 0).mse for m in (8, 16, 24)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-6


def test_layered_setup_hits_half_delta():
    for delta in (2.0**-4, 2.0**-10):
        s = layered_setup(1, delta)
        assert s.exact_mse - s.reference_mse == pytest.approx(delta / 2, rel=1e-6)
        assert s.reference_mse == layered_limit_mse(1.0, 1.0) == 0.25


def test_layered_setup_t2():
    s = layered_setup(2, 2.0**-8)
    assert s.exact_mse - s.reference_mse == pytest.approx(2.0**-9, rel=1e-6)
    assert s.code.layered.alpha2 == pytest.approx(s.code.layered.alpha1 ** (2 / 3))


def test_min_bits_trivial_target():
    # the interpolating weights (3, -3, 1) amplify quantization error, so a few bits are still needed
    assert min_bits(shamir_setup(1), 4.0, seed=0, n=10**4).min_bits <= 8
    assert min_bits(layered_setup(1, 4.0), 4.0, seed=0, n=10**4).min_bits <= 8


def test_min_bits_monotone_in_delta():
    curve = precision_sweep("shamir", 1, [2.0**-2, 2.0**-6, 2.0**-10], seed=1)
    bits = [p.min_bits for p in curve]
    assert bits == sorted(bits)
    assert all(p.mse + 3 * p.stderr <= p.delta for p in curve)


def test_sweep_validation():
    with pytest.raises(ValueError):
        precision_sweep("shamir", 1, [0.1, 0.2])
    with pytest.raises(ValueError):
        precision_sweep("bgw", 1, [0.1])


@pytest.mark.parametrize("slope", [0.5, 1.5])
def test_slope_on_synthetic_curve(slope):
    deltas = 2.0 ** -np.arange(4, 16, 2)
    curve = [(d, slope * math.log2(1 / d) + 3.0) for d in deltas]
    s, se = slope_estimate(curve)
    assert s == pytest.approx(slope, abs=1e-6)
    assert se <= 1e-9


def test_slope_needs_span():
    with pytest.raises(ValueError):
        slope_estimate([(0.1, 1), (0.05, 2), (0.02, 3), (0.01, 4)])
    with pytest.raises(ValueError):
        slope_estimate([(1e-1, 1), (1e-5, 2), (1e-6, 3)])


@pytest.mark.parametrize("k", [32, 40, 48])
def test_shamir_bits_rule_with_margin(k):
    # M = 0.75 log2(1/delta) already meets the target once delta is small
    delta = 2.0**-k
    ev = evaluate_bits(shamir_setup(1), math.ceil(0.75 * k), 10**5, seed=k)
    assert ev.mse + 3 * ev.stderr <= delta

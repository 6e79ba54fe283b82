import numpy as np
import pytest

from dpsecmul.accuracy import snr_a
from dpsecmul.estimation import snr_from_cov, CovariancePair
from dpsecmul.matrix_ext import MatrixDims, matrix_cov_identity_check, matrix_product_cov, simulate_matrix_lmse
from dpsecmul.montecarlo import DataLaw, simulate_lmse
from dpsecmul.schemes import LayeredParams, build_iid_baseline, build_layered, random_code


@pytest.fixture
def layered():
    return build_layered(LayeredParams(2, 1.0, 1e-2, 1e-2 ** (2 / 3)))


def test_dims_validation():
    with pytest.raises(ValueError):
        MatrixDims(0, 1, 1)


@pytest.mark.parametrize("l", [1, 2, 5])
def test_identity_layered(layered, l):  # noqa: E741
    assert matrix_cov_identity_check(layered, l)["max_rel_err"] <= 1e-12


def test_identity_iid_and_random():
    assert matrix_cov_identity_check(build_iid_baseline(3, 1.0), 2)["max_rel_err"] <= 1e-12
    assert matrix_cov_identity_check(random_code(np.random.default_rng(0), 4), 3)["max_rel_err"] <= 1e-12
    with pytest.raises(ValueError):
        matrix_cov_identity_check(build_iid_baseline(3, 1.0), 0)


def test_snr_unchanged_by_scaling(layered):
    k1, k2 = matrix_product_cov(layered, 4)
    assert snr_from_cov(CovariancePair(k1, k2)) == pytest.approx(snr_a(layered).snr_a, rel=1e-9)


def test_scalar_case_is_simulate_lmse(layered):
    d = snr_a(layered).decoder_weights
    mat = simulate_matrix_lmse(layered, MatrixDims(1, 1, 1), d, n=10**5, seed=3)
    scalar = simulate_lmse(layered, d, n=10**5, seed=3)
    assert mat.worst.mse == pytest.approx(scalar.mse, rel=0.05)
    assert abs(mat.worst.mse - snr_a(layered).lmse) <= 3 * mat.worst.stderr


def test_entry_mse_scales_with_inner_dimension(layered):
    rep = snr_a(layered)
    res = simulate_matrix_lmse(layered, MatrixDims(2, 3, 2), rep.decoder_weights, n=2 * 10**5, seed=1)
    assert res.entry_mse.shape == (2, 2)
    hits = np.abs(res.entry_mse - 3 * rep.lmse) <= 3 * res.entry_stderr
    assert hits.sum() >= 3
    # normalised by the output power l * eta^2, each entry matches the scalar LMSE / eta^2
    assert np.allclose(res.entry_mse / (3 * layered.eta**2), rep.lmse / layered.eta**2, rtol=0.02)


def test_weaker_entries(layered):
    rep = snr_a(layered)
    res = simulate_matrix_lmse(layered, MatrixDims(2, 2, 2), rep.decoder_weights, DataLaw("gaussian", 0.6),
                               n=10**5, seed=2)
    assert res.worst.mse <= 2 * rep.lmse + 3 * res.worst.stderr


def test_reproducible(layered):
    d = snr_a(layered).decoder_weights
    a = simulate_matrix_lmse(layered, MatrixDims(2, 2, 2), d, n=10**4, seed=5)
    b = simulate_matrix_lmse(layered, MatrixDims(2, 2, 2), d, n=10**4, seed=5, workers=2)
    assert a.worst == b.worst
    assert np.array_equal(a.entry_mse, b.entry_mse)

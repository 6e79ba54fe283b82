"""Entrywise extension of a scalar code to a matrix product ``A @ B``.

Every entry of ``A`` (``m x l``) and of ``B`` (``l x k``) is encoded with the
scalar code, using fresh noise per entry. Node ``i`` multiplies its two
encoded matrices, and the scalar decoder weights combine the node outputs
entry by entry. With i.i.d. data entries, each output covariance is the
scalar one times ``l``. So the accuracy SNR is unchanged while the signal
power of an output entry is ``l * eta^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .accuracy import product_cov
from .distributions import sample
from .montecarlo import DataLaw, SimResult, run_blocks_moments
from .schemes import LinearCode


@dataclass(frozen=True)
class MatrixDims:
    """``A`` is ``m x l`` and ``B`` is ``l x k``."""

    m: int
    l: int  # noqa: E741
    k: int

    def __post_init__(self):
        if min(self.m, self.l, self.k) < 1:
            raise ValueError("matrix dimensions must be at least 1")


@dataclass(frozen=True)
class MatrixSimResult:
    worst: SimResult
    entry_mse: np.ndarray
    entry_stderr: np.ndarray


def _encode(coeffs, data, specs, rng):
    # coeffs: (N, 1+m); data: (size, r, c) -> (N, size, r, c)
    out = coeffs[:, 0, None, None, None] * data[None]
    for j, spec in enumerate(specs, start=1):
        out = out + coeffs[:, j, None, None, None] * sample(spec, rng, data.shape)[None]
    return out


def _matrix_kernel(args, rng, size):
    code, decoder, law, dims = args
    a = law.sample(rng, (size, dims.m, dims.l))
    b = law.sample(rng, (size, dims.l, dims.k))
    gam = _encode(code.v, a, code.noise_a, rng)
    the = _encode(code.w, b, code.noise_b, rng)
    est = np.einsum("i,isml,islk->smk", decoder, gam, the)
    return (est - a @ b) ** 2


def simulate_matrix_lmse(code: LinearCode, dims: MatrixDims, decoder, law: DataLaw | None = None,
                         n: int = 10**5, seed: int = 0, workers: int = 1) -> MatrixSimResult:
    """Per-entry Monte Carlo MSE of the entrywise scheme.

    Returns the worst entry as a :class:`SimResult`, plus the full per-entry
    arrays.
    """
    law = law or DataLaw("gaussian", code.eta)
    d = np.asarray(decoder, dtype=float)
    n, mean, var = run_blocks_moments(_matrix_kernel, (code, d, law, dims), n, seed, workers)
    se = np.sqrt(var / n)
    idx = np.unravel_index(int(np.argmax(mean)), mean.shape)
    worst = SimResult(float(mean[idx]), float(se[idx]), n, seed)
    return MatrixSimResult(worst, mean, se)


def matrix_product_cov(code: LinearCode, l: int):  # noqa: E741
    """Output covariances of the matrix scheme for one output entry.

    Each encoded row ``Gamma_i[m, :]`` has covariance ``G_A[i, j] I_l`` against
    ``Gamma_j[m, :]``, and likewise for ``B``. Entry ``(i, j)`` of ``K1`` is
    then the trace of the product of the two ``l x l`` blocks.
    """
    vb, wb = code.normalized("A"), code.normalized("B")
    ga, gb = vb @ vb.T, wb @ wb.T
    eye = np.eye(l)
    n = code.n_nodes
    k1 = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            k1[i, j] = np.sum((ga[i, j] * eye) * (gb[i, j] * eye))
    c = code.a * code.b
    signal_power = l * code.eta**2
    return k1, k1 - signal_power * np.outer(c, c)


def matrix_cov_identity_check(code: LinearCode, l: int) -> dict:  # noqa: E741
    """Largest relative deviation from ``K = l * Kbar`` for both covariances."""
    if l < 1:
        raise ValueError("l must be at least 1")
    k1, k2 = matrix_product_cov(code, l)
    bar = product_cov(code)
    errs = []
    for big, small in ((k1, bar.k1), (k2, bar.k2)):
        ref = l * small
        errs.append(float(np.max(np.abs(big - ref)) / max(np.abs(ref).max(), 1e-300)))
    return {"max_rel_err": max(errs)}

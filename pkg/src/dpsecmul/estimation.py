"""Linear MMSE kernel.

For an observation ``y = nu * X + Z`` with zero-mean scalar ``X`` of power
``gamma^2`` and noise covariance ``K2``, the best linear estimate of ``X``
has SNR ``det(K1) / det(K2) - 1`` with ``K1 = K2 + gamma^2 nu nu^T`` and
MSE ``gamma^2 / (1 + SNR)``.

Two routes compute the SNR:

* :func:`snr_from_cov` works from the covariance pair through Cholesky
  log-determinants;
* :func:`snr_from_factor` works from a square-root factor ``F`` of the noise
  covariance (``K2 = F F^T``) and the signal vector ``s = gamma nu``. It uses
  the matrix determinant lemma ``det(K2 + s s^T) / det(K2) = 1 + s^T K2^{-1} s``,
  evaluated through an SVD of ``F``. Working with ``F`` instead of ``F F^T``
  squares-roots the condition number, which matters for codes whose rows
  differ only at the 1e-5 level.

An infinite SNR (noise that cannot mask the signal) is returned as ``math.inf``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

PSD_RTOL = 1e-10
SVD_RTOL = 1e-14
RANGE_RTOL = 1e-9
SINGULAR_RTOL = 1e-15


class DegenerateWarning(RuntimeWarning):
    """Emitted when a covariance is singular and a minimum-norm answer is used."""


@dataclass(frozen=True)
class CovariancePair:
    """Second moments of observations with (``k1``) and without (``k2``) the signal."""

    k1: np.ndarray
    k2: np.ndarray

    def __post_init__(self):
        k1 = np.atleast_2d(np.asarray(self.k1, dtype=float))
        k2 = np.atleast_2d(np.asarray(self.k2, dtype=float))
        if k1.shape != k2.shape or k1.shape[0] != k1.shape[1]:
            raise ValueError(f"expected two square matrices of equal size, got {k1.shape}, {k2.shape}")
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "k2", k2)

    @property
    def n(self) -> int:
        return self.k1.shape[0]

    def check(self, rtol: float = 1e-12) -> None:
        """Raise ``ValueError`` unless the pair is symmetric with PSD ``k2`` and ``k1 - k2``."""
        for name, k in (("k1", self.k1), ("k2", self.k2)):
            scale = max(np.abs(k).max(), 1e-300)
            if np.abs(k - k.T).max() > rtol * scale:
                raise ValueError(f"{name} is not symmetric")
        for name, k in (("k2", self.k2), ("k1 - k2", self.k1 - self.k2)):
            ev = np.linalg.eigvalsh(k)
            if ev.size and ev[0] < -PSD_RTOL * max(abs(np.trace(self.k1)), 1e-300):
                raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {ev[0]:.3e})")


def _logdet_pd(k):
    """Log-determinant via Cholesky; ``None`` if ``k`` is not numerically PD."""
    try:
        c = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        return None
    d = np.diag(c)
    # pivots this small mean the matrix is singular to working precision
    if d.size and d.min() ** 2 <= SINGULAR_RTOL * d.max() ** 2:
        return None
    return 2.0 * float(np.sum(np.log(d)))


def snr_from_cov(cov: CovariancePair) -> float:
    """SNR ``det(k1)/det(k2) - 1`` from a covariance pair.

    Parameters
    ----------
    cov : CovariancePair

    Returns
    -------
    float
        Non-negative SNR, or ``math.inf`` when ``k2`` is singular and the
        signal has energy in its null space.
    """
    k1, k2 = cov.k1, cov.k2
    if cov.n == 0:
        return 0.0
    ld2 = _logdet_pd(k2)
    if ld2 is not None:
        ld1 = _logdet_pd(k1)
        if ld1 is None:
            raise ValueError("k1 is not positive definite while k2 is")
        return max(math.expm1(ld1 - ld2), 0.0)

    # k2 singular: split into its range and null space
    ev, vec = np.linalg.eigh(k2)
    scale = max(abs(np.trace(k1)), 1e-300)
    if ev[0] < -PSD_RTOL * scale:
        raise ValueError("k2 is not positive semidefinite")
    keep = ev > PSD_RTOL * scale
    null = vec[:, ~keep]
    leak = null.T @ (k1 - k2) @ null
    if np.abs(leak).max() > PSD_RTOL * scale:
        return math.inf
    rng_ = vec[:, keep]
    if rng_.shape[1] == 0:
        return 0.0
    return snr_from_cov(CovariancePair(rng_.T @ k1 @ rng_, rng_.T @ k2 @ rng_))


def snr_from_factor(signal, noise_factor) -> float:
    """SNR ``s^T (F F^T)^{-1} s`` for noise covariance ``F F^T``.

    Parameters
    ----------
    signal : array_like, shape (n,)
        Signal vector ``s``; the signal part of the covariance is ``s s^T``.
    noise_factor : array_like, shape (n, m)
        Square-root factor of the noise covariance.

    Returns
    -------
    float
        ``math.inf`` if ``s`` has a component outside the column space of ``F``.
    """
    s = np.asarray(signal, dtype=float).ravel()
    f = np.asarray(noise_factor, dtype=float).reshape(s.size, -1)
    s_norm = float(np.linalg.norm(s))
    if s_norm == 0.0:
        return 0.0
    if f.shape[1] == 0 or not np.any(f):
        return math.inf
    u, sv, _ = np.linalg.svd(f, full_matrices=True)
    rank = int(np.sum(sv > SVD_RTOL * sv[0]))
    proj = u.T @ s
    if np.linalg.norm(proj[rank:]) > RANGE_RTOL * s_norm:
        return math.inf
    return float(np.sum((proj[:rank] / sv[:rank]) ** 2))


def lmmse_weights(k1, cross) -> np.ndarray:
    """Solve ``k1 @ w = cross`` for the optimal linear weights.

    A singular ``k1`` falls back to the minimum-norm least-squares solution and
    emits :class:`DegenerateWarning`.
    """
    k1 = np.atleast_2d(np.asarray(k1, dtype=float))
    cross = np.asarray(cross, dtype=float).ravel()
    if k1.shape != (cross.size, cross.size):
        raise ValueError(f"shape mismatch: k1 {k1.shape}, cross {cross.shape}")
    if not np.any(cross):
        return np.zeros_like(cross)
    try:
        cho = scipy.linalg.cho_factor(k1, lower=True)
        d = np.abs(np.diag(cho[0]))
        if d.min() ** 2 > SINGULAR_RTOL * d.max() ** 2:
            return scipy.linalg.cho_solve(cho, cross)
    except np.linalg.LinAlgError:
        pass
    warnings.warn("singular k1: using minimum-norm weights", DegenerateWarning, stacklevel=2)
    return np.linalg.lstsq(k1, cross, rcond=None)[0]


def mse_from_snr(signal_power: float, snr: float) -> float:
    """MSE ``signal_power / (1 + snr)``; an infinite SNR gives 0."""
    if signal_power <= 0:
        raise ValueError("signal_power must be positive")
    if math.isinf(snr):
        return 0.0
    return signal_power / (1.0 + snr)

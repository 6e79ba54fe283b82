"""Decoding accuracy of a code and the converse bounds.

With the data and every noise term scaled to unit variance, the product
returned by node ``i`` is ``(vbar_i kron wbar_i) . z``. The vector
``z = u kron s`` collects products of A-side and B-side unit variables and
has identity covariance, because the two families are independent. Call
``P`` the matrix with rows ``vbar_i kron wbar_i``. A linear decoder ``d`` then
has MSE ``||P^T d - eta e_0||^2``. Reshaped to a matrix, that residual is the
error operator returned by :func:`delta_matrix`. Hence ``K1 = P P^T`` and the
accuracy SNR is ``s^T (Q Q^T)^{-1} s``. Here ``s = P[:, 0]`` and ``Q`` is ``P``
without its first column.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .estimation import CovariancePair, snr_from_factor
from .privacy import snr_p, subset_snr
from .schemes import LinearCode


@dataclass
class AccuracyReport:
    snr_a: float
    lmse: float
    decoder_weights: np.ndarray

    def to_dict(self) -> dict:
        return {
            "snr_a": "inf" if math.isinf(self.snr_a) else self.snr_a,
            "lmse": self.lmse,
            "decoder_weights": np.asarray(self.decoder_weights).tolist(),
        }


def product_factor(code: LinearCode) -> np.ndarray:
    """Rows ``vbar_i kron wbar_i``; column 0 carries the product of the inputs."""
    vb = code.normalized("A")
    wb = code.normalized("B")
    return np.einsum("ij,ik->ijk", vb, wb).reshape(code.n_nodes, -1)


def product_cov(code: LinearCode) -> CovariancePair:
    """Exact second moments of the node outputs with and without the signal."""
    vb = code.normalized("A")
    wb = code.normalized("B")
    k1 = (vb @ vb.T) * (wb @ wb.T)
    c = code.a * code.b * code.eta
    return CovariancePair(k1, k1 - np.outer(c, c))


def decoder_mse(code: LinearCode, decoder) -> float:
    """Exact MSE of ``sum_i d_i C_i`` as an estimate of ``AB``."""
    r = product_factor(code).T @ np.asarray(decoder, dtype=float)
    r[0] -= code.eta
    return float(r @ r)


def optimal_decoder(code: LinearCode) -> np.ndarray:
    """Least-squares decoder minimising ``||P^T d - eta e_0||``."""
    p = product_factor(code)
    target = np.zeros(p.shape[1])
    target[0] = code.eta
    return np.linalg.lstsq(p.T, target, rcond=None)[0]


def snr_a(code: LinearCode) -> AccuracyReport:
    """Accuracy SNR, optimal linear decoder and its MSE ``eta^2 / (1 + SNR)``."""
    p = product_factor(code)
    snr = snr_from_factor(p[:, 0], p[:, 1:])
    lmse = 0.0 if math.isinf(snr) else code.eta**2 / (1.0 + snr)
    return AccuracyReport(snr, lmse, optimal_decoder(code))


def analytic_decoder(code: LinearCode) -> np.ndarray:
    """Two-stage decoder for layered codes.

    First combine nodes ``1..t`` with weights ``gamma`` that cancel the
    ``alpha2`` layer (``sum gamma_i g_i = 0``, ``sum gamma_i = 1``). Then mix
    that combination with node ``t+1`` by a two-term linear MMSE fit.
    """
    if code.layered is None:
        raise ValueError("analytic_decoder needs a code built by build_layered")
    params = code.layered.with_default_g()
    t = params.t
    gamma = layered_gamma(params.g, t)
    p = product_factor(code)
    obs = np.vstack([gamma @ p[:t], p[t]])
    target = np.zeros(p.shape[1])
    target[0] = code.eta
    c = np.linalg.lstsq(obs.T, target, rcond=None)[0]
    return np.concatenate([c[0] * gamma, [c[1]]])


def layered_gamma(g, t: int) -> np.ndarray:
    """Weights summing to one that annihilate every row of ``g``."""
    if t == 1:
        return np.ones(1)
    m = np.vstack([np.ones(t), np.asarray(g, dtype=float)])
    rhs = np.zeros(t)
    rhs[0] = 1.0
    return np.linalg.solve(m, rhs)


@dataclass
class ConverseRecord:
    lhs: float
    rhs: float
    holds: bool
    worst_split: tuple
    snr_p: float
    snr_p_rhs: float
    snr_p_holds: bool

    def to_dict(self) -> dict:
        f = lambda v: "inf" if math.isinf(v) else v  # noqa: E731
        return {
            "lhs": f(self.lhs),
            "rhs": f(self.rhs),
            "holds": self.holds,
            "worst_split": [list(self.worst_split[0]), list(self.worst_split[1])],
            "snr_p": f(self.snr_p),
            "snr_p_rhs": f(self.snr_p_rhs),
            "snr_p_holds": self.snr_p_holds,
        }


def _le(lhs, rhs, rtol):
    if math.isinf(rhs):
        return True
    return lhs <= rhs * (1.0 + rtol)


def converse_check(code: LinearCode, t: int, rtol: float = 1e-9) -> ConverseRecord:
    """Compare ``1 + SNR_a`` with the split bound and with ``(1 + SNR_p)^2``.

    The split bound is the minimum over ``t``-subsets ``S`` of
    ``(1 + SNR_S^A)(1 + SNR_{S^c}^B)`` and of the same with A and B swapped.
    Among minimisers the lexicographically smallest split wins.
    """
    n = code.n_nodes
    if n > 2 * t:
        raise ValueError(f"converse needs N <= 2t, got N={n}, t={t}")
    if t > n:
        raise ValueError(f"need t <= N, got t={t}, N={n}")
    lhs = 1.0 + snr_a(code).snr_a
    rhs, split = math.inf, None
    nodes = range(n)
    for s in itertools.combinations(nodes, t):
        sc = tuple(i for i in nodes if i not in s)
        for x, y in (("A", "B"), ("B", "A")):
            val = (1.0 + subset_snr(code, s, x)) * (1.0 + subset_snr(code, sc, y))
            if split is None or val < rhs:
                rhs, split = val, (s, sc)
    sp = snr_p(code, t).snr_p
    t3 = (1.0 + sp) ** 2
    return ConverseRecord(lhs, rhs, _le(lhs, rhs, rtol), split, sp, t3, _le(lhs, t3, rtol))


@dataclass
class NullVector:
    vector: np.ndarray
    ratio: float
    infinite: bool


def null_vector(code: LinearCode, subset, side: str) -> NullVector:
    """Vector orthogonal to a coalition's normalized rows, closest to ``e_1``.

    ``lambda = e_1 - proj(e_1)`` onto the span of the rows. When ``e_1`` lies in
    that span the coalition recovers the input exactly; a unit vector of the
    orthogonal complement is returned instead and ``infinite`` is set.
    """
    rows = code.normalized(side)[sorted(subset)]
    dim = rows.shape[1]
    e1 = np.zeros(dim)
    e1[0] = 1.0
    if rows.shape[0] == 0:
        return NullVector(e1, 1.0, False)
    u, sv, _ = np.linalg.svd(rows.T, full_matrices=True)
    rank = int(np.sum(sv > 1e-14 * max(sv[0], 1e-300)))
    lam = e1 - u[:, :rank] @ (u[:, :rank].T @ e1)
    norm2 = float(lam @ lam)
    if norm2 <= 1e-24:
        if rank >= dim:
            raise ValueError("rows span the whole space; no null vector exists")
        return NullVector(u[:, rank], 0.0, True)
    return NullVector(lam, lam[0] ** 2 / norm2, False)


def delta_matrix(code: LinearCode, decoder) -> np.ndarray:
    """Error operator ``sum_i d_i vbar_i wbar_i^T - eta e_1 e_1^T``."""
    d = np.asarray(decoder, dtype=float)
    delta = np.einsum("i,ij,ik->jk", d, code.normalized("A"), code.normalized("B"))
    delta[0, 0] -= code.eta
    return delta


SWEEP_COLUMNS = ("t", "N", "x", "alpha1", "alpha2", "snr_p", "snr_a", "lmse", "gap")


def sweep_row(code: LinearCode, t: int) -> dict:
    """Summary row for a layered code; ``gap`` is ``(1 + snr_p)^2 - (1 + snr_a)``."""
    p = code.layered
    sp = snr_p(code, t).snr_p
    rep = snr_a(code)
    return {
        "t": t,
        "N": code.n_nodes,
        "x": None if p is None else p.x,
        "alpha1": None if p is None else p.alpha1,
        "alpha2": None if p is None else p.alpha2,
        "snr_p": sp,
        "snr_a": rep.snr_a,
        "lmse": rep.lmse,
        "gap": (1 + sp) ** 2 - (1 + rep.snr_a),
    }

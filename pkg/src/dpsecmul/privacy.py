"""What a coalition of ``t`` nodes learns about either input.

For a subset ``S`` the coalition sees ``a_S A + V_S R``. The best linear
estimate of ``A`` from that view has SNR ``eta * a_S^T (V_S D V_S^T)^{-1} a_S``.
Here ``D`` holds the noise variances. This equals the determinant ratio
``det(K_A + K_R) / det(K_R) - 1``. The privacy SNR of a code is the worst
case over subsets and both inputs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .estimation import CovariancePair, snr_from_factor
from .schemes import LayeredParams, LinearCode

MAX_SUBSETS = 100_000


@dataclass
class PrivacyReport:
    snr_p: float
    worst_subset: tuple
    per_subset: dict = field(default_factory=dict)
    dp_epsilon_bound: float | None = None

    def to_dict(self) -> dict:
        return {
            "snr_p": _json_float(self.snr_p),
            "worst_subset": list(self.worst_subset),
            "per_subset": [
                {"subset": list(s), "snr_A": _json_float(a), "snr_B": _json_float(b)}
                for s, (a, b) in sorted(self.per_subset.items())
            ],
            "dp_epsilon_bound": self.dp_epsilon_bound,
        }


def _json_float(v):
    return "inf" if math.isinf(v) else v


def subset_snr(code: LinearCode, subset, side: str) -> float:
    """SNR of the best linear estimate of one input from the nodes in ``subset``."""
    idx = sorted(subset)
    if not idx:
        return 0.0
    rows = code.normalized(side)[idx]
    return snr_from_factor(rows[:, 0], rows[:, 1:])


def subset_cov(code: LinearCode, subset, side: str) -> CovariancePair:
    """Covariance pair of a coalition's view: ``K_A + K_R`` and ``K_R``."""
    rows = code.normalized(side)[sorted(subset)]
    noise = rows[:, 1:] @ rows[:, 1:].T
    return CovariancePair(noise + np.outer(rows[:, 0], rows[:, 0]), noise)


def snr_p(code: LinearCode, t: int) -> PrivacyReport:
    """Worst-case coalition SNR over all ``t``-subsets and both inputs.

    Ties go to the lexicographically smallest subset.
    """
    n = code.n_nodes
    if not 1 <= t <= n:
        raise ValueError(f"need 1 <= t <= N, got t={t}, N={n}")
    if math.comb(n, t) > MAX_SUBSETS:
        raise ValueError(f"{math.comb(n, t)} subsets exceeds the cap of {MAX_SUBSETS}")
    per = {}
    best, worst = -1.0, ()
    for s in itertools.combinations(range(n), t):
        pair = (subset_snr(code, s, "A"), subset_snr(code, s, "B"))
        per[s] = pair
        if max(pair) > best:
            best, worst = max(pair), s
    return PrivacyReport(best, worst, per)


def adversary_mse(code: LinearCode, subset, side: str) -> float:
    """MSE ``eta / (1 + SNR)`` of the best linear coalition estimate."""
    if not list(subset):
        raise ValueError("subset must be nonempty")
    snr = subset_snr(code, subset, side)
    return 0.0 if math.isinf(snr) else code.eta / (1.0 + snr)


def layered_subset_epsilon(params: LayeredParams, subset, epsilon_star: float) -> float:
    """DP parameter of a ``t``-coalition under the layered staircase/Laplace noise.

    Without the last node, the first noise layer masks ``A`` at budget
    ``epsilon_star``. With it, the coalition can strip that layer, leaving
    ``(alpha1 / (alpha2 x)) g'_i A + L_i`` with unit Laplace ``L_i`` and
    ``g' = 1^T G_S^{-1}``, which adds ``sqrt(2) |coefficient|`` per term.
    """
    p = params.with_default_g()
    last = p.t
    s = sorted(subset)
    if last not in s or p.t == 1:
        return float(epsilon_star)
    others = [i for i in s if i != last]
    if p.alpha1 == 0:
        return float(epsilon_star)
    if p.alpha2 == 0:
        return math.inf
    gs = p.g[:, others]
    try:
        gp = np.ones(len(others)) @ np.linalg.inv(gs)
    except np.linalg.LinAlgError:
        return math.inf
    return float(epsilon_star + math.sqrt(2) * np.sum(p.alpha1 * np.abs(gp) / (p.alpha2 * p.x)))


def dp_bound_layered(params: LayeredParams, epsilon_star: float) -> float:
    """Worst-case t-node DP parameter of the layered code with staircase noise."""
    p = params.with_default_g()
    return max(
        layered_subset_epsilon(p, s, epsilon_star)
        for s in itertools.combinations(range(p.t + 1), p.t)
    )


def dp_bound_iid(n_colluders: int, epsilon_per_node: float) -> float:
    """Composition of independent per-node budgets."""
    if n_colluders < 1 or not epsilon_per_node > 0:
        raise ValueError("need a positive count and budget")
    return n_colluders * epsilon_per_node

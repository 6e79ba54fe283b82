"""Named experiments: each returns output rows plus a list of named checks."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import accuracy, privacy
from .distributions import sigma_star_sq
from .matrix_ext import MatrixDims, matrix_cov_identity_check, simulate_matrix_lmse
from .precision import precision_sweep, slope_estimate
from .schemes import (
    LayeredParams,
    LinearCode,
    baseline1_epsilon_lower,
    baseline1_mse,
    build_iid_baseline,
    build_layered,
    random_code,
)

DEFAULTS = {
    "tradeoff": {
        "eta": 1.0,
        "t": 2,
        "eps_min": 0.2,
        "eps_max": 8.0,
        "eps_points": 20,
        "sigma_sq_min": 0.01,
        "sigma_sq_max": 100.0,
        "sigma_sq_points": 20,
    },
    "gap": {"eta": 1.0, "t": [2, 3, 4], "n_grid": [10, 100, 1000, 10000], "snr_target": 1.0},
    "converse": {"n_codes": 1000, "t_min": 1, "t_max": 4, "rtol": 1e-9},
    "precision": {
        "eta": 1.0,
        "x": 1.0,
        "t": 1,
        "deltas": [2.0**-k for k in range(4, 15, 2)],
        "shamir_slope": [0.3, 0.7],
        "layered_slope": [1.2, 1.8],
    },
    "matrix": {
        "eta": 1.0,
        "x": 1.0,
        "t": 2,
        "alpha1": 0.01,
        "dims": [3, 3, 3],
        "samples": 10**6,
        "identity_l": 5,
    },
}


@dataclass
class Outcome:
    """Result of one experiment."""

    columns: tuple
    rows: list
    checks: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def parse_value(text: str):
    """Parse ``1``, ``0.5``, ``2**-4`` style scalars or comma-separated lists of them."""
    text = text.strip()
    if "," in text:
        return [parse_value(p) for p in text.split(",") if p.strip()]
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if "**" in text:
        base, exp = text.split("**", 1)
        return float(base) ** float(exp)
    raise ValueError(f"cannot parse value {text!r}")


def resolve(experiment: str, overrides: dict) -> dict:
    """Merge ``overrides`` into the defaults of ``experiment``, rejecting unknown keys."""
    if experiment not in DEFAULTS:
        raise KeyError(f"unknown experiment {experiment!r}")
    cfg = dict(DEFAULTS[experiment])
    unknown = sorted(set(overrides) - set(cfg))
    if unknown:
        raise KeyError(f"unknown config keys for {experiment}: {', '.join(unknown)}")
    for k, v in overrides.items():
        cfg[k] = parse_value(v) if isinstance(v, str) else v
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


# -- experiments -------------------------------------------------------------------


def optimal_limit_mse(epsilon: float, eta: float) -> float:
    s = sigma_star_sq(epsilon)
    return eta**2 * s**2 / (eta + s) ** 2


def run_tradeoff(cfg: dict, seed: int = 0, workers: int = 1) -> Outcome:
    """Optimal limit, i.i.d. staircase baseline and complex Shamir baseline."""
    eta, t = float(cfg["eta"]), int(cfg["t"])
    n_nodes = t + 1
    eps = np.geomspace(cfg["eps_min"], cfg["eps_max"], int(cfg["eps_points"]))
    rows, ordered = [], True
    for e in eps:
        opt = optimal_limit_mse(e, eta)
        iid = accuracy.snr_a(build_iid_baseline(n_nodes, e / t, eta)).lmse
        ordered &= opt <= iid
        rows.append(("optimal", float(e), opt))
        rows.append(("iid_staircase", float(e), iid))
    worse = True
    for s2 in np.geomspace(cfg["sigma_sq_min"], cfg["sigma_sq_max"], int(cfg["sigma_sq_points"])):
        e_bar = baseline1_epsilon_lower(s2, eta)
        mse = baseline1_mse(s2, eta)
        worse &= optimal_limit_mse(e_bar, eta) <= mse
        rows.append(("complex_shamir", e_bar, mse))
    checks = {"optimal_below_iid": bool(ordered), "complex_shamir_above_optimal": bool(worse)}
    return Outcome(("curve", "epsilon", "mse"), rows, checks)


def gap_row(t: int, n: float, eta: float, snr_target: float = 1.0) -> tuple:
    x = math.sqrt(eta / snr_target)
    a1 = 1.0 / n
    a2 = a1 * math.log(1.0 / a1)
    code = build_layered(LayeredParams(t, x, a1, a2), eta=eta)
    sp = privacy.snr_p(code, t).snr_p
    sa = accuracy.snr_a(code).snr_a
    return (t, n, sp, sa, (1 + snr_target) ** 2 - (1 + sa), (1 + sp) ** 2 - (1 + sa))


def run_gap(cfg: dict, seed: int = 0, workers: int = 1) -> Outcome:
    """Distance from the optimal trade-off as ``alpha1 = 1/n`` shrinks."""
    eta = float(cfg["eta"])
    rows = [gap_row(int(t), n, eta, float(cfg["snr_target"]))
            for t in _as_list(cfg["t"]) for n in _as_list(cfg["n_grid"])]
    checks = {}
    for t in _as_list(cfg["t"]):
        sub = [r for r in rows if r[0] == int(t)]
        for col, name in ((4, "target"), (5, "actual")):
            vals = [r[col] for r in sub]
            checks[f"t{t}_gap_vs_{name}_decreasing"] = all(b < a for a, b in zip(vals, vals[1:]))
    last = {int(r[0]): r for r in rows if r[1] == max(_as_list(cfg["n_grid"]))}
    if 2 in last:
        checks["t2_final_gap_at_most_1"] = last[2][5] <= 1.0
        if 3 in last:
            checks["t2_final_gap_below_t3"] = last[2][5] < last[3][5]
    return Outcome(("t", "n", "snr_p_actual", "snr_a", "gap_vs_target", "gap_vs_actual"), rows, checks)


def converse_codes(n_codes: int, seed: int, t_min: int = 1, t_max: int = 4):
    """Seeded random codes with ``t <= N <= 2t``; yields ``(t, code)``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for _ in range(n_codes):
        t = int(rng.integers(t_min, t_max + 1))
        n = int(rng.integers(t, 2 * t + 1))
        yield t, random_code(rng, n)


def run_converse(cfg: dict, seed: int = 0, workers: int = 1) -> Outcome:
    """Check ``1 + SNR_a`` against both converse bounds on random codes."""
    rtol = float(cfg["rtol"])
    rows, bad_split, bad_t3, ratios = [], 0, 0, []
    for i, (t, code) in enumerate(converse_codes(int(cfg["n_codes"]), seed, int(cfg["t_min"]), int(cfg["t_max"]))):
        rec = accuracy.converse_check(code, t, rtol)
        bad_split += not rec.holds
        bad_t3 += not rec.snr_p_holds
        ratio = rec.lhs / rec.snr_p_rhs if math.isfinite(rec.snr_p_rhs) else 0.0
        ratios.append(ratio)
        rows.append((i, t, code.n_nodes, rec.lhs, rec.rhs, rec.snr_p_rhs, rec.holds, rec.snr_p_holds))
    q = np.quantile(ratios, [0.5, 0.9, 0.99, 1.0]).tolist() if ratios else []
    summary = {
        "n_codes": len(rows),
        "split_violations": bad_split,
        "snr_p_violations": bad_t3,
        "tightness_quantiles": dict(zip(["q50", "q90", "q99", "max"], q)),
    }
    checks = {"no_split_violations": bad_split == 0, "no_snr_p_violations": bad_t3 == 0}
    cols = ("index", "t", "N", "one_plus_snr_a", "split_bound", "snr_p_bound", "split_holds", "snr_p_holds")
    return Outcome(cols, rows, checks, summary)


def run_precision(cfg: dict, seed: int = 0, workers: int = 1) -> Outcome:
    """Minimum bits per input against the accuracy target for both schemes."""
    t, eta, x = int(cfg["t"]), float(cfg["eta"]), float(cfg["x"])
    deltas = [float(d) for d in _as_list(cfg["deltas"])]
    rows, checks, summary = [], {}, {}
    children = np.random.SeedSequence(seed).spawn(2)
    for (kind, bracket), child in zip((("shamir", cfg["shamir_slope"]), ("layered", cfg["layered_slope"])), children):
        sub_seed = int(child.generate_state(1, np.uint64)[0])
        curve = precision_sweep(kind, t, deltas, eta, x, sub_seed, workers)
        for p in curve:
            rows.append((kind, t, p.delta, p.min_bits, p.overload_rate, p.mse, p.stderr))
        slope, se = slope_estimate(curve)
        rows.append((kind, t, "slope", slope, se, "", ""))
        summary[kind] = {"slope": slope, "stderr": se}
        lo, hi = (float(b) for b in bracket)
        checks[f"{kind}_slope_in_bracket"] = lo <= slope <= hi
        bits = [p.min_bits for p in curve]
        checks[f"{kind}_bits_monotone"] = all(b >= a for a, b in zip(bits, bits[1:]))
    return Outcome(("scheme", "t", "delta", "min_bits", "overload_rate", "mse", "stderr"), rows, checks, summary)


def run_matrix(cfg: dict, seed: int = 0, workers: int = 1) -> Outcome:
    """Entrywise matrix product against the scalar closed form."""
    eta, x, t, a1 = float(cfg["eta"]), float(cfg["x"]), int(cfg["t"]), float(cfg["alpha1"])
    m, l, k = (int(d) for d in cfg["dims"])  # noqa: E741
    code = build_layered(LayeredParams(t, x, a1, a1 ** (2.0 / 3.0) if t > 1 else 0.0), eta=eta)
    rep = accuracy.snr_a(code)
    sim = simulate_matrix_lmse(code, MatrixDims(m, l, k), rep.decoder_weights, n=int(cfg["samples"]),
                               seed=seed, workers=workers).worst
    predicted = l * rep.lmse
    ident = matrix_cov_identity_check(code, int(cfg["identity_l"]))["max_rel_err"]
    checks = {
        "entry_mse_within_3se": abs(sim.mse - predicted) <= 3 * sim.stderr,
        "covariance_identity": ident <= 1e-12,
    }
    rows = [(m, l, k, sim.mse, sim.stderr, rep.lmse, predicted)]
    return Outcome(("m", "l", "k", "entry_mse_max", "stderr", "scalar_lmse", "predicted_entry_mse"), rows, checks,
                   {"identity_max_rel_err": ident})


EXPERIMENTS = {
    "tradeoff": run_tradeoff,
    "gap": run_gap,
    "converse": run_converse,
    "precision": run_precision,
    "matrix": run_matrix,
}


# -- scheme evaluation -----------------------------------------------------------------


def _iid_budgets(code: LinearCode):
    """Per-node staircase budgets when every node has one private staircase coordinate.

    A node holding ``a A + c N`` with ``N`` a staircase of budget ``eps`` and
    scale ``s`` is ``eps``-DP when ``|c| s >= |a|`` (the noise is at least as
    wide as the unit mechanism). Returns ``None`` for any other structure.
    """
    out = []
    for mat, specs in ((code.v, code.noise_a), (code.w, code.noise_b)):
        noise = mat[:, 1:]
        if noise.shape[1] != code.n_nodes or any(s.kind != "staircase" for s in specs):
            return None
        nz = noise != 0
        if np.any(nz.sum(axis=0) != 1) or np.any(nz.sum(axis=1) != 1):
            return None
        for i in range(code.n_nodes):
            j = int(np.flatnonzero(nz[i])[0])
            wide = abs(noise[i, j]) * specs[j].scale >= abs(mat[i, 0])
            out.append(specs[j].epsilon if wide else math.inf)
    return out


def dp_bound_for(code: LinearCode, t: int):
    """Analytic t-node DP parameter for recognised code structures, else ``None``."""
    if code.layered is not None and code.noise_a and code.noise_a[0].kind == "staircase":
        if code.noise_a != code.noise_b or any(s.kind != "laplace" for s in code.noise_a[1:]):
            return None
        spec = code.noise_a[0]
        if not math.isclose(spec.scale, 1.0 / code.layered.x, rel_tol=1e-12):
            return None
        return privacy.dp_bound_layered(code.layered, spec.epsilon)
    budgets = _iid_budgets(code)
    if budgets is not None:
        return t * max(budgets)
    return None


def eval_scheme(code: LinearCode, t: int) -> dict:
    """Privacy, accuracy, DP and (when ``N <= 2t``) converse report for a code."""
    priv = privacy.snr_p(code, t)
    priv.dp_epsilon_bound = dp_bound_for(code, t)
    acc = accuracy.snr_a(code)
    out = {"privacy": priv.to_dict(), "accuracy": acc.to_dict(), "dp_bound": priv.dp_epsilon_bound}
    if priv.dp_epsilon_bound is None:
        out["dp_bound_note"] = "no analytic DP bound for this code structure"
    if code.n_nodes <= 2 * t:
        out["converse"] = accuracy.converse_check(code, t).to_dict()
    else:
        out["converse_note"] = f"converse omitted: N={code.n_nodes} > 2t={2 * t}"
    if code.layered is not None and code.n_nodes == code.layered.t + 1:
        row = accuracy.sweep_row(code, t)
        out["sweep_row"] = {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in row.items()}
    return out

"""Coding schemes for private two-input multiplication.

Node ``i`` receives ``Gamma_i = v_i . [A, R_1..R_mA]`` and
``Theta_i = w_i . [B, S_1..S_mB]`` and returns ``Gamma_i * Theta_i``. A
:class:`LinearCode` stores the coefficient matrices ``v`` and ``w`` (column 0
holds the data coefficients ``a_i``/``b_i``) together with the law of every
noise coordinate. All noise coordinates are independent, and the A-side and
B-side families are independent of each other.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import NoiseSpec, epsilon_from_variance

SV_FLOOR = 1e-8
DEFAULT_G_SEED = 20240101


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LayeredParams:
    """Parameters of the layered construction with ``N = t + 1`` nodes.

    ``g`` is the ``(t-1) x t`` mixing matrix; it is ``None`` when ``t == 1``.
    """

    t: int
    x: float
    alpha1: float
    alpha2: float = 0.0
    g: np.ndarray | None = None

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be at least 1")
        if not self.x > 0:
            raise ValueError("x must be positive")
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError("alpha1 and alpha2 must be non-negative")
        if self.t == 1:
            object.__setattr__(self, "g", None)
        elif self.g is not None:
            g = _frozen(np.atleast_2d(self.g))
            if g.shape != (self.t - 1, self.t):
                raise ValueError(f"g must be {(self.t - 1, self.t)}, got {g.shape}")
            object.__setattr__(self, "g", g)

    def with_default_g(self) -> "LayeredParams":
        if self.t == 1 or self.g is not None:
            return self
        return LayeredParams(self.t, self.x, self.alpha1, self.alpha2, default_g(self.t))


def check_g(g) -> tuple[float, float]:
    """Smallest singular values behind the two nondegeneracy conditions on ``g``.

    Returns
    -------
    (c1, c2) : tuple of float
        ``c1`` is the minimum, over every choice of ``t - 1`` columns, of the
        smallest singular value of that square submatrix. ``c2`` is the
        smallest singular value of ``g`` with a row of ones stacked on top.
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    r, t = g.shape
    c1 = min(
        np.linalg.svd(g[:, list(cols)], compute_uv=False)[-1]
        for cols in itertools.combinations(range(t), r)
    )
    c2 = np.linalg.svd(np.vstack([np.ones(t), g]), compute_uv=False)[-1]
    return float(c1), float(c2)


def validate_g(g, t: int) -> None:
    g = np.atleast_2d(np.asarray(g, dtype=float))
    if g.shape != (t - 1, t):
        raise ValueError(f"g must be {(t - 1, t)}, got {g.shape}")
    c1, c2 = check_g(g)
    if c1 < SV_FLOOR:
        raise ValueError(f"every square column subset must be nonsingular: a (t-1)x(t-1) submatrix of g has singular value {c1:.3e}")
    if c2 < SV_FLOOR:
        raise ValueError(f"[1; g] must have full rank: has singular value {c2:.3e}")


def default_g(t: int, max_retries: int = 100) -> np.ndarray:
    """Deterministic mixing matrix passing both checks in ``validate_g``.

    Columns are ``(i, i^2, ..., i^(t-1))`` for ``i = 1..t`` with each row
    scaled to unit maximum. If that fails the singular-value checks (large
    ``t``), seeded Gaussian matrices are tried instead.
    """
    if t < 2:
        raise ValueError("default_g needs t >= 2")
    nodes = np.arange(1, t + 1, dtype=float)
    g = np.vstack([nodes**k for k in range(1, t)])
    g /= np.abs(g).max(axis=1, keepdims=True)
    rng = np.random.default_rng(DEFAULT_G_SEED + t)
    for _ in range(max_retries + 1):
        if min(check_g(g)) >= SV_FLOOR:
            return _frozen(g)
        g = rng.standard_normal((t - 1, t))
    raise RuntimeError(f"could not find a valid mixing matrix for t={t}")


@dataclass(frozen=True, eq=False)
class LinearCode:
    """A linear coding scheme for one multiplication.

    Attributes
    ----------
    v, w : ndarray, shape (N, 1 + m)
        Row ``i`` is the coefficient vector of node ``i`` over
        ``[data, noise_1, ..., noise_m]``.
    noise_a, noise_b : tuple of NoiseSpec
        Laws of the A-side and B-side noise coordinates.
    eta : float
        Second moment of each data input.
    layered : LayeredParams, optional
        Construction parameters when the code came from :func:`build_layered`.
    """

    v: np.ndarray
    w: np.ndarray
    noise_a: tuple
    noise_b: tuple
    eta: float = 1.0
    layered: LayeredParams | None = field(default=None, compare=False)

    def __post_init__(self):
        v = _frozen(np.atleast_2d(self.v))
        w = _frozen(np.atleast_2d(self.w))
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "noise_a", tuple(self.noise_a))
        object.__setattr__(self, "noise_b", tuple(self.noise_b))
        if v.shape[0] != w.shape[0]:
            raise ValueError("v and w must have one row per node")
        if v.shape[1] != 1 + len(self.noise_a) or w.shape[1] != 1 + len(self.noise_b):
            raise ValueError("noise spec lists must match the noise columns of v and w")
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ValueError("eta must be positive")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise ValueError("code matrices must be finite")

    def __eq__(self, other):
        if not isinstance(other, LinearCode):
            return NotImplemented
        return (np.array_equal(self.v, other.v) and np.array_equal(self.w, other.w)
                and self.noise_a == other.noise_a and self.noise_b == other.noise_b and self.eta == other.eta)

    __hash__ = None

    @property
    def n_nodes(self) -> int:
        return self.v.shape[0]

    @property
    def a(self) -> np.ndarray:
        return self.v[:, 0]

    @property
    def b(self) -> np.ndarray:
        return self.w[:, 0]

    def scales(self, side: str) -> np.ndarray:
        """Standard deviations of ``[data, noise...]`` on one side."""
        specs = self._specs(side)
        return np.sqrt([self.eta] + [s.variance() for s in specs])

    def normalized(self, side: str) -> np.ndarray:
        """Rows in coordinates where data and every noise term have unit variance."""
        mat = self.v if side == "A" else self.w
        return mat * self.scales(side)

    def _specs(self, side):
        if side == "A":
            return self.noise_a
        if side == "B":
            return self.noise_b
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")

    def subset(self, nodes) -> "LinearCode":
        idx = list(nodes)
        return LinearCode(self.v[idx], self.w[idx], self.noise_a, self.noise_b, self.eta)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "n_nodes": self.n_nodes,
            "eta": self.eta,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "v": self.v.tolist(),
            "w": self.w.tolist(),
            "noise_specs_a": [s.to_dict() for s in self.noise_a],
            "noise_specs_b": [s.to_dict() for s in self.noise_b],
        }
        if self.layered is not None:
            p = self.layered
            d["layered"] = {
                "t": p.t,
                "x": p.x,
                "alpha1": p.alpha1,
                "alpha2": p.alpha2,
                "g": None if p.g is None else p.g.tolist(),
            }
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "LinearCode":
        v = np.array(d["v"], dtype=float)
        w = np.array(d["w"], dtype=float)
        if v.ndim != 2 or w.ndim != 2:
            raise ValueError("v and w must be 2-D row-major arrays")
        if "n_nodes" in d and int(d["n_nodes"]) != v.shape[0]:
            raise ValueError("n_nodes does not match the number of rows of v")
        for key, col in (("a", v[:, 0]), ("b", w[:, 0])):
            if key in d and not np.array_equal(np.asarray(d[key], dtype=float), col):
                raise ValueError(f"'{key}' must equal column 0 of the coefficient matrix")
        layered = None
        if d.get("layered") is not None:
            p = d["layered"]
            layered = LayeredParams(int(p["t"]), p["x"], p["alpha1"], p["alpha2"], p.get("g"))
        return cls(
            v,
            w,
            [NoiseSpec.from_dict(s) for s in d["noise_specs_a"]],
            [NoiseSpec.from_dict(s) for s in d["noise_specs_b"]],
            float(d["eta"]),
            layered,
        )

    @classmethod
    def from_json(cls, text: str) -> "LinearCode":
        return cls.from_dict(json.loads(text))


# -- constructors --------------------------------------------------------------


def layered_rows(params: LayeredParams) -> np.ndarray:
    """Coefficient rows of the layered construction (same for both sides)."""
    p = params.with_default_g()
    t = p.t
    rows = np.zeros((t + 1, 1 + t))
    rows[:, 0] = 1.0
    rows[:, 1] = p.x
    rows[:t, 1] += p.alpha1
    if t > 1:
        rows[:t, 2:] = p.alpha2 * p.g.T
    return rows


def build_layered(params: LayeredParams, noise: str = "gaussian", eta: float = 1.0, epsilon_star=None) -> LinearCode:
    """Layered code with ``t + 1`` nodes.

    Node ``t+1`` gets ``[1, x, 0, ..., 0]`` and node ``i <= t`` gets
    ``[1, x + alpha1, alpha2 * g_i]``, identically for A and B.

    Parameters
    ----------
    params : LayeredParams
        Missing ``g`` is filled with :func:`default_g`.
    noise : {"gaussian", "staircase"}
        ``"gaussian"`` uses unit-variance Gaussian noise everywhere, which is
        all the second-moment analysis needs. ``"staircase"`` makes the first
        noise coordinate a staircase of budget ``epsilon_star`` scaled by
        ``1/x`` and the rest unit Laplace, for DP accounting.
    eta : float
    epsilon_star : float, optional
        Defaults to ``epsilon_from_variance(x**2)``, which makes the first
        noise coordinate unit variance.
    """
    p = params.with_default_g()
    if p.t > 1:
        validate_g(p.g, p.t)
    rows = layered_rows(p)
    if noise == "gaussian":
        specs = [NoiseSpec.gaussian(1.0)] * p.t
    elif noise == "staircase":
        eps = epsilon_from_variance(p.x**2) if epsilon_star is None else float(epsilon_star)
        specs = [NoiseSpec.staircase(eps, 1.0 / p.x)] + [NoiseSpec.laplace(1.0)] * (p.t - 1)
    else:
        raise ValueError(f"unknown noise kind {noise!r}")
    return LinearCode(rows, rows, specs, specs, eta, layered=p)


def extract_layered(code: LinearCode, g=None) -> LayeredParams:
    """Recover ``(t, x, alpha1, alpha2)`` from the rows of a layered code."""
    v = code.v
    t = v.shape[0] - 1
    x = float(v[t, 1])
    alpha1 = float(v[0, 1] - x)
    alpha2 = 0.0
    if t > 1:
        if g is None:
            g = code.layered.g if code.layered is not None else default_g(t)
        g = np.asarray(g, dtype=float)
        block = v[:t, 2:].T
        alpha2 = float(np.sum(block * g) / np.sum(g * g))
    return LayeredParams(t, x, alpha1, alpha2, g if t > 1 else None)


def build_shamir_real(n_nodes: int, t: int, eval_points=None, noise_variance: float = 1.0,
                      eta: float = 1.0, noise: str = "gaussian") -> LinearCode:
    """Real-valued Shamir sharing of degree ``t``.

    Node ``i`` holds ``A + sigma * sum_k x_i^k R_k`` for ``k = 1..t``.
    ``eval_points`` defaults to ``1, 2, ..., n_nodes``.
    """
    if t < 1 or n_nodes < 1:
        raise ValueError("need t >= 1 and at least one node")
    pts = np.arange(1, n_nodes + 1, dtype=float) if eval_points is None else np.asarray(eval_points, dtype=float)
    if pts.shape != (n_nodes,):
        raise ValueError("need one evaluation point per node")
    if np.any(pts == 0):
        raise ValueError("evaluation points must be nonzero")
    if np.unique(pts).size != pts.size:
        raise ValueError("duplicate evaluation points")
    sigma = math.sqrt(noise_variance)
    rows = np.vander(pts, t + 1, increasing=True)
    rows[:, 1:] *= sigma
    unit = NoiseSpec.gaussian(1.0) if noise == "gaussian" else NoiseSpec.laplace(1.0)
    return LinearCode(rows, rows, [unit] * t, [unit] * t, eta)


def lagrange_at_zero(points) -> np.ndarray:
    """Weights ``l_i(0)`` reproducing ``p(0)`` from ``p(points)`` for degree ``len(points) - 1``."""
    pts = np.asarray(points, dtype=float)
    out = np.empty(pts.size)
    for i, xi in enumerate(pts):
        others = np.delete(pts, i)
        out[i] = np.prod(others / (others - xi))
    return out


def build_iid_baseline(n_nodes: int, epsilon_per_node: float, eta: float = 1.0) -> LinearCode:
    """Each node adds its own independent staircase noise to the data."""
    rows = np.hstack([np.ones((n_nodes, 1)), np.eye(n_nodes)])
    specs = [NoiseSpec.staircase(epsilon_per_node)] * n_nodes
    return LinearCode(rows, rows, specs, specs, eta)


# -- complex Shamir baseline ----------------------------------------------------

BASELINE1_POINTS = np.exp(1j * np.pi * np.arange(3) / 3)


def _baseline1_gram(sigma_n_sq, eta, pts=BASELINE1_POINTS):
    """``E[A_i conj(A_j)]`` for shares ``A + sum_k x_i^k R_k`` with complex noise."""
    u = np.outer(pts, pts.conj())
    return eta + sigma_n_sq * (u + u**2)


def baseline1_pair_snr(sigma_n_sq: float, eta: float = 1.0) -> float:
    """Largest two-node adversary SNR against the complex Shamir baseline."""
    if not sigma_n_sq > 0:
        raise ValueError("sigma_n_sq must be positive")
    k1 = _baseline1_gram(sigma_n_sq, eta)
    worst = 0.0
    for i, j in itertools.combinations(range(3), 2):
        sub = k1[np.ix_([i, j], [i, j])]
        k2 = sub - eta
        det1 = (sub[0, 0] * sub[1, 1] - abs(sub[0, 1]) ** 2).real
        det2 = (k2[0, 0] * k2[1, 1] - abs(k2[0, 1]) ** 2).real
        worst = max(worst, det1 / det2 - 1.0)
    return float(worst)


def baseline1_epsilon_lower(sigma_n_sq: float, eta: float = 1.0) -> float:
    """Optimistic two-node DP parameter of the complex Shamir baseline.

    The worst pair of nodes can estimate the input with residual noise power
    ``eta / SNR``; no mechanism with that noise power beats the epsilon mapped
    to it by :func:`epsilon_from_variance`.
    """
    return epsilon_from_variance(eta / baseline1_pair_snr(sigma_n_sq, eta))


def baseline1_mse(sigma_n_sq: float, eta: float = 1.0) -> float:
    """LMSE of the complex Shamir baseline decoded linearly from all three nodes."""
    if not sigma_n_sq > 0:
        raise ValueError("sigma_n_sq must be positive")
    g = _baseline1_gram(sigma_n_sq, eta)
    k1 = g * g
    s = np.full(3, eta**2, dtype=complex)
    k2 = k1 - np.outer(s, s.conj()) / eta**2
    snr = float(np.real(s.conj() @ np.linalg.solve(k2, s))) / eta**2
    return eta**2 / (1.0 + snr)


def random_code(rng: np.random.Generator, n_nodes: int, m_a: int | None = None, m_b: int | None = None,
                eta: float | None = None) -> LinearCode:
    """Gaussian random code with Gaussian noise of random variances.

    Noise dimensions default to a uniform draw from ``1..n_nodes + 1``.
    """
    m_a = int(rng.integers(1, n_nodes + 2)) if m_a is None else m_a
    m_b = int(rng.integers(1, n_nodes + 2)) if m_b is None else m_b
    eta = float(np.exp(rng.uniform(np.log(0.5), np.log(2.0)))) if eta is None else eta
    v = rng.standard_normal((n_nodes, 1 + m_a))
    w = rng.standard_normal((n_nodes, 1 + m_b))
    var = lambda m: [NoiseSpec.gaussian(float(s)) for s in np.exp(rng.uniform(np.log(0.25), np.log(4.0), m))]  # noqa: E731
    return LinearCode(v, w, var(m_a), var(m_b), eta)

"""Noise laws used by the coding schemes.

Three families are supported: the staircase mechanism (sensitivity 1),
Laplace and Gaussian, each parameterised so that ``variance()`` is exact.

``sigma_star_sq`` is the closed-form noise power attached to an
epsilon-DP budget and ``epsilon_from_variance`` is its inverse.
The staircase sampler uses the variance-optimal step width, then applies a
scale factor ``c >= 1`` so that its variance equals ``sigma_star_sq``. Inflating
a sensitivity-1 mechanism by ``c >= 1`` only shrinks the effective shift, so the
epsilon-DP guarantee is preserved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

EPS_BRACKET = (1e-6, 1e3)
_GRID_PER_UNIT = 1000
_GRID_SPAN_SD = 10.0


def _check_epsilon(epsilon) -> float:
    epsilon = float(epsilon)
    if not math.isfinite(epsilon) or epsilon <= 0:
        raise ValueError(f"epsilon must be positive and finite, got {epsilon}")
    return epsilon


def log_sigma_star_sq(epsilon: float) -> float:
    """Logarithm of :func:`sigma_star_sq`, stable for large epsilon."""
    epsilon = _check_epsilon(epsilon)
    num = 2.0 ** (2.0 / 3.0) * (1.0 + math.exp(-2.0 * epsilon / 3.0)) + math.exp(-epsilon / 3.0)
    return -2.0 * epsilon / 3.0 + math.log(num) - 2.0 * math.log1p(-math.exp(-epsilon))


def sigma_star_sq(epsilon: float) -> float:
    """Noise power assigned to an epsilon-DP budget at sensitivity 1.

    Evaluates ``(2^(2/3) b^(2/3) (1 + b^(2/3)) + b) / (1 - b)^2`` with
    ``b = exp(-epsilon)``.

    Parameters
    ----------
    epsilon : float
        Privacy parameter, strictly positive.

    Returns
    -------
    float
    """
    return math.exp(log_sigma_star_sq(epsilon))


def epsilon_from_variance(v: float) -> float:
    """Invert :func:`sigma_star_sq` by bracketed root finding.

    Parameters
    ----------
    v : float
        Target noise variance, strictly positive.

    Returns
    -------
    float
        The epsilon in ``[1e-6, 1e3]`` with ``sigma_star_sq(epsilon) == v``
        to relative tolerance 1e-10 or better.
    """
    v = float(v)
    if not math.isfinite(v) or v <= 0:
        raise ValueError(f"variance must be positive and finite, got {v}")
    lo, hi = EPS_BRACKET
    target = math.log(v)
    f_lo = log_sigma_star_sq(lo) - target
    f_hi = log_sigma_star_sq(hi) - target
    if f_lo < 0 or f_hi > 0:
        raise ValueError(f"variance {v} outside the invertible range for epsilon in {EPS_BRACKET}")
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    return brentq(lambda e: log_sigma_star_sq(e) - target, lo, hi, xtol=1e-14, rtol=1e-13, maxiter=500)


# -- staircase shape ---------------------------------------------------------


def staircase_gamma(epsilon: float) -> float:
    """Variance-optimal step width of the sensitivity-1 staircase density."""
    b = math.exp(-_check_epsilon(epsilon))
    root = (b - 2 * b**2 + 2 * b**4 - b**5) ** (1.0 / 3.0)
    return -b / (1 - b) + root / (2.0 ** (1.0 / 3.0) * (1 - b) ** 2)


def staircase_height(epsilon: float, gamma: float) -> float:
    """Density level on ``[0, gamma)`` for the unit staircase."""
    b = math.exp(-_check_epsilon(epsilon))
    return (1 - b) / (2 * (gamma + (1 - gamma) * b))


def staircase_variance(epsilon: float, gamma: float | None = None) -> float:
    """Variance of the unscaled staircase with step width ``gamma``.

    Sums the band series in closed form. With ``gamma=None`` the optimal
    width is used.
    """
    b = math.exp(-_check_epsilon(epsilon))
    g = staircase_gamma(epsilon) if gamma is None else float(gamma)
    a = staircase_height(epsilon, g)
    # sum_k b^k k^j for j = 0, 1, 2
    s0 = 1 / (1 - b)
    s1 = b / (1 - b) ** 2
    s2 = b * (1 + b) / (1 - b) ** 3
    # band k contributes a b^k [((k+g)^3 - k^3) + b ((k+1)^3 - (k+g)^3)] / 3
    inner = (3 * g * s2 + 3 * g**2 * s1 + g**3 * s0) + b * (
        3 * (1 - g) * s2 + 3 * (1 - g**2) * s1 + (1 - g**3) * s0
    )
    return 2 * a * inner / 3


def staircase_min_variance(epsilon: float) -> float:
    """Smallest variance of any sensitivity-1 staircase density at this epsilon."""
    b = math.exp(-_check_epsilon(epsilon))
    return (2.0 ** (-2.0 / 3.0) * b ** (2.0 / 3.0) * (1 + b) ** (2.0 / 3.0) + b) / (1 - b) ** 2


def _staircase_unit_pdf(z, epsilon, gamma):
    b = math.exp(-epsilon)
    a = staircase_height(epsilon, gamma)
    z = np.abs(np.asarray(z, dtype=float))
    k = np.floor(z)
    upper = (z - k) >= gamma
    return a * np.power(b, k + upper)


# -- noise specs -------------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Distribution of one noise coordinate.

    Attributes
    ----------
    kind : str
        ``"staircase"``, ``"laplace"`` or ``"gaussian"``.
    epsilon : float, optional
        Staircase privacy parameter.
    var : float, optional
        Variance for Laplace and Gaussian.
    scale : float
        Multiplier applied to a staircase draw (1 for the plain mechanism).
    """

    kind: str
    epsilon: float | None = None
    var: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind == "staircase":
            _check_epsilon(self.epsilon)
            if not (math.isfinite(self.scale) and self.scale > 0):
                raise ValueError("staircase scale must be positive")
        elif self.kind in ("laplace", "gaussian"):
            if self.var is None or not math.isfinite(self.var) or self.var <= 0:
                raise ValueError(f"{self.kind} variance must be positive and finite")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def staircase(cls, epsilon: float, scale: float = 1.0) -> "NoiseSpec":
        return cls("staircase", epsilon=float(epsilon), scale=float(scale))

    @classmethod
    def laplace(cls, variance: float = 1.0) -> "NoiseSpec":
        return cls("laplace", var=float(variance))

    @classmethod
    def gaussian(cls, variance: float = 1.0) -> "NoiseSpec":
        return cls("gaussian", var=float(variance))

    def variance(self) -> float:
        if self.kind == "staircase":
            return self.scale**2 * sigma_star_sq(self.epsilon)
        return self.var

    @property
    def inflation(self) -> float:
        """Factor ``c`` mapping the optimal-width unit staircase to this law."""
        if self.kind != "staircase":
            return 1.0
        return self.scale * math.sqrt(sigma_star_sq(self.epsilon) / staircase_min_variance(self.epsilon))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-0.5 * x**2 / self.var) / math.sqrt(2 * math.pi * self.var)
        if self.kind == "laplace":
            beta = math.sqrt(self.var / 2)
            return np.exp(-np.abs(x) / beta) / (2 * beta)
        c = self.inflation
        return _staircase_unit_pdf(x / c, self.epsilon, staircase_gamma(self.epsilon)) / c

    def to_dict(self) -> dict:
        if self.kind == "staircase":
            return {"kind": "staircase", "epsilon": self.epsilon, "scale": self.scale}
        return {"kind": self.kind, "variance": self.var}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        kind = d["kind"]
        if kind == "staircase":
            return cls.staircase(d["epsilon"], d.get("scale", 1.0))
        if kind in ("laplace", "gaussian"):
            return cls(kind, var=float(d["variance"]))
        raise ValueError(f"unknown noise kind {kind!r}")


def sample(spec: NoiseSpec, rng: np.random.Generator, size=None):
    """Draw from ``spec``.

    Staircase draws are exact: a random sign, a geometric band index, then a
    uniform position inside the lower or upper part of the band.
    """
    if spec.kind == "gaussian":
        return rng.normal(0.0, math.sqrt(spec.var), size)
    if spec.kind == "laplace":
        return rng.laplace(0.0, math.sqrt(spec.var / 2), size)

    eps = spec.epsilon
    b = math.exp(-eps)
    gamma = staircase_gamma(eps)
    p_low = gamma / (gamma + (1 - gamma) * b)
    sign = rng.choice(np.array([-1.0, 1.0]), size)
    band = rng.geometric(1 - b, size) - 1.0
    low = rng.random(size) < p_low
    u = rng.random(size)
    offset = np.where(low, gamma * u, gamma + (1 - gamma) * u)
    return spec.inflation * sign * (band + offset)


def dp_ratio(spec: NoiseSpec, shift: float) -> float:
    """Largest density ratio ``p(x) / p(x + shift)`` over a fine grid.

    The grid has 1000 points per unit length and spans ten standard deviations
    either side of zero. Gaussian noise has an unbounded ratio, so ``inf`` is
    returned for any nonzero shift.
    """
    shift = float(shift)
    if abs(shift) > 1:
        raise ValueError("shift must lie in [-1, 1] (sensitivity 1)")
    if shift == 0:
        return 1.0
    if spec.kind == "gaussian":
        return math.inf
    half = _GRID_SPAN_SD * math.sqrt(spec.variance())
    n = int(math.ceil(2 * half * _GRID_PER_UNIT)) + 1
    x = np.linspace(-half, half, n)
    return float(np.max(spec.pdf(x) / spec.pdf(x + shift)))

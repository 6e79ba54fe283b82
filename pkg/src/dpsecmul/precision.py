"""Finite-precision node inputs: dithered quantization and bits-vs-accuracy sweeps.

Each node input is quantized with a subtractive dither. The error is then
uniform on one cell and independent of the input. Nodes multiply the
quantized values exactly.

The MSE at a bit budget is estimated as the exact infinite-precision MSE plus
the Monte Carlo mean of
``(C_quantized - AB)^2 - (C_exact - AB)^2``, with both pipelines evaluated on
the same draws. This is a control-variate estimator. It is unbiased and its
standard error scales with the quantization error rather than with the full
MSE, so small targets ``delta`` are resolvable with millions rather than
billions of samples.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .accuracy import snr_a
from .montecarlo import DataLaw, draw_inputs, run_blocks_moments
from .schemes import LayeredParams, LinearCode, build_layered, build_shamir_real, lagrange_at_zero

MAX_BITS = 60
OVERLOAD_LIMIT = 1e-4
RANGE_SDS = 8.0


@dataclass(frozen=True)
class QuantizerConfig:
    """Uniform quantizer with ``2**bits`` cells covering ``[-range, range]``."""

    bits: int
    range: float
    mode: str = "subtractive-dither"

    def __post_init__(self):
        if self.bits < 1 or not self.range > 0:
            raise ValueError("need bits >= 1 and a positive range")
        if self.mode != "subtractive-dither":
            raise ValueError(f"unsupported quantizer mode {self.mode!r}")

    @property
    def step(self) -> float:
        return 2.0 * self.range / 2.0**self.bits

    def dither(self, rng: np.random.Generator, size=None):
        """Uniform dither on ``(-step/2, step/2]``."""
        return self.step * (0.5 - rng.random(size))


def quantize(x, cfg: QuantizerConfig, dither):
    """Return ``(values, overload)`` for ``step * round((x + d) / step) - d``.

    Inputs outside ``[-range, range]`` are clipped first and flagged.
    """
    x = np.asarray(x, dtype=float)
    over = np.abs(x) > cfg.range
    xc = np.clip(x, -cfg.range, cfg.range)
    q = cfg.step * np.round((xc + dither) / cfg.step) - dither
    return q, over


@dataclass(frozen=True)
class PrecisionSetup:
    """A code, its decoder and the reference MSE a bit budget is judged against."""

    code: LinearCode
    decoder: np.ndarray
    exact_mse: float
    reference_mse: float
    input_sd: tuple


def _input_sd(code):
    vb, wb = code.normalized("A"), code.normalized("B")
    return float(np.sqrt((vb**2).sum(axis=1).max())), float(np.sqrt((wb**2).sum(axis=1).max()))


def layered_limit_mse(eta: float, x: float) -> float:
    """Infinite-precision MSE of the layered scheme in the small-alpha limit."""
    return eta**2 * x**4 / (eta + x**2) ** 2


def _layered_code(t, x, eta, alpha1):
    alpha2 = alpha1 ** (2.0 / 3.0) if t > 1 else 0.0
    return build_layered(LayeredParams(t, x, alpha1, alpha2), eta=eta)


def layered_setup(t: int, delta: float, eta: float = 1.0, x: float = 1.0) -> PrecisionSetup:
    """Layered code with ``alpha1`` chosen so that its exact excess MSE is ``delta / 2``.

    ``alpha2 = alpha1 ** (2/3)`` for ``t > 1``. Targets too loose to be met
    with ``alpha1 <= 1`` use ``alpha1 = 1``.
    """
    limit = layered_limit_mse(eta, x)

    def excess(alpha1):
        return snr_a(_layered_code(t, x, eta, alpha1)).lmse - limit - delta / 2

    # alpha1 = 1 already costs more than any target of interest; a looser target keeps it
    hi = 1.0
    if excess(hi) <= 0:
        alpha1 = hi
    else:
        lo = 1e-3
        while excess(lo) > 0:
            lo /= 4
        alpha1 = brentq(excess, lo, hi, xtol=1e-14 * lo, rtol=1e-10)
    code = _layered_code(t, x, eta, alpha1)
    rep = snr_a(code)
    return PrecisionSetup(code, rep.decoder_weights, rep.lmse, limit, _input_sd(code))


def shamir_setup(t: int, eta: float = 1.0, noise_variance: float = 1.0) -> PrecisionSetup:
    """Real Shamir code on ``2t + 1`` nodes with the exact interpolating decoder."""
    n = 2 * t + 1
    pts = np.arange(1, n + 1, dtype=float)
    code = build_shamir_real(n, t, pts, noise_variance, eta)
    return PrecisionSetup(code, lagrange_at_zero(pts), 0.0, 0.0, _input_sd(code))


def _excess_kernel(args, rng, size):
    code, decoder, law, cfg_a, cfg_b = args
    a, b, gamma, theta = draw_inputs(code, law, rng, size)
    qa, oa = quantize(gamma, cfg_a, cfg_a.dither(rng, gamma.shape))
    qb, ob = quantize(theta, cfg_b, cfg_b.dither(rng, theta.shape))
    ab = a * b
    exact = decoder @ (gamma * theta) - ab
    quant = decoder @ (qa * qb) - ab
    over = (oa.any(axis=0) | ob.any(axis=0)).astype(float)
    return np.stack([quant**2 - exact**2, over], axis=1)


@dataclass(frozen=True)
class BitsEvaluation:
    bits: int
    mse: float
    stderr: float
    overload_rate: float
    range_a: float
    range_b: float


def evaluate_bits(setup: PrecisionSetup, bits: int, n: int, seed: int) -> BitsEvaluation:
    """MSE with ``bits``-bit node inputs, enlarging the range on heavy overload."""
    sd_a, sd_b = setup.input_sd
    law = DataLaw("gaussian", setup.code.eta)
    scale = RANGE_SDS
    while True:
        cfg_a = QuantizerConfig(bits, scale * sd_a)
        cfg_b = QuantizerConfig(bits, scale * sd_b)
        args = (setup.code, setup.decoder, law, cfg_a, cfg_b)
        m, mean, var = run_blocks_moments(_excess_kernel, args, n, seed)
        if mean[1] <= OVERLOAD_LIMIT or scale > 1e3:
            break
        scale *= 2
    return BitsEvaluation(bits, setup.exact_mse + float(mean[0]), math.sqrt(float(var[0]) / m),
                          float(mean[1]), cfg_a.range, cfg_b.range)


@dataclass(frozen=True)
class PrecisionPoint:
    delta: float
    min_bits: int
    overload_rate: float
    mse: float
    stderr: float


def samples_for(delta: float) -> int:
    """Sample count keeping three standard errors near ``delta / 4``."""
    return int(min(max(2 * 10**5, math.ceil(100.0 / delta)), 4 * 10**6))


def min_bits(setup: PrecisionSetup, delta: float, seed: int, n: int | None = None) -> PrecisionPoint:
    """Smallest bit budget whose MSE is below ``reference + delta`` with 3-SE confidence."""
    n = n or samples_for(delta)
    target = setup.reference_mse + delta
    cache = {}

    def ok(bits):
        if bits not in cache:
            cache[bits] = evaluate_bits(setup, bits, n, seed)
        ev = cache[bits]
        return ev.mse + 3 * ev.stderr <= target

    lo, hi = 1, 2
    while not ok(hi):
        lo, hi = hi + 1, min(2 * hi, MAX_BITS)
        if hi == MAX_BITS and not ok(hi):
            raise RuntimeError(f"delta={delta} not reached with {MAX_BITS} bits")
    if lo < hi and ok(lo):
        hi = lo
    while lo < hi:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid + 1
    ev = cache[hi]
    return PrecisionPoint(delta, hi, ev.overload_rate, ev.mse, ev.stderr)


def _sweep_job(job):
    kind, t, delta, eta, x, seed = job
    setup = layered_setup(t, delta, eta, x) if kind == "layered" else shamir_setup(t, eta)
    return min_bits(setup, delta, seed)


def precision_sweep(kind: str, t: int, deltas, eta: float = 1.0, x: float = 1.0,
                    seed: int = 0, workers: int = 1) -> list[PrecisionPoint]:
    """Minimum bits per node input for each target excess ``delta``.

    Parameters
    ----------
    kind : {"layered", "shamir"}
        ``"layered"`` uses ``t + 1`` nodes with ``alpha1`` retuned per delta;
        ``"shamir"`` uses ``2t + 1`` nodes and the interpolating decoder.
    deltas : sequence of float
        Strictly decreasing targets.
    seed : int
        Each delta gets its own child stream of this seed.
    """
    deltas = [float(d) for d in deltas]
    if any(d <= 0 for d in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be positive and strictly decreasing")
    if kind not in ("layered", "shamir"):
        raise ValueError(f"unknown scheme kind {kind!r}")
    seeds = [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(len(deltas))]
    jobs = [(kind, t, d, eta, x, s) for d, s in zip(deltas, seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_sweep_job, jobs))
    return [_sweep_job(j) for j in jobs]


def slope_estimate(curve) -> tuple[float, float]:
    """Least-squares slope of bits against ``log2(1/delta)`` and its standard error."""
    d = np.array([p[0] if not hasattr(p, "delta") else p.delta for p in curve], dtype=float)
    m = np.array([p[1] if not hasattr(p, "min_bits") else p.min_bits for p in curve], dtype=float)
    if d.size < 4 or d.max() / d.min() < 1e3:
        raise ValueError("need at least 4 points spanning 3 orders of magnitude in delta")
    xs = np.log2(1.0 / d)
    xc = xs - xs.mean()
    slope = float(xc @ (m - m.mean()) / (xc @ xc))
    resid = m - m.mean() - slope * xc
    se = math.sqrt(float(resid @ resid) / (d.size - 2) / float(xc @ xc))
    return slope, se

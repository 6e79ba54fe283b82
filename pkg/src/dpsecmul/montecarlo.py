"""Seeded Monte Carlo simulation of the full encode/multiply/decode pipeline.

Samples are drawn in fixed-size blocks. Block ``k`` always uses child ``k`` of
``numpy.random.SeedSequence(seed).spawn(...)``, regardless of how many
workers run, and block summaries are merged in block order. A result is
therefore a pure function of ``(seed, n)``, and the worker count only changes
wall-clock time.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distributions import sample
from .schemes import LinearCode

BLOCK = 1 << 16


@dataclass(frozen=True)
class DataLaw:
    """Zero-mean input law with second moment ``eta``."""

    kind: str = "gaussian"
    eta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "rademacher", "uniform"):
            raise ValueError(f"unknown data law {self.kind!r}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    def sample(self, rng: np.random.Generator, size):
        r = math.sqrt(self.eta)
        if self.kind == "gaussian":
            return rng.normal(0.0, r, size)
        if self.kind == "rademacher":
            return r * (2.0 * rng.integers(0, 2, size) - 1.0)
        return rng.uniform(-math.sqrt(3.0) * r, math.sqrt(3.0) * r, size)


@dataclass(frozen=True)
class SimResult:
    mse: float
    stderr: float
    n_samples: int
    seed: int

    def to_dict(self) -> dict:
        return {"mse": self.mse, "stderr": self.stderr, "n_samples": self.n_samples, "seed": self.seed}


@dataclass
class _Moments:
    n: int = 0
    mean: object = 0.0
    m2: object = 0.0

    def merge(self, n, mean, m2):
        # pairwise update of count, mean and sum of squared deviations
        if n == 0:
            return
        tot = self.n + n
        d = mean - self.mean
        self.mean += d * n / tot
        self.m2 += m2 + d * d * self.n * n / tot
        self.n = tot


def block_sizes(n: int, block: int = BLOCK) -> list[int]:
    full, rest = divmod(n, block)
    return [block] * full + ([rest] if rest else [])


def _block_job(job):
    kernel, args, seed_seq, size = job
    err2 = kernel(args, np.random.default_rng(seed_seq), size)
    mean = np.mean(err2, axis=0)
    return size, mean, np.sum((err2 - mean) ** 2, axis=0)


def run_blocks_moments(kernel, args, n: int, seed: int, workers: int = 1):
    """Blockwise mean and sample variance of ``kernel`` outputs along axis 0.

    ``kernel(args, rng, size)`` returns an array whose first axis has length
    ``size``. It must be a module-level function so that worker processes can
    import it. Returns ``(n, mean, var)``; mean and var may be arrays.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    sizes = block_sizes(n)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(kernel, args, c, s) for c, s in zip(children, sizes)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_block_job, jobs))
    else:
        parts = [_block_job(j) for j in jobs]
    acc = _Moments()
    for p in parts:
        acc.merge(*p)
    var = acc.m2 / (acc.n - 1) if acc.n > 1 else acc.m2 * 0.0
    return acc.n, acc.mean, var


def run_blocks(kernel, args, n: int, seed: int, workers: int = 1) -> SimResult:
    """Estimate the mean of a scalar ``kernel`` from ``n`` samples."""
    n, mean, var = run_blocks_moments(kernel, args, n, seed, workers)
    return SimResult(float(mean), math.sqrt(float(var) / n), n, seed)


def draw_inputs(code: LinearCode, law: DataLaw, rng: np.random.Generator, size):
    """Return ``(A, B, Gamma, Theta)`` with node inputs of shape ``(N, size)``."""
    a = law.sample(rng, size)
    b = law.sample(rng, size)
    r = [sample(s, rng, size) for s in code.noise_a]
    s = [sample(q, rng, size) for q in code.noise_b]
    gamma = code.v @ np.vstack([a[None, :], *[x[None, :] for x in r]])
    theta = code.w @ np.vstack([b[None, :], *[x[None, :] for x in s]])
    return a, b, gamma, theta


def _lmse_kernel(args, rng, size):
    code, decoder, law = args
    a, b, gamma, theta = draw_inputs(code, law, rng, size)
    est = decoder @ (gamma * theta)
    return (est - a * b) ** 2


def simulate_lmse(code: LinearCode, decoder, law: DataLaw | None = None, n: int = 10**6,
                  seed: int = 0, workers: int = 1) -> SimResult:
    """Monte Carlo MSE of the decoder ``sum_i d_i Gamma_i Theta_i`` for ``AB``."""
    law = law or DataLaw("gaussian", code.eta)
    d = np.asarray(decoder, dtype=float)
    if d.shape != (code.n_nodes,):
        raise ValueError("decoder must have one weight per node")
    return run_blocks(_lmse_kernel, (code, d, law), n, seed, workers)


def simulate_adversary(code: LinearCode, subset, side: str = "A", law: DataLaw | None = None,
                       n: int = 10**6, seed: int = 0) -> SimResult:
    """Held-out MSE of a least-squares linear coalition estimate of one input.

    The estimator is fitted on the first half of the samples and scored on
    the second half.
    """
    law = law or DataLaw("gaussian", code.eta)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    a, b, gamma, theta = draw_inputs(code, law, rng, n)
    target, view = (a, gamma) if side == "A" else (b, theta)
    idx = sorted(subset)
    half = n // 2
    if idx:
        x = view[idx].T
        beta = np.linalg.lstsq(x[:half], target[:half], rcond=None)[0]
        err2 = (x[half:] @ beta - target[half:]) ** 2
    else:
        err2 = target[half:] ** 2
    m = err2.size
    return SimResult(float(err2.mean()), float(err2.std(ddof=1) / math.sqrt(m)), m, seed)


def _linear_kernel(args, rng, size):
    nu, factor, weights, power, law_kind = args
    x = DataLaw(law_kind, power).sample(rng, size)
    z = factor @ rng.standard_normal((factor.shape[1], size))
    y = nu[:, None] * x + z
    return (weights @ y - x) ** 2


def simulate_linear_estimate(nu, noise_factor, weights, power: float, n: int = 10**6, seed: int = 0,
                             law: str = "gaussian", workers: int = 1) -> SimResult:
    """Monte Carlo MSE of ``weights . y`` for ``X`` from ``y = nu X + F z``.

    ``X`` has second moment ``power`` and ``z`` is standard Gaussian, so the
    noise covariance is ``F F^T``.
    """
    nu = np.asarray(nu, dtype=float).ravel()
    f = np.asarray(noise_factor, dtype=float).reshape(nu.size, -1)
    w = np.asarray(weights, dtype=float).ravel()
    return run_blocks(_linear_kernel, (nu, f, w, float(power), law), n, seed, workers)

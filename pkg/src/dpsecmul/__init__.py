"""Coding schemes for differentially private distributed multiplication."""

from .accuracy import AccuracyReport, converse_check, snr_a
from .distributions import NoiseSpec, epsilon_from_variance, sample, sigma_star_sq
from .estimation import CovariancePair, snr_from_cov
from .privacy import PrivacyReport, snr_p
from .schemes import LayeredParams, LinearCode, build_layered, build_shamir_real

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "CovariancePair",
    "LayeredParams",
    "LinearCode",
    "NoiseSpec",
    "PrivacyReport",
    "build_layered",
    "build_shamir_real",
    "converse_check",
    "epsilon_from_variance",
    "sample",
    "sigma_star_sq",
    "snr_a",
    "snr_from_cov",
    "snr_p",
]

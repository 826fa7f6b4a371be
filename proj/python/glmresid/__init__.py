"""Continuous GLMs with corrected and adjusted Pearson residuals.

Thin Python surface over the C++ core: fitting by IRLS, the first-order
density expansion and correction of Pearson residuals, location-scale
adjusted residuals, goodness-of-fit distances, and the Monte Carlo study
driver.
"""

from ._core import (
    ad_one_sample,
    ad_two_sample,
    density_pearson,
    fit,
    ks_one_sample,
    ks_two_sample,
    NotConvergedError,
    reference_quantile,
    residuals,
    rho,
    sample_moments,
    simulate,
    true_residual_cdf,
    true_residual_pdf,
)

__all__ = [
    "ad_one_sample",
    "ad_two_sample",
    "density_pearson",
    "fit",
    "ks_one_sample",
    "ks_two_sample",
    "NotConvergedError",
    "reference_quantile",
    "residuals",
    "rho",
    "sample_moments",
    "simulate",
    "true_residual_cdf",
    "true_residual_pdf",
]

__version__ = "0.1.0"

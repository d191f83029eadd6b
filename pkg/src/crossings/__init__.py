"""Crossing statistics of stationary Gaussian processes.

Moments of level and curve crossing counts from the covariance, a numerical
classifier for finiteness of the variance, and a Monte Carlo simulator to
check both.
"""
__version__ = "0.1.0"

from .covariance import (CovarianceModel, cosine, derivatives_at, dyadic, gaussian, matern32,
                         matern52, parse_covariance, synthetic, theta_at)
from .crossing_moments import (MomentResult, RegressionCoefficients, bivariate_density,
                               curve_second_moment, regression_at, rice_mean,
                               second_factorial_moment, variance_of_count)
from .curves import CurveSpec, constant_curve, curve_from_expressions, linear_curve
from .diagnostics import classify_geman, curve_condition, geman_function, lemma_report
from .hermite import hermite_coeffs, mehler_cross
from .simulate import count_crossings, divergence_probe, mc_moments, sample_path

__all__ = [
    "CovarianceModel", "parse_covariance", "derivatives_at", "theta_at", "gaussian", "cosine",
    "matern32", "matern52", "dyadic", "synthetic", "MomentResult", "RegressionCoefficients",
    "rice_mean", "regression_at", "bivariate_density", "second_factorial_moment",
    "variance_of_count", "curve_second_moment", "CurveSpec", "constant_curve", "linear_curve",
    "curve_from_expressions", "classify_geman", "lemma_report", "curve_condition",
    "geman_function", "hermite_coeffs", "mehler_cross", "sample_path", "count_crossings",
    "mc_moments", "divergence_probe",
]

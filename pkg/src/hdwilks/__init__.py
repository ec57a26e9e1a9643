"""Corrected likelihood-ratio tests for high-dimensional multivariate regression.

The classical chi-square calibration of Wilks' Lambda breaks down once the
dimension is a sizeable fraction of the sample size.  This package provides
the random-matrix corrected test alongside the classical, Bartlett-Box and
least-squares alternatives, a Monte Carlo harness for size and power studies,
and numerical oracles for the closed-form corrections.
"""

from .errors import (
    ConvergenceError,
    DomainError,
    EstimationError,
    HdwError,
    RatioDomainError,
    SingularCovarianceError,
    SingularDesignError,
)
from .linmodel import Dataset, DesignDims, fit_alternative, fit_null, wilks_lambda
from .rmt import AspectRatios, rmt_correction
from .testkit import (
    TestReport,
    bbc,
    classical_lrt,
    classical_manova_lrt,
    clrt,
    manova_clrt,
    run_tests,
    st_test,
)

__version__ = "0.1.0"

__all__ = [
    "AspectRatios",
    "ConvergenceError",
    "Dataset",
    "DesignDims",
    "DomainError",
    "EstimationError",
    "HdwError",
    "RatioDomainError",
    "SingularCovarianceError",
    "SingularDesignError",
    "TestReport",
    "bbc",
    "classical_lrt",
    "classical_manova_lrt",
    "clrt",
    "fit_alternative",
    "fit_null",
    "manova_clrt",
    "rmt_correction",
    "run_tests",
    "st_test",
    "wilks_lambda",
]

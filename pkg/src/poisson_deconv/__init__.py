"""Series deconvolution of circular Poisson point process intensities.

Observed point processes are shifted copies of a hidden process, each point
moved by an independent draw from an unknown error density that is itself
estimated from an auxiliary sample.
"""

from .circular import FourierVector, WeightSequence
from .estimate import EmpiricalCoeffs, empirical_coeffs, exact_risk, series_estimator
from .models import ErrorClass, FunctionSpec, IntensityClass, class_membership, make_family
from .select import (
    ConstantsMode,
    SelectionResult,
    WindowTooSmall,
    full_adaptive,
    oracle_rates,
    partial_adaptive,
)
from .simulate import Dataset, PointPattern, simulate_dataset

__version__ = "0.1.0"

__all__ = [
    "FourierVector",
    "WeightSequence",
    "FunctionSpec",
    "IntensityClass",
    "ErrorClass",
    "make_family",
    "class_membership",
    "PointPattern",
    "Dataset",
    "simulate_dataset",
    "EmpiricalCoeffs",
    "empirical_coeffs",
    "series_estimator",
    "exact_risk",
    "ConstantsMode",
    "SelectionResult",
    "WindowTooSmall",
    "oracle_rates",
    "partial_adaptive",
    "full_adaptive",
]

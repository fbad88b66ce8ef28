"""Numerical core: kernels, Picard solves, closed forms, resolvents, semigroups and Monte Carlo."""
from .base import (
    ConfigError,
    ContractionError,
    EstimatorBiasError,
    FitRejectedError,
    GridError,
    InconsistentEigenpairError,
    LabError,
    NumericalCheckError,
    QuadratureError,
    ResolutionError,
    UnsupportedError,
)
from .kernel import KillingKernel, ScaledKernel, kernel_from_spec, mass
from .models import BoundaryReport, EigenPair, Grid, GridFunction, LimitParams, PicardTrace

__all__ = [
    "BoundaryReport",
    "ConfigError",
    "ContractionError",
    "EigenPair",
    "EstimatorBiasError",
    "FitRejectedError",
    "Grid",
    "GridError",
    "GridFunction",
    "InconsistentEigenpairError",
    "KillingKernel",
    "LabError",
    "LimitParams",
    "NumericalCheckError",
    "PicardTrace",
    "QuadratureError",
    "ResolutionError",
    "ScaledKernel",
    "UnsupportedError",
    "kernel_from_spec",
    "mass",
]

"""Exception hierarchy shared by the numerical modules."""
from __future__ import annotations


class LabError(RuntimeError):
    """Raised when a numerical operation cannot produce a trustworthy result."""


class QuadratureError(LabError):
    """Adaptive quadrature did not settle within the refinement budget."""


class ResolutionError(LabError):
    """The grid step is too coarse for the scaled kernel."""


class ContractionError(LabError):
    """Picard iteration exhausted its iteration cap."""


class InconsistentEigenpairError(LabError):
    """The eigenpair Wronskian drifted beyond tolerance."""


class GridError(LabError):
    """The grid does not have the required node structure."""


class FitRejectedError(LabError):
    """A decay fit was attempted on a sequence that is not monotone."""


class UnsupportedError(LabError):
    """The requested configuration is outside what the construction supports."""


class EstimatorBiasError(LabError):
    """The local-time window is too narrow for the time step."""


class NumericalCheckError(LabError):
    """A verification step of an experiment failed."""


class ConfigError(ValueError):
    """Raised when an experiment configuration fails validation."""

"""Design-based estimation of direct, local-spillover and market-price effects in networked experiments."""

from importlib.metadata import PackageNotFoundError, version

from .design import AssignmentVector, PerturbationMatrix, PowerSchedule, SeedSpec, draw_assignment, draw_perturbations
from .errors import (
    ConfigurationError,
    EquilibriumError,
    EstimationError,
    NumericalError,
    PseudoTrueError,
    SpecificationError,
    StudyFailure,
    UndefinedExposureError,
    UsageError,
)
from .estimators import EstimateReport, ExperimentData, estimate_all
from .montecarlo import StudyConfig, rate_study, run_study
from .network import GraphonSpec, Network, sample_graphon_network

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "AssignmentVector",
    "ConfigurationError",
    "EquilibriumError",
    "EstimateReport",
    "EstimationError",
    "ExperimentData",
    "GraphonSpec",
    "Network",
    "NumericalError",
    "PerturbationMatrix",
    "PowerSchedule",
    "PseudoTrueError",
    "SeedSpec",
    "SpecificationError",
    "StudyConfig",
    "StudyFailure",
    "UndefinedExposureError",
    "UsageError",
    "draw_assignment",
    "draw_perturbations",
    "estimate_all",
    "rate_study",
    "run_study",
    "sample_graphon_network",
]

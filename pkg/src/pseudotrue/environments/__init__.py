"""Data-generating processes: the fixed-index model and the calibrated structural model."""

from .covariates import HouseholdCovariates, read_covariates, synthetic_covariates, write_covariates
from .filmer import (
    FilmerEnvironment,
    FilmerParams,
    FilmerPopulation,
    FilmerSample,
    FilmerTargets,
    HouseholdRoster,
    filmer_simulate_units,
    filmer_targets,
    household_exposure,
    synthetic_population,
)
from .fixed_index import (
    LINKS,
    ChannelTargets,
    FixedIndexEnvironment,
    FixedIndexParams,
    SimulatedExperiment,
    fixed_index_excess_demand,
    fixed_index_outcome,
    fixed_index_targets,
)
from .household_network import HouseholdNetworkConfig, build_household_network, score_matrix

__all__ = [
    "LINKS",
    "ChannelTargets",
    "FilmerEnvironment",
    "FilmerParams",
    "FilmerPopulation",
    "FilmerSample",
    "FilmerTargets",
    "FixedIndexEnvironment",
    "FixedIndexParams",
    "HouseholdCovariates",
    "HouseholdNetworkConfig",
    "HouseholdRoster",
    "SimulatedExperiment",
    "build_household_network",
    "filmer_simulate_units",
    "filmer_targets",
    "fixed_index_excess_demand",
    "fixed_index_outcome",
    "fixed_index_targets",
    "household_exposure",
    "read_covariates",
    "score_matrix",
    "synthetic_covariates",
    "synthetic_population",
    "write_covariates",
]

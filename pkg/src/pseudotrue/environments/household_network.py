"""Household network from location blocks, covariate homophily and triadic closure."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..design import SeedSpec
from ..errors import ConfigurationError
from ..network import Network, sample_edges
from .covariates import HouseholdCovariates

__all__ = ["HouseholdNetworkConfig", "similarity_layers", "score_matrix", "edge_probabilities", "build_household_network"]

DEFAULT_LAYER_WEIGHTS = {
    "roof": 1.0,
    "wall": 1.0,
    "edu": 1.0,
    "assets": 0.8,
    "watersan": 0.7,
    "school": 0.6,
    "income": 1.0,
    "hhsize": 0.6,
}
# layers compared through a Gaussian kernel; the rest use exact equality
KERNEL_LAYERS = ("edu", "income", "hhsize")


@dataclass(frozen=True)
class HouseholdNetworkConfig:
    w_bgy: float = 5.0
    w_mun: float = 2.0
    w_cross: float = 0.2
    layer_weights: dict = field(default_factory=lambda: dict(DEFAULT_LAYER_WEIGHTS))
    sigma_income: float = 0.7
    sigma_hhsize: float = 1.2
    sigma_edu: float = 1.0
    lambda_tc: float = 0.5
    rho: float = 0.02

    def __post_init__(self) -> None:
        weights = [self.w_bgy, self.w_mun, self.w_cross, *self.layer_weights.values()]
        if any(v < 0 for v in weights):
            raise ConfigurationError("network weights must be non-negative")
        unknown = set(self.layer_weights) - set(DEFAULT_LAYER_WEIGHTS)
        if unknown:
            raise ConfigurationError(f"unknown similarity layers {sorted(unknown)}")
        if not 0.0 <= self.lambda_tc <= 1.0:
            raise ConfigurationError(f"lambda_tc must lie in [0, 1], got {self.lambda_tc}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigurationError(f"target density must lie in (0, 1), got {self.rho}")
        if min(self.sigma_income, self.sigma_hhsize, self.sigma_edu) <= 0:
            raise ConfigurationError("kernel bandwidths must be positive")

    def bandwidth(self, layer: str) -> float:
        return {"edu": self.sigma_edu, "income": self.sigma_income, "hhsize": self.sigma_hhsize}[layer]


def _offdiag_mean(S: np.ndarray) -> float:
    n = S.shape[0]
    return float((S.sum() - np.trace(S)) / (n * (n - 1)))


def _normalized(S: np.ndarray) -> np.ndarray:
    np.fill_diagonal(S, 0.0)
    m = _offdiag_mean(S)
    return S / m if m > 0 else S


def similarity_layers(config: HouseholdNetworkConfig, cov: HouseholdCovariates) -> dict[str, np.ndarray]:
    """Each active layer with zero diagonal and off-diagonal mean one."""
    layers = {}
    for name, weight in config.layer_weights.items():
        if weight == 0:
            continue
        x = np.asarray(getattr(cov, name), dtype=float)
        if name in KERNEL_LAYERS:
            d = (x[:, None] - x[None, :]) / config.bandwidth(name)
            S = np.exp(-0.5 * d * d)
        else:
            S = (x[:, None] == x[None, :]).astype(float)
        layers[name] = _normalized(S)
    return layers


def score_matrix(config: HouseholdNetworkConfig, cov: HouseholdCovariates) -> np.ndarray:
    """Block score plus weighted similarity layers, then optional triadic-closure mixing."""
    if cov.n < 2:
        raise ConfigurationError("a household network needs at least two households")
    same_mun = cov.municipality[:, None] == cov.municipality[None, :]
    same_bgy = cov.barangay[:, None] == cov.barangay[None, :]
    S = config.w_cross + config.w_mun * same_mun + config.w_bgy * same_bgy
    S = S.astype(float)
    for name, layer in similarity_layers(config, cov).items():
        S += config.layer_weights[name] * layer
    np.fill_diagonal(S, 0.0)
    if config.lambda_tc > 0:
        closure = _normalized(S @ S) * _offdiag_mean(S)
        S = (1 - config.lambda_tc) * S + config.lambda_tc * closure
        np.fill_diagonal(S, 0.0)
    return S


def edge_probabilities(config: HouseholdNetworkConfig, S: np.ndarray) -> np.ndarray:
    mean = _offdiag_mean(S)
    if mean <= 0:
        raise ConfigurationError("score matrix is identically zero; enable at least one weight")
    P = np.minimum(1.0, config.rho * S / mean)
    np.fill_diagonal(P, 0.0)
    return P


def build_household_network(config: HouseholdNetworkConfig, cov: HouseholdCovariates, seed: SeedSpec) -> Network:
    if cov is None or cov.n == 0:
        raise ConfigurationError("covariate set is empty")
    P = edge_probabilities(config, score_matrix(config, cov))
    rng = seed.rng("household-network")
    i, j = sample_edges(lambda i0, i1, c0: P[i0:i1, c0:], cov.n, rng)
    return Network.from_edges(cov.n, i, j)

"""Fixed-index environment: outcomes are a link of one linear index.

``eta_i = theta_w w_i + (1 - u) theta_l S_i + u theta_g p_i`` and ``y_i = g(eta_i)``,
with unit excess demand ``z_i(w_i, p) = (1 - theta_p w_i) - p``. Optional per-unit
``offsets`` shift the index and make units heterogeneous; the default has none.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ..design import AssignmentVector, PerturbationMatrix, check_probability
from ..errors import ConfigurationError, UsageError
from ..market import solve_equilibrium
from ..network import Network, exposure_profile

__all__ = [
    "LINKS",
    "Link",
    "FixedIndexParams",
    "ChannelTargets",
    "SimulatedExperiment",
    "FixedIndexEnvironment",
    "fixed_index_outcome",
    "fixed_index_excess_demand",
    "fixed_index_targets",
]


class Link(NamedTuple):
    g: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]


LINKS: dict[str, Link] = {
    "linear": Link(lambda x: x, lambda x: np.ones_like(x), lambda x: np.zeros_like(x)),
    "quad": Link(lambda x: x + x**2, lambda x: 1 + 2 * x, lambda x: np.full_like(x, 2.0)),
    "cos": Link(np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
    "log": Link(
        lambda x: np.log1p(x**2),
        lambda x: 2 * x / (1 + x**2),
        lambda x: 2 * (1 - x**2) / (1 + x**2) ** 2,
    ),
    "poly": Link(lambda x: x + x**2 + x**3, lambda x: 1 + 2 * x + 3 * x**2, lambda x: 2 + 6 * x),
}


@dataclass(frozen=True)
class FixedIndexParams:
    theta_p: float = 0.5
    theta_l: float = 0.5
    theta_g: float = 0.8
    theta_w: float = 1.0
    u: float = 0.5
    link: str = "linear"
    rho: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 <= self.u <= 1.0:
            raise ConfigurationError(f"mixing parameter u must lie in [0, 1], got {self.u}")
        if not 0.0 < self.rho <= 1.0:
            raise ConfigurationError(f"edge probability rho must lie in (0, 1], got {self.rho}")
        if self.link not in LINKS:
            raise ConfigurationError(f"unknown link {self.link!r}; choose from {sorted(LINKS)}")

    @property
    def g(self) -> Link:
        return LINKS[self.link]

    def index(self, w, s, p, offset=0.0) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return offset + self.theta_w * w + (1 - self.u) * self.theta_l * np.asarray(s) + self.u * self.theta_g * np.asarray(p)


class ChannelTargets(NamedTuple):
    """Limits of the direct, local indirect and global indirect effects."""

    ade: float
    aie_local: float
    aie_global: float

    @property
    def mpe(self) -> float:
        return self.ade + self.aie_local + self.aie_global


@dataclass(frozen=True, eq=False)
class SimulatedExperiment:
    """One realized experiment: outcomes, excess demands and the clearing price."""

    Y: np.ndarray
    Z: np.ndarray
    price: float
    residual: float
    exposure: np.ndarray


def fixed_index_outcome(params: FixedIndexParams, w, s, p):
    """``g(theta_w w + (1 - u) theta_l s + u theta_g p)``."""
    out = params.g.g(np.asarray(params.index(w, s, p), dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def fixed_index_excess_demand(params: FixedIndexParams, w, p):
    """``(1 - theta_p w) - p``."""
    out = (1.0 - params.theta_p * np.asarray(w, dtype=float)) - np.asarray(p, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def fixed_index_targets(params: FixedIndexParams, pi: float, offsets: np.ndarray | None = None) -> ChannelTargets:
    """Population limits at ``p* = 1 - theta_p pi`` and exposure ``s = pi``.

    With offsets, the expectations run over their empirical distribution.
    """
    pi = check_probability(pi)
    off = np.zeros(1) if offsets is None else np.asarray(offsets, dtype=float)
    p_star = 1.0 - params.theta_p * pi
    eta1 = params.index(1, pi, p_star, off)
    eta0 = params.index(0, pi, p_star, off)
    link = params.g
    mean_slope = float(np.mean(pi * link.d1(eta1) + (1 - pi) * link.d1(eta0)))
    ade = float(np.mean(link.g(eta1) - link.g(eta0)))
    local = (1 - params.u) * params.theta_l * mean_slope
    glob = -params.theta_p * params.u * params.theta_g * mean_slope
    return ChannelTargets(ade, local, glob)


class FixedIndexEnvironment:
    """Sample market and population model for the fixed-index design."""

    n_goods = 1

    def __init__(self, params: FixedIndexParams | None = None, offsets: np.ndarray | None = None):
        self.params = params or FixedIndexParams()
        self.offsets = None if offsets is None else np.asarray(offsets, dtype=float)

    def __repr__(self) -> str:
        het = "none" if self.offsets is None else f"{self.offsets.size} offsets"
        return f"FixedIndexEnvironment({self.params}, heterogeneity={het})"

    def _offset(self, n: int) -> np.ndarray | float:
        if self.offsets is None:
            return 0.0
        if self.offsets.shape[-1] != n:
            raise UsageError(f"environment has {self.offsets.shape[-1]} unit offsets, got {n} units")
        return self.offsets

    # sample market

    def excess_demand(self, w, prices) -> np.ndarray:
        prices = np.asarray(prices, dtype=float)
        return (1.0 - self.params.theta_p * np.asarray(w, dtype=float))[:, None] - prices

    def excess_demand_jacobian(self, w, prices) -> np.ndarray:
        return -np.ones((np.shape(prices)[0], 1, 1))

    def outcomes(self, w, s, prices) -> np.ndarray:
        off = self._offset(np.shape(w)[-1])
        return self.params.g.g(self.params.index(w, s, prices, off))

    def outcome_grad_s(self, w, s, prices) -> np.ndarray:
        off = self._offset(np.shape(w)[-1])
        return (1 - self.params.u) * self.params.theta_l * self.params.g.d1(self.params.index(w, s, prices, off))

    def outcome_grad_p(self, w, s, prices) -> np.ndarray:
        off = self._offset(np.shape(w)[-1])
        return self.params.u * self.params.theta_g * self.params.g.d1(self.params.index(w, s, prices, off))

    def clearing_price(self, w, U=None) -> float:
        """Closed-form ``1 - theta_p mean(w) - mean(U)``."""
        shift = 0.0 if U is None else float(np.mean(U.U if isinstance(U, PerturbationMatrix) else U))
        return 1.0 - self.params.theta_p * float(np.mean(w)) - shift

    def simulate(self, a: AssignmentVector, net: Network, U: PerturbationMatrix | None = None) -> SimulatedExperiment:
        if net.n != a.n:
            raise UsageError(f"assignment has {a.n} entries but the network has {net.n} nodes")
        S = exposure_profile(net, a).S
        sol = solve_equilibrium(self, a, U, p0=self.population_price(a.pi))
        shift = np.zeros(a.n) if U is None else U.U[:, 0]
        faced = sol.scalar_price + shift
        Y = self.outcomes(a.w, S, faced)
        Z = self.excess_demand(a.w, faced[:, None])
        return SimulatedExperiment(Y, Z, sol.scalar_price, sol.residual_norm, S)

    def potential_outcomes(self, W: np.ndarray, net: Network) -> np.ndarray:
        """Outcomes for each row of ``W`` (assignments x units) without perturbations."""
        W = np.atleast_2d(np.asarray(W, dtype=float))
        S = (net.adjacency @ W.T).T / np.maximum(1.0, net.degrees)
        P = 1.0 - self.params.theta_p * W.mean(axis=1)
        return self.outcomes(W, S, P[:, None])

    # population model

    def mean_excess_demand(self, pi: float, p) -> np.ndarray:
        return np.atleast_1d(1.0 - self.params.theta_p * pi - np.asarray(p, dtype=float))

    def mean_excess_demand_jacobian(self, pi: float, p) -> np.ndarray:
        return -np.ones((1, 1))

    def population_price(self, pi: float) -> np.ndarray:
        return np.array([1.0 - self.params.theta_p * pi])

    def _population_offsets(self) -> np.ndarray:
        return np.zeros(1) if self.offsets is None else self.offsets

    def mean_outcome(self, pi: float, p) -> float:
        off = self._population_offsets()
        p = float(np.ravel(p)[0])
        g = self.params.g.g
        return float(np.mean(pi * g(self.params.index(1, pi, p, off)) + (1 - pi) * g(self.params.index(0, pi, p, off))))

    def mean_outcome_price_gradient(self, pi: float, p) -> np.ndarray:
        off = self._population_offsets()
        p = float(np.ravel(p)[0])
        d1 = self.params.g.d1
        slope = np.mean(pi * d1(self.params.index(1, pi, p, off)) + (1 - pi) * d1(self.params.index(0, pi, p, off)))
        return np.array([self.params.u * self.params.theta_g * slope])

    def targets(self, pi: float) -> ChannelTargets:
        return fixed_index_targets(self.params, pi, self.offsets)

    def unit_potentials(self, pi: float, p: float, rng: np.random.Generator, draws: int) -> dict[str, np.ndarray]:
        """Potential outcomes at exposure ``pi`` and price ``p`` for sampled units.

        Without offsets every unit is identical, so a single row is exact.
        """
        off = self._population_offsets()
        if off.size > 1:
            off = rng.choice(off, size=draws)
        prm = self.params
        out = {}
        for w in (0, 1):
            eta = prm.index(w, pi, p, off)
            out[f"y{w}"] = prm.g.g(eta) * np.ones_like(off)
            out[f"dys{w}"] = (1 - prm.u) * prm.theta_l * prm.g.d1(eta) * np.ones_like(off)
            out[f"dyp{w}"] = prm.u * prm.theta_g * prm.g.d1(eta) * np.ones_like(off)
            out[f"z{w}"] = np.full_like(off, 1.0 - prm.theta_p * w - p)
        return out

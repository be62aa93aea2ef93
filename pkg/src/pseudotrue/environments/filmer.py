"""Cash-transfer structural environment calibrated to an egg market in remote villages.

Treatment is assigned per household. Individual demand, supply and child outcomes are
affine in the price, so each household's aggregated excess demand and outcome reduce to
a few coefficients that are computed once per sample.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..design import AssignmentVector, PerturbationMatrix, SeedSpec, check_probability
from ..errors import ConfigurationError, UsageError
from ..market import solve_equilibrium
from ..network import Network
from .covariates import HouseholdCovariates, synthetic_covariates
from .fixed_index import ChannelTargets, SimulatedExperiment

__all__ = [
    "FilmerParams",
    "FilmerTargets",
    "HouseholdRoster",
    "FilmerPopulation",
    "FilmerSample",
    "FilmerEnvironment",
    "synthetic_population",
    "filmer_targets",
    "filmer_simulate_units",
    "household_exposure",
]


@dataclass(frozen=True)
class FilmerParams:
    theta_d01: float = 3.8870
    theta_d00: float = 4.4875
    theta_dw: float = 0.1896
    theta_dp: float = -0.3764
    theta_s0: float = -0.2053
    theta_sp: float = 0.3263
    theta_y01: float = -5.4339
    theta_y00: float = -5.5117
    theta_yd: float = 1.8496
    theta_yw: float = 0.1025
    theta_ys: float = -1.0871
    # eligible share, backed out from the direct-effect truth
    mu_eli: float = 0.7097
    sigma_d1: float = 1 / 3
    sigma_d0: float = 1 / 3
    sigma_y1: float = 1.0
    sigma_y0: float = 1.0
    sigma_dh: float = 1 / 3
    sigma_yh: float = 1.0
    size_range: tuple[int, int] = (3, 7)
    child_probs: tuple[float, ...] = (0.3, 0.3, 0.25, 0.15)

    def __post_init__(self) -> None:
        if self.theta_dp - self.theta_sp == 0:
            raise ConfigurationError("theta_dp - theta_sp must be nonzero for the market to clear")
        if not 0.0 <= self.mu_eli <= 1.0:
            raise ConfigurationError(f"mu_eli must lie in [0, 1], got {self.mu_eli}")
        sds = (self.sigma_d1, self.sigma_d0, self.sigma_y1, self.sigma_y0, self.sigma_dh, self.sigma_yh)
        if min(sds) < 0:
            raise ConfigurationError("noise standard deviations must be non-negative")
        lo, hi = self.size_range
        probs = np.asarray(self.child_probs, dtype=float)
        if lo < 1 or hi < lo:
            raise ConfigurationError(f"invalid household size range {self.size_range}")
        if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
            raise ConfigurationError("child_probs must be a probability vector")
        if len(probs) - 1 > lo:
            raise ConfigurationError("children per household cannot exceed the smallest household size")

    @property
    def xi_z(self) -> float:
        return self.theta_dp - self.theta_sp

    @property
    def xi_y(self) -> float:
        return self.theta_yd * self.theta_dp

    def noiseless(self) -> "FilmerParams":
        return replace(self, sigma_d1=0.0, sigma_d0=0.0, sigma_y1=0.0, sigma_y0=0.0, sigma_dh=0.0, sigma_yh=0.0)


@dataclass(frozen=True)
class FilmerTargets:
    ade: float
    aie_local: float
    aie_global: float
    p_star: float

    @property
    def mpe(self) -> float:
        return self.ade + self.aie_local + self.aie_global

    def channels(self) -> ChannelTargets:
        return ChannelTargets(self.ade, self.aie_local, self.aie_global)


def filmer_targets(params: FilmerParams, pi: float) -> FilmerTargets:
    """Closed-form truth: clearing price and the three channel limits."""
    mu = params.mu_eli
    p_star = -(params.theta_d01 * mu + params.theta_d00 * (1 - mu) + params.theta_dw * pi * mu - params.theta_s0) / params.xi_z
    ade = params.theta_yd * params.theta_dw * mu + params.theta_yw
    local = params.theta_ys
    glob = -(params.xi_y / params.xi_z) * params.theta_dw * mu
    return FilmerTargets(ade, local, glob, p_star)


@dataclass(frozen=True, eq=False)
class HouseholdRoster:
    size: np.ndarray
    children: np.ndarray
    eligible: np.ndarray

    def __post_init__(self) -> None:
        size = np.asarray(self.size, dtype=int)
        children = np.asarray(self.children, dtype=int)
        eligible = np.asarray(self.eligible, dtype=bool)
        if not (size.shape == children.shape == eligible.shape) or size.ndim != 1:
            raise UsageError("roster columns must be 1-d and equally long")
        if np.any(size < 1) or np.any(children < 0) or np.any(children > size):
            raise ConfigurationError("each household needs at least one member and at most size children")
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "eligible", eligible)

    @property
    def n_households(self) -> int:
        return self.size.shape[0]

    def subset(self, idx: np.ndarray) -> "HouseholdRoster":
        return HouseholdRoster(self.size[idx], self.children[idx], self.eligible[idx])


@dataclass(frozen=True, eq=False)
class FilmerPopulation:
    """Finite population of households to subsample from."""

    roster: HouseholdRoster
    covariates: HouseholdCovariates

    def __post_init__(self) -> None:
        if self.roster.n_households != self.covariates.n:
            raise UsageError("roster and covariates describe different numbers of households")

    def subsample(self, n_households: int, rng: np.random.Generator) -> tuple[HouseholdRoster, HouseholdCovariates]:
        N = self.roster.n_households
        if not 2 <= n_households <= N:
            raise ConfigurationError(f"cannot draw {n_households} households from a population of {N}")
        idx = np.sort(rng.choice(N, size=n_households, replace=False))
        return self.roster.subset(idx), self.covariates.subset(idx)


def draw_roster(params: FilmerParams, n_households: int, rng: np.random.Generator, exact_share: bool = True) -> HouseholdRoster:
    lo, hi = params.size_range
    size = rng.integers(lo, hi + 1, size=n_households)
    children = rng.choice(len(params.child_probs), size=n_households, p=np.asarray(params.child_probs))
    if exact_share:
        eligible = np.zeros(n_households, dtype=bool)
        eligible[rng.choice(n_households, size=int(round(params.mu_eli * n_households)), replace=False)] = True
    else:
        eligible = rng.random(n_households) < params.mu_eli
    return HouseholdRoster(size, children, eligible)


def synthetic_population(params: FilmerParams, n_households: int, seed: SeedSpec) -> FilmerPopulation:
    """Roster and covariates; exactly ``round(mu_eli N)`` households are eligible."""
    rng = seed.rng("population")
    roster = draw_roster(params, n_households, rng)
    cov = synthetic_covariates(n_households, rng, hhsize=roster.size)
    return FilmerPopulation(roster, cov)


def household_exposure(net: Network, size: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Treated share among neighboring individuals, identical for all members of a household.

    Rows of ``w`` may stack several assignments; isolated households get 0.
    """
    w = np.asarray(w, dtype=float)
    A = net.adjacency
    denom = A @ size.astype(float)
    num = (A @ (size[:, None] * np.atleast_2d(w).T)).T
    out = num / np.maximum(denom, 1.0)
    out[:, denom == 0] = 0.0
    return out if w.ndim == 2 else out[0]


class FilmerSample:
    """A drawn set of households with their shocks, reduced to affine coefficients.

    ``Z_h(w, p) = zc[w] + zs p`` and ``Y_h(w, p, s) = yc[w] + yp p + ys s``.
    """

    n_goods = 1

    def __init__(self, params: FilmerParams, roster: HouseholdRoster, rng: np.random.Generator):
        self.params = prm = params
        self.roster = roster
        H = roster.n_households
        n = int(roster.size.sum())
        n_c = int(roster.children.sum())
        if n_c == 0:
            raise ConfigurationError("the sampled households contain no children")
        E = roster.eligible.astype(float)
        eps_d = rng.normal(0.0, prm.sigma_dh, size=H)
        eps_y = rng.normal(0.0, prm.sigma_yh, size=H)
        owner = np.repeat(np.arange(H), roster.size)
        # members are ordered children first within each household
        rank = np.arange(n) - np.repeat(np.cumsum(roster.size) - roster.size, roster.size)
        is_child = rank < roster.children[owner]
        nu_d = {1: rng.normal(0.0, prm.sigma_d1, size=n), 0: rng.normal(0.0, prm.sigma_d0, size=n)}
        nu_y = {1: rng.normal(0.0, prm.sigma_y1, size=n), 0: rng.normal(0.0, prm.sigma_y0, size=n)}

        def per_household(values, mask=None):
            weights = values if mask is None else values * mask
            return np.bincount(owner, weights=weights, minlength=H)

        zscale = H / n
        yscale = H / n_c
        size = roster.size.astype(float)
        kids = roster.children.astype(float)
        self.zc = np.empty((2, H))
        self.yc = np.empty((2, H))
        for w in (0, 1):
            base = prm.theta_d01 * E + prm.theta_d00 * (1 - E) + prm.theta_dw * w * E
            demand_const = size * (base + eps_d) + per_household(nu_d[w])
            self.zc[w] = zscale * (demand_const - size * prm.theta_s0)
            kid_demand = kids * (base + eps_d) + per_household(nu_d[w], is_child)
            kid_level = kids * (prm.theta_y01 * E + prm.theta_y00 * (1 - E) + prm.theta_yw * w + eps_y)
            self.yc[w] = yscale * (kid_level + prm.theta_yd * kid_demand + per_household(nu_y[w], is_child))
        self.zs = zscale * size * prm.xi_z
        self.yp = yscale * kids * prm.theta_yd * prm.theta_dp
        self.ys = yscale * kids * prm.theta_ys

    @property
    def n(self) -> int:
        return self.roster.n_households

    def _check(self, w) -> np.ndarray:
        w = np.asarray(w)
        if w.shape[-1] != self.n:
            raise UsageError(f"assignment has {w.shape[-1]} households, sample has {self.n}")
        return w.astype(int)

    def excess_demand(self, w, prices) -> np.ndarray:
        w = self._check(w)
        cols = np.arange(self.n)
        return (self.zc[w, cols] + self.zs * np.asarray(prices, dtype=float)[:, 0])[:, None]

    def excess_demand_jacobian(self, w, prices) -> np.ndarray:
        return self.zs[:, None, None].copy()

    def outcomes(self, w, s, prices) -> np.ndarray:
        w = self._check(w)
        cols = np.arange(self.n)
        return self.yc[w, cols] + self.yp * np.asarray(prices, dtype=float) + self.ys * np.asarray(s, dtype=float)

    def exposure(self, net: Network, w) -> np.ndarray:
        if net.n != self.n:
            raise UsageError(f"network has {net.n} nodes, sample has {self.n} households")
        return household_exposure(net, self.roster.size, w)

    def clearing_price(self, w, U=None) -> float:
        w = self._check(w)
        shift = np.zeros(self.n) if U is None else np.ravel(U.U if isinstance(U, PerturbationMatrix) else U)
        cols = np.arange(self.n)
        return float(-(self.zc[w, cols] + self.zs * shift).sum() / self.zs.sum())

    def simulate(self, a: AssignmentVector, net: Network, U: PerturbationMatrix | None = None) -> SimulatedExperiment:
        S = self.exposure(net, a.w)
        p_star = filmer_targets(self.params, a.pi).p_star
        sol = solve_equilibrium(self, a, U, p0=p_star)
        shift = np.zeros(self.n) if U is None else U.U[:, 0]
        faced = sol.scalar_price + shift
        Y = self.outcomes(a.w, S, faced)
        Z = self.excess_demand(a.w, faced[:, None])
        return SimulatedExperiment(Y, Z, sol.scalar_price, sol.residual_norm, S)

    def potential_outcomes(self, W: np.ndarray, net: Network) -> np.ndarray:
        """Outcomes for each row of ``W`` at the exact clearing price, without perturbations."""
        W = np.atleast_2d(self._check(W))
        cols = np.arange(self.n)
        P = -(self.zc[W, cols]).sum(axis=1) / self.zs.sum()
        S = self.exposure(net, W)
        return self.yc[W, cols] + self.yp * P[:, None] + self.ys * S


def filmer_simulate_units(
    params: FilmerParams,
    roster: HouseholdRoster,
    a: AssignmentVector,
    net: Network,
    price: float,
    seed: SeedSpec,
    U: PerturbationMatrix | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Household outcomes and excess demands at a given market price.

    Households face ``price + U_h``. Households without children report outcome 0.
    """
    if roster.n_households != a.n or net.n != a.n:
        raise UsageError("roster, assignment and network sizes disagree")
    sample = FilmerSample(params, roster, seed.rng("filmer-shocks"))
    faced = price + (np.zeros(a.n) if U is None else U.U[:, 0])
    S = sample.exposure(net, a.w)
    return sample.outcomes(a.w, S, faced), sample.excess_demand(a.w, faced[:, None])[:, 0]


class FilmerEnvironment:
    """Population model: expectations over eligibility and shocks, per individual."""

    n_goods = 1

    def __init__(self, params: FilmerParams | None = None):
        self.params = params or FilmerParams()

    def __repr__(self) -> str:
        return f"FilmerEnvironment({self.params})"

    def _mean_demand(self, pi: float, p) -> np.ndarray:
        prm = self.params
        mu = prm.mu_eli
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return prm.theta_d01 * mu + prm.theta_d00 * (1 - mu) + prm.theta_dw * pi * mu + prm.theta_dp * p

    def mean_excess_demand(self, pi: float, p) -> np.ndarray:
        prm = self.params
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return self._mean_demand(pi, p) - prm.theta_s0 - prm.theta_sp * p

    def mean_excess_demand_jacobian(self, pi: float, p) -> np.ndarray:
        return np.array([[self.params.xi_z]])

    def population_price(self, pi: float) -> np.ndarray:
        return np.array([filmer_targets(self.params, pi).p_star])

    def mean_outcome(self, pi: float, p) -> float:
        prm = self.params
        mu = prm.mu_eli
        level = prm.theta_y01 * mu + prm.theta_y00 * (1 - mu) + prm.theta_yw * pi + prm.theta_ys * pi
        return float(level + prm.theta_yd * self._mean_demand(pi, p)[0])

    def mean_outcome_price_gradient(self, pi: float, p) -> np.ndarray:
        return np.array([self.params.xi_y])

    def targets(self, pi: float) -> ChannelTargets:
        return filmer_targets(self.params, check_probability(pi)).channels()

    def unit_potentials(self, pi: float, p: float, rng: np.random.Generator, draws: int) -> dict[str, np.ndarray]:
        """Household-level potential outcomes at exposure ``pi`` for freshly drawn households.

        Aggregation weights use the population mean size and child count, the large-sample
        limit of the within-sample normalization.
        """
        prm = self.params
        roster = draw_roster(prm, draws, rng, exact_share=False)
        lo, hi = prm.size_range
        mean_size = 0.5 * (lo + hi)
        mean_kids = float(np.arange(len(prm.child_probs)) @ np.asarray(prm.child_probs))
        size = roster.size.astype(float)
        kids = roster.children.astype(float)
        E = roster.eligible.astype(float)
        eps_d = rng.normal(0.0, prm.sigma_dh, size=draws)
        eps_y = rng.normal(0.0, prm.sigma_yh, size=draws)
        out = {}
        for w, sd_d, sd_y in ((1, prm.sigma_d1, prm.sigma_y1), (0, prm.sigma_d0, prm.sigma_y0)):
            base = prm.theta_d01 * E + prm.theta_d00 * (1 - E) + prm.theta_dw * w * E + eps_d
            # sums of independent member shocks
            nu_d_kids = rng.normal(0.0, sd_d, size=draws) * np.sqrt(kids)
            nu_d_all = nu_d_kids + rng.normal(0.0, sd_d, size=draws) * np.sqrt(size - kids)
            nu_y_kids = rng.normal(0.0, sd_y, size=draws) * np.sqrt(kids)
            z = (size * (base + prm.xi_z * p - prm.theta_s0) + nu_d_all) / mean_size
            kid_demand = kids * (base + prm.theta_dp * p) + nu_d_kids
            level = kids * (prm.theta_y01 * E + prm.theta_y00 * (1 - E) + prm.theta_yw * w + prm.theta_ys * pi + eps_y)
            y = (level + prm.theta_yd * kid_demand + nu_y_kids) / mean_kids
            out[f"y{w}"] = y
            out[f"z{w}"] = z
            out[f"dys{w}"] = kids * prm.theta_ys / mean_kids
            out[f"dyp{w}"] = kids * prm.xi_y / mean_kids
        return out

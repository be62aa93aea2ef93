"""Replication harness: seeded experiments, bias/SD/MSE summaries and rate studies.

Each replication is a pure function of ``(config, n, rep)``. Summaries reduce with
``math.fsum`` in rep order, so results do not depend on completion order.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import stats

from .design import PowerSchedule, SeedSpec, check_probability, draw_assignment, draw_perturbations
from .environments.filmer import FilmerEnvironment, FilmerParams, FilmerSample, synthetic_population
from .environments.fixed_index import ChannelTargets, FixedIndexEnvironment, FixedIndexParams
from .environments.household_network import HouseholdNetworkConfig, build_household_network
from .errors import ConfigurationError, PseudoTrueError, StudyFailure
from .estimators import ExperimentData, estimate_all
from .network import GraphonSpec, sample_graphon_network

__all__ = [
    "ESTIMANDS",
    "StudyConfig",
    "SummaryRow",
    "MonteCarloSummary",
    "RateReport",
    "run_replication",
    "run_study",
    "rate_study",
    "study_targets",
    "theory_slopes",
    "MAX_FAILURE_SHARE",
]

ESTIMANDS = ("ade", "aie_local", "aie_global", "mpe")
CHANNELS = ("ade", "aie_local", "aie_global")
MAX_FAILURE_SHARE = 0.05
ENVIRONMENTS = ("fixed_index", "filmer")


@dataclass(frozen=True)
class StudyConfig:
    """Everything that determines a study.

    ``rho`` is the edge-probability schedule of the fixed-index network; when omitted it
    is the constant ``fixed_index.rho``. The structural environment uses ``network.rho``.
    """

    environment: str = "fixed_index"
    fixed_index: FixedIndexParams = field(default_factory=FixedIndexParams)
    filmer: FilmerParams = field(default_factory=FilmerParams)
    network: HouseholdNetworkConfig = field(default_factory=HouseholdNetworkConfig)
    pi: float = 0.5
    h: PowerSchedule = PowerSchedule(0.1, 0.0)
    rho: PowerSchedule | None = None
    r: int = 1
    n: int = 1000
    n_grid: tuple[int, ...] = ()
    reps: int = 200
    seed: int = 0
    population_size: int = 10000
    workers: int = 1

    def __post_init__(self) -> None:
        if self.environment not in ENVIRONMENTS:
            raise ConfigurationError(f"environment must be one of {ENVIRONMENTS}, got {self.environment!r}")
        check_probability(self.pi)
        if self.reps < 2:
            raise ConfigurationError("at least two replications are required")
        if self.n < 2:
            raise ConfigurationError("n must be at least 2")
        grid = tuple(int(v) for v in self.n_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError(f"n_grid must be strictly increasing, got {grid}")
        object.__setattr__(self, "n_grid", grid)
        if self.r < 1:
            raise ConfigurationError("PC rank r must be at least 1")
        if self.h.scale <= 0:
            raise ConfigurationError("perturbation scale must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if self.environment == "filmer" and self.population_size < self.n:
            raise ConfigurationError("population_size must be at least n")

    @property
    def rho_schedule(self) -> PowerSchedule:
        return self.rho if self.rho is not None else PowerSchedule(self.fixed_index.rho, 0.0)


@dataclass(frozen=True)
class SummaryRow:
    estimand: str
    mean: float
    bias: float
    sd: float
    mse: float
    mc_se: float
    truth: float
    n_reps: int


@dataclass(frozen=True, eq=False)
class MonteCarloSummary:
    n: int
    rows: tuple[SummaryRow, ...]
    estimates: np.ndarray  # (successful reps, 4) in ESTIMANDS order
    rep_index: np.ndarray
    failures: tuple[tuple[int, str], ...]

    def row(self, estimand: str) -> SummaryRow:
        for r in self.rows:
            if r.estimand == estimand:
                return r
        raise KeyError(estimand)

    def column(self, estimand: str) -> np.ndarray:
        return self.estimates[:, ESTIMANDS.index(estimand)]


def study_targets(config: StudyConfig) -> dict[str, float]:
    """Population limits of the four estimands."""
    if config.environment == "fixed_index":
        t: ChannelTargets = FixedIndexEnvironment(config.fixed_index).targets(config.pi)
    else:
        t = FilmerEnvironment(config.filmer).targets(config.pi)
    return {"ade": t.ade, "aie_local": t.aie_local, "aie_global": t.aie_global, "mpe": t.mpe}


def _grid_seed(seed: int, n: int) -> int:
    state = np.random.SeedSequence([seed, n]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


@lru_cache(maxsize=4)
def _population(params: FilmerParams, size: int, seed: int):
    return synthetic_population(params, size, SeedSpec(seed, 0))


def run_replication(config: StudyConfig, n: int, rep: int, master_seed: int | None = None) -> dict[str, float]:
    """One experiment: draw network, assignment and perturbations, then estimate."""
    seed = SeedSpec(config.seed if master_seed is None else master_seed, rep)
    h = config.h(n)
    if config.environment == "fixed_index":
        env = FixedIndexEnvironment(config.fixed_index)
        rho = config.rho_schedule
        net = sample_graphon_network(GraphonSpec.erdos_renyi(rho.scale, rho.exponent), n, seed)
    else:
        population = _population(config.filmer, config.population_size, config.seed)
        roster, cov = population.subsample(n, seed.rng("subsample"))
        net = build_household_network(config.network, cov, seed)
        env = FilmerSample(config.filmer, roster, seed.rng("filmer-shocks"))
    a = draw_assignment(n, config.pi, seed)
    U = draw_perturbations(n, 1, h, seed)
    sim = env.simulate(a, net, U)
    report = estimate_all(ExperimentData(a, net, U, sim.Y, sim.Z, config.r))
    out = report.as_dict()
    out["price"] = sim.price
    out["mean_degree"] = float(net.degrees.mean())
    return out


def _safe_replication(args) -> tuple[int, dict | None, str | None]:
    config, n, rep, master = args
    try:
        return rep, run_replication(config, n, rep, master), None
    except PseudoTrueError as exc:
        return rep, None, f"{type(exc).__name__}: {exc}"


def _summarize(values: np.ndarray, truth: float, estimand: str) -> SummaryRow:
    R = values.size
    mean = math.fsum(values) / R
    sd = math.sqrt(math.fsum((values - mean) ** 2) / (R - 1)) if R > 1 else 0.0
    mse = math.fsum((values - truth) ** 2) / R
    return SummaryRow(estimand, mean, mean - truth, sd, mse, sd / math.sqrt(R), truth, R)


def run_study(
    config: StudyConfig,
    n: int | None = None,
    reps_path: str | Path | None = None,
    master_seed: int | None = None,
) -> MonteCarloSummary:
    """Run ``config.reps`` replications at sample size ``n`` and summarize against the truth.

    Failed replications are excluded and reported; more than 5% failures abort the study.
    Per-rep rows are streamed to ``reps_path`` in rep order when given.
    """
    n = config.n if n is None else n
    jobs = [(config, n, rep, master_seed) for rep in range(config.reps)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results: Iterable = pool.map(_safe_replication, jobs, chunksize=max(1, len(jobs) // (4 * config.workers)))
            collected = _collect(results, reps_path, n)
    else:
        collected = _collect(map(_safe_replication, jobs), reps_path, n)
    ok, failures = collected
    if len(failures) > MAX_FAILURE_SHARE * config.reps:
        raise StudyFailure(
            f"{len(failures)} of {config.reps} replications failed at n={n}; first: {failures[0][1]}"
        )
    if len(ok) < 2:
        raise StudyFailure(f"fewer than two successful replications at n={n}")
    rep_index = np.array([rep for rep, _ in ok])
    est = np.array([[res[k] for k in ESTIMANDS] for _, res in ok])
    truth = study_targets(config)
    rows = tuple(_summarize(est[:, j], truth[k], k) for j, k in enumerate(ESTIMANDS))
    return MonteCarloSummary(n, rows, est, rep_index, tuple(failures))


def _collect(results: Iterable, reps_path, n: int):
    ok: list[tuple[int, dict]] = []
    failures: list[tuple[int, str]] = []
    writer = fh = None
    if reps_path is not None:
        fh = open(reps_path, "w", newline="", encoding="utf-8")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rep", "n", *ESTIMANDS, "price", "mean_degree", "status"])
    try:
        for rep, res, err in results:
            if err is None:
                ok.append((rep, res))
                if writer:
                    writer.writerow([rep, n, *(repr(res[k]) for k in ESTIMANDS), repr(res["price"]), repr(res["mean_degree"]), "ok"])
            else:
                failures.append((rep, err))
                if writer:
                    writer.writerow([rep, n, *([""] * len(ESTIMANDS)), "", "", err])
    finally:
        if fh is not None:
            fh.close()
    ok.sort(key=lambda t: t[0])
    failures.sort(key=lambda t: t[0])
    return ok, failures


def theory_slopes(kappa: float, alpha: float) -> dict[str, float]:
    """Log-log MSE slopes: ADE -1, local -kappa, global -(1 - 2 alpha), MPE the slower channel."""
    local = -kappa
    glob = -(1 - 2 * alpha)
    return {"ade": -1.0, "aie_local": local, "aie_global": glob, "mpe": max(local, glob)}


@dataclass(frozen=True, eq=False)
class RateReport:
    kappa: float
    alpha: float
    grid: tuple[int, ...]
    mse: dict  # estimand -> array over grid
    mse_se: dict
    slopes: dict  # estimand -> (slope, stderr)
    theory: dict
    summaries: tuple[MonteCarloSummary, ...]

    @property
    def predicted_dominant(self) -> str:
        return "aie_local" if self.kappa + 2 * self.alpha < 1 else "aie_global"

    @property
    def observed_dominant(self) -> str:
        """The channel whose MSE decays more slowly."""
        return max(("aie_local", "aie_global"), key=lambda k: self.slopes[k][0])

    @property
    def dominant_at_largest_n(self) -> str:
        return max(("aie_local", "aie_global"), key=lambda k: self.mse[k][-1])

    def rows(self, estimands: Iterable[str] = CHANNELS) -> list[tuple[int, str, float, float]]:
        return [(n, k, float(self.mse[k][i]), float(self.mse_se[k][i])) for i, n in enumerate(self.grid) for k in estimands]


def rate_study(
    config: StudyConfig,
    kappa: float,
    alpha: float,
    grid: Iterable[int] | None = None,
    scale: float = 0.75,
) -> RateReport:
    """MSE against n with ``rho_n = scale n^-kappa`` and ``h_n = scale n^-alpha``; OLS slopes in log-log."""
    grid = tuple(int(v) for v in (grid if grid is not None else config.n_grid))
    if len(grid) < 3:
        raise ConfigurationError("a rate study needs at least three grid points")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("the n grid must be strictly increasing")
    if grid[-1] < 8 * grid[0]:
        raise ConfigurationError("the n grid must span at least a factor of 8")
    if config.environment != "fixed_index":
        raise ConfigurationError("rate studies use the fixed-index environment")
    cfg = replace(config, rho=PowerSchedule(scale, kappa), h=PowerSchedule(scale, alpha))
    summaries = tuple(run_study(cfg, n, master_seed=_grid_seed(config.seed, n)) for n in grid)
    mse, mse_se, slopes = {}, {}, {}
    logn = np.log(np.array(grid, dtype=float))
    for k in ESTIMANDS:
        errs = [(s.column(k) - s.row(k).truth) ** 2 for s in summaries]
        mse[k] = np.array([e.mean() for e in errs])
        mse_se[k] = np.array([e.std(ddof=1) / np.sqrt(e.size) for e in errs])
        fit = stats.linregress(logn, np.log(mse[k]))
        slopes[k] = (float(fit.slope), float(fit.stderr))
    return RateReport(kappa, alpha, grid, mse, mse_se, slopes, theory_slopes(kappa, alpha), summaries)

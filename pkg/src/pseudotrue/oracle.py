"""Exact estimands by enumerating all ``2^n`` assignments, plus asymptotic variance targets.

Assignment ``k`` in ``range(2**n)`` treats unit ``i`` iff bit ``i`` of ``k`` is set. An
outcome table ``T`` has shape ``(2**n, n)`` with ``T[k, i] = y_i(w_k)``.

Exposure values are integer codes, so conditioning on ``d_i(W) = d_i(w)`` is an exact
group-by over assignments; no tolerance band is needed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .design import check_probability
from .errors import ConfigurationError, UndefinedExposureError, UsageError
from .market import population_targets
from .network import GraphonSpec, Network

__all__ = [
    "MAX_ENUMERATION_N",
    "ExposureMapping",
    "OracleReport",
    "VarianceTargets",
    "LipschitzReport",
    "PrecisionWarning",
    "enumerate_assignments",
    "design_probabilities",
    "own_exposure",
    "neighborhood_exposure",
    "global_price_exposure",
    "full_exposure",
    "constant_exposure",
    "custom_exposure",
    "builtin_exposure",
    "outcome_table",
    "pseudo_true_table",
    "pseudo_true_outcome",
    "effect_matrix",
    "score_mpe",
    "exact_estimands",
    "expected_ht_ade",
    "lipschitz_check",
    "tightness_witness",
    "variance_targets",
    "random_fixed_index_case",
]

MAX_ENUMERATION_N = 14


class PrecisionWarning(UserWarning):
    """Monte Carlo standard error above 1% of the estimated quantity."""


def _check_n(n: int, cap: int = MAX_ENUMERATION_N) -> int:
    if not 1 <= n <= cap:
        raise ConfigurationError(f"enumeration needs 1 <= n <= {cap}, got n={n}")
    return n


def enumerate_assignments(n: int) -> np.ndarray:
    """All assignments as a ``(2**n, n)`` 0/1 matrix, row ``k`` holding the bits of ``k``."""
    _check_n(n)
    k = np.arange(2**n)[:, None]
    return ((k >> np.arange(n)[None, :]) & 1).astype(np.int8)


def design_probabilities(n: int, pi: float) -> np.ndarray:
    """``P(W = w_k)`` under independent Bernoulli(pi) assignment."""
    ones = enumerate_assignments(n).sum(axis=1)
    return pi**ones * (1.0 - pi) ** (n - ones)


@dataclass(frozen=True, eq=False)
class ExposureMapping:
    """Integer exposure code of every unit under every assignment, ``keys[k, i]``."""

    kind: str
    keys: np.ndarray
    net: Network | None = None

    @property
    def n(self) -> int:
        return self.keys.shape[1]

    def refines(self, other: "ExposureMapping") -> bool:
        """True if equal codes here imply equal codes in ``other`` for every unit."""
        for i in range(self.n):
            pairs = np.unique(np.column_stack([self.keys[:, i], other.keys[:, i]]), axis=0)
            if np.unique(pairs[:, 0]).size != pairs.shape[0]:
                return False
        return True


def _codes(n: int) -> np.ndarray:
    return np.arange(2**n, dtype=np.int64)


def own_exposure(n: int) -> ExposureMapping:
    """Own treatment only."""
    return ExposureMapping("own", enumerate_assignments(n).astype(np.int64))


def neighborhood_exposure(net: Network) -> ExposureMapping:
    """Own treatment together with the treatments of all neighbors, as a bit pattern."""
    n = _check_n(net.n)
    masks = np.array(
        [(1 << i) | sum(1 << int(j) for j in net.neighbors(i)) for i in range(n)], dtype=np.int64
    )
    return ExposureMapping("neighborhood", _codes(n)[:, None] & masks[None, :], net)


def global_price_exposure(n: int, augment_own: bool = True) -> ExposureMapping:
    """Number of treated units, which indexes the clearing price one to one.

    With ``augment_own`` the unit's own treatment is part of the code.
    """
    W = enumerate_assignments(n).astype(np.int64)
    total = W.sum(axis=1, keepdims=True)
    keys = np.repeat(total, n, axis=1)
    if augment_own:
        keys = keys + (n + 1) * W
    return ExposureMapping("global_price", keys)


def full_exposure(n: int) -> ExposureMapping:
    return ExposureMapping("full", np.repeat(_codes(_check_n(n))[:, None], n, axis=1))


def constant_exposure(n: int) -> ExposureMapping:
    return ExposureMapping("constant", np.zeros((2 ** _check_n(n), n), dtype=np.int64))


def custom_exposure(n: int, fn: Callable[[np.ndarray], Sequence[Hashable]]) -> ExposureMapping:
    """Exposure from ``fn(w) -> n hashable values``; values are relabeled to integer codes."""
    W = enumerate_assignments(n)
    keys = np.empty(W.shape, dtype=np.int64)
    tables: list[dict] = [{} for _ in range(n)]
    for k, w in enumerate(W):
        values = list(fn(w.copy()))
        if len(values) != n:
            raise UsageError(f"custom exposure returned {len(values)} values for {n} units")
        for i, v in enumerate(values):
            keys[k, i] = tables[i].setdefault(v, len(tables[i]))
    return ExposureMapping("custom", keys)


def builtin_exposure(kind: str, net: Network) -> ExposureMapping:
    makers = {
        "own": lambda: own_exposure(net.n),
        "neighborhood": lambda: neighborhood_exposure(net),
        "global_price": lambda: global_price_exposure(net.n),
        "full": lambda: full_exposure(net.n),
        "constant": lambda: constant_exposure(net.n),
    }
    if kind not in makers:
        raise ConfigurationError(f"unknown exposure kind {kind!r}; choose from {sorted(makers)}")
    return makers[kind]()


def outcome_table(env, net: Network) -> np.ndarray:
    """Potential outcomes of every unit under every assignment."""
    _check_n(net.n)
    return np.asarray(env.potential_outcomes(enumerate_assignments(net.n), net), dtype=float)


def _validate_table(T: np.ndarray) -> tuple[np.ndarray, int]:
    T = np.asarray(T, dtype=float)
    if T.ndim != 2:
        raise UsageError("outcome table must be 2-d")
    n = T.shape[1]
    _check_n(n)
    if T.shape[0] != 2**n:
        raise UsageError(f"outcome table has {T.shape[0]} rows, expected 2**{n}")
    return T, n


def pseudo_true_table(T: np.ndarray, exposure: ExposureMapping, pi: float) -> np.ndarray:
    """``E[y_i(W') | d_i(W') = d_i(w_k)]`` for every ``k`` and ``i`` under RCT(pi)."""
    T, n = _validate_table(T)
    if exposure.n != n or exposure.keys.shape[0] != T.shape[0]:
        raise UsageError("exposure mapping and outcome table disagree in size")
    P = design_probabilities(n, pi)
    out = np.empty_like(T)
    for i in range(n):
        _, inv = np.unique(exposure.keys[:, i], return_inverse=True)
        inv = inv.ravel()
        den = np.bincount(inv, weights=P)
        if np.any(den <= 0):
            raise UndefinedExposureError(f"unit {i} has an exposure value of probability zero")
        num = np.bincount(inv, weights=P * T[:, i])
        # singleton groups keep the outcome itself, avoiding (p y) / p rounding
        alone = np.bincount(inv)[inv] == 1
        out[:, i] = np.where(alone, T[:, i], (num / den)[inv])
    return out


def pseudo_true_outcome(T: np.ndarray, exposure: ExposureMapping, pi: float, w: np.ndarray) -> np.ndarray:
    """Pseudo-true outcomes of all units at one assignment ``w``."""
    w = np.asarray(w).astype(np.int64)
    k = int((w << np.arange(w.size)).sum())
    return pseudo_true_table(T, exposure, pi)[k]


def effect_matrix(T: np.ndarray, pi: float) -> np.ndarray:
    """``C[i, j] = E[T_j(w_i = 1, W_-i) - T_j(w_i = 0, W_-i)]`` by flipping bit ``i``."""
    T, n = _validate_table(T)
    P = design_probabilities(n, pi)
    idx = np.arange(2**n)
    C = np.empty((n, n))
    for i in range(n):
        bit = 1 << i
        C[i] = P @ (T[idx | bit] - T[idx & ~bit])
    return C


def score_mpe(T: np.ndarray, pi: float) -> float:
    """``E[mean_i T_i(W) sum_k (W_k - pi)] / (pi (1 - pi))``, the derivative of the mean outcome in pi."""
    T, n = _validate_table(T)
    W = enumerate_assignments(n)
    P = design_probabilities(n, pi)
    score = W.sum(axis=1) - n * pi
    return float(np.sum(P * T.mean(axis=1) * score) / (pi * (1 - pi)))


def _ade_aie(C: np.ndarray) -> tuple[float, float]:
    n = C.shape[0]
    direct = float(np.trace(C)) / n
    return direct, float(C.sum()) / n - direct


@dataclass(frozen=True, eq=False)
class OracleReport:
    tau_mpe: float
    tau_ade: float
    tau_aie: float
    tau_mpe_oracle: float
    tau_ade_oracle: float
    tau_aie_oracle: float
    identity_residual: float
    mu_surface: Callable[[float, float], float]
    conditional_variance_sum: float
    effects: np.ndarray
    non_neighbor_max: float | None = None
    score_ade_gap: float = 0.0


def exact_estimands(T: np.ndarray, exposure: ExposureMapping, pi: float) -> OracleReport:
    """Pseudo-true and oracle estimands by exact enumeration.

    ADE and AIE come from flip sums over all assignments. MPE comes from the score
    identity. For neighborhood exposures the AIE terms of non-neighbors are reported.
    """
    pi = check_probability(pi)
    T, n = _validate_table(T)
    Ty = pseudo_true_table(T, exposure, pi)
    C = effect_matrix(Ty, pi)
    ade, aie = _ade_aie(C)
    mpe = score_mpe(Ty, pi)
    ade_o, aie_o = _ade_aie(effect_matrix(T, pi))
    mpe_o = score_mpe(T, pi)
    P = design_probabilities(n, pi)
    cond_var = float(np.sum(P[:, None] * (T - Ty) ** 2))

    W = enumerate_assignments(n)
    score_ade = float(np.sum(P[:, None] * (W - pi) * Ty) / (n * pi * (1 - pi)))

    non_neighbor = None
    if exposure.kind == "neighborhood" and exposure.net is not None:
        A = exposure.net.dense()
        mask = (A == 0) & ~np.eye(n, dtype=bool)
        non_neighbor = float(np.abs(C[mask]).max()) if mask.any() else 0.0

    return OracleReport(
        tau_mpe=mpe,
        tau_ade=ade,
        tau_aie=aie,
        tau_mpe_oracle=mpe_o,
        tau_ade_oracle=ade_o,
        tau_aie_oracle=aie_o,
        identity_residual=abs(mpe - ade - aie),
        mu_surface=_mu_surface(T, exposure),
        conditional_variance_sum=cond_var,
        effects=C,
        non_neighbor_max=non_neighbor,
        score_ade_gap=abs(score_ade - ade),
    )


def _mu_surface(T: np.ndarray, exposure: ExposureMapping) -> Callable[[float, float], float]:
    n = T.shape[1]

    def mu(pi1: float, pi2: float) -> float:
        """Mean pseudo-true outcome built under RCT(pi2), averaged over RCT(pi1)."""
        Ty = pseudo_true_table(T, exposure, check_probability(pi2, "pi2"))
        P1 = design_probabilities(n, check_probability(pi1, "pi1"))
        return float(P1 @ Ty.mean(axis=1))

    return mu


def expected_ht_ade(T: np.ndarray, pi: float) -> float:
    """Exact expectation of the Horvitz-Thompson direct-effect estimator."""
    T, n = _validate_table(T)
    W = enumerate_assignments(n)
    P = design_probabilities(n, pi)
    weights = W / pi - (1 - W) / (1 - pi)
    return float(P @ (weights * T).mean(axis=1))


@dataclass(frozen=True)
class LipschitzReport:
    constant: float
    lhs: np.ndarray
    rhs: np.ndarray
    holds: bool

    @property
    def worst_ratio(self) -> float:
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(self.rhs > 0, self.lhs / self.rhs, np.where(self.lhs > 1e-24, np.inf, 0.0))
        return float(r.max())


def _functional_estimands(F: np.ndarray, pi: float) -> np.ndarray:
    ade, aie = _ade_aie(effect_matrix(F, pi))
    return np.array([ade + aie, ade, aie])


def lipschitz_check(T: np.ndarray, pi: float, candidates: Sequence[np.ndarray], slack: float = 1e-12) -> LipschitzReport:
    """Check ``|tau(f) - tau(y)|^2 <= C sum_i E[(f_i - y_i)^2]`` with ``C = 1 / (pi (1 - pi))``.

    Rows of ``lhs``/``rhs`` follow the candidates; columns are (MPE, ADE, AIE).
    """
    pi = check_probability(pi)
    T, n = _validate_table(T)
    _check_n(n, 10)
    C = 1.0 / (pi * (1 - pi))
    P = design_probabilities(n, pi)
    base = _functional_estimands(T, pi)
    lhs, rhs = [], []
    for F in candidates:
        F = np.asarray(F, dtype=float)
        if F.shape != T.shape:
            raise UsageError(f"candidate table has shape {F.shape}, expected {T.shape}")
        lhs.append((_functional_estimands(F, pi) - base) ** 2)
        rhs.append(np.full(3, C * float(np.sum(P[:, None] * (F - T) ** 2))))
    lhs_a, rhs_a = np.array(lhs), np.array(rhs)
    holds = bool(np.all(lhs_a <= rhs_a * (1 + slack) + slack))
    return LipschitzReport(C, lhs_a, rhs_a, holds)


def tightness_witness(n: int, pi: float) -> float:
    """Ratio of the MPE bound's two sides for ``y_i = sum_j (w_j - pi)`` and ``f = 2y``."""
    W = enumerate_assignments(n).astype(float)
    T = np.repeat((W - pi).sum(axis=1, keepdims=True), n, axis=1)
    rep = lipschitz_check(T, pi, [2 * T])
    return float(rep.lhs[0, 0] / rep.rhs[0, 0])


@dataclass(frozen=True)
class VarianceTargets:
    """Asymptotic variances of the scaled estimators, with Monte Carlo standard errors."""

    sigma0_sq: float
    V1_mean: float
    V2_mean: float
    V3_mean: float
    ade_variance: float
    V_L: float
    V_G: float
    mc_se: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("sigma0_sq", "ade_variance", "V_L", "V_G"):
            if getattr(self, name) < -1e-12:
                raise UsageError(f"variance {name} is negative")


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def variance_targets(env, pi: float, graphon: GraphonSpec, draws: int = 10**6, seed: int = 0) -> VarianceTargets:
    """Evaluate the direct, local and global asymptotic variance formulas.

    Population moments come from ``env.unit_potentials`` at ``(pi, p*)``. Homogeneous
    environments return single rows, which makes every moment exact. Graphon terms use
    the low-rank expansion ``G(q, q') = sum_k lam_k psi_k(q) psi_k(q')``.
    """
    pi = check_probability(pi)
    tg = population_targets(env, pi)
    if tg.p_star.size != 1:
        raise ConfigurationError("variance targets are implemented for a single good")
    p_star = float(tg.p_star[0])
    rng = np.random.default_rng(seed)
    units = env.unit_potentials(pi, p_star, rng, draws)
    m = draws
    u = {k: np.broadcast_to(np.asarray(v, dtype=float), (m,)) for k, v in units.items()}
    Q = graphon.latent_sampler(rng, m)
    F = graphon.features(Q)
    lam = np.asarray(graphon.eigenvalues, dtype=float)
    g = graphon.marginal(Q)

    alpha = u["y1"] - u["y0"]
    sigma0_sq = float(alpha.var())
    V1 = u["y1"] / pi + u["y0"] / (1 - pi)
    delta = u["dys1"] - u["dys0"]
    V2 = F @ (lam * (F * (delta / g)[:, None]).mean(axis=0))
    grad_contrast = float(np.mean(u["dyp1"]) - np.mean(u["dyp0"]))
    V3 = -grad_contrast / float(tg.xi_z[0, 0]) * (u["z1"] - u["z0"])
    ade_core, ade_core_se = _mean_se((V1 + V2 + V3) ** 2)
    ade_variance = sigma0_sq + pi * (1 - pi) * ade_core

    psi_mean = F.mean(axis=0)
    first = float(np.sum(lam * ((F * (alpha**2)[:, None]).mean(axis=0) * psi_mean + (F * alpha[:, None]).mean(axis=0) ** 2)))
    b = pi * u["y1"] + (1 - pi) * u["y0"]
    beta = (F * b[:, None]).mean(axis=0)
    eta = b - F @ beta
    second, second_se = _mean_se(g * eta**2)
    V_L = first + second / (pi * (1 - pi))

    gamma = float(tg.gamma[0])
    psi = float(np.linalg.solve(tg.xi_z.T, tg.tau_z)[0])
    resid_sq = pi * (u["y1"] - u["z1"] * gamma) ** 2 + (1 - pi) * (u["y0"] - u["z0"] * gamma) ** 2
    rmean, rse = _mean_se(resid_sq)
    V_G = psi**2 * rmean

    mc_se = {
        "ade_variance": pi * (1 - pi) * ade_core_se,
        "V_L": second_se / (pi * (1 - pi)),
        "V_G": psi**2 * rse,
    }
    values = {"ade_variance": ade_variance, "V_L": V_L, "V_G": V_G}
    for name, se in mc_se.items():
        if se > 0.01 * abs(values[name]):
            warnings.warn(f"{name} Monte Carlo SE {se:.3g} exceeds 1% of {values[name]:.4g}", PrecisionWarning, stacklevel=2)
    return VarianceTargets(
        sigma0_sq=sigma0_sq,
        V1_mean=float(V1.mean()),
        V2_mean=float(V2.mean()),
        V3_mean=float(V3.mean()),
        ade_variance=ade_variance,
        V_L=V_L,
        V_G=V_G,
        mc_se=mc_se,
    )


def random_fixed_index_case(n: int, rng: np.random.Generator, link: str | None = None):
    """A random small fixed-index environment and network for exact checks.

    Parameters, link (unless given), unit offsets and edge density are all drawn from
    ``rng``; the network is Erdos-Renyi with density uniform on (0.2, 0.8).
    """
    # imported here: environments depend on this module's siblings, not on it
    from .design import SeedSpec
    from .environments.fixed_index import LINKS, FixedIndexEnvironment, FixedIndexParams
    from .network import sample_graphon_network

    _check_n(n)
    names = sorted(LINKS)
    params = FixedIndexParams(
        theta_p=float(rng.uniform(0.1, 1.0)),
        theta_l=float(rng.uniform(-1.0, 1.0)),
        theta_g=float(rng.uniform(0.2, 1.5)),
        theta_w=float(rng.uniform(-1.0, 1.0)),
        u=float(rng.uniform(0.0, 1.0)),
        link=link if link is not None else names[int(rng.integers(len(names)))],
    )
    env = FixedIndexEnvironment(params, offsets=rng.uniform(0.5, 1.5, size=n))
    net_seed = SeedSpec(int(rng.integers(2**63)), 0)
    net = sample_graphon_network(GraphonSpec.erdos_renyi(float(rng.uniform(0.2, 0.8))), n, net_seed)
    return env, net

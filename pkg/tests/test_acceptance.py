"""Acceptance criteria 1-8, each at its stated tolerance and runtime budget."""

import time
import warnings
from dataclasses import replace

import numpy as np
import pytest

from conftest import complete
from pseudotrue.config import DEFAULT_GRID, filmer_defaults
from pseudotrue.design import AssignmentVector, PerturbationMatrix, PowerSchedule, SeedSpec, draw_assignment, draw_perturbations
from pseudotrue.environments import LINKS, FilmerParams, FilmerSample, FixedIndexEnvironment, FixedIndexParams, filmer_targets
from pseudotrue.environments.filmer import draw_roster
from pseudotrue.estimators import ExperimentData, estimate_ade
from pseudotrue.market import solve_equilibrium
from pseudotrue.montecarlo import StudyConfig, rate_study, run_study, study_targets
from pseudotrue.network import GraphonSpec, pc_project, sample_graphon_network, top_r_eigenpairs
from pseudotrue.oracle import (
    builtin_exposure,
    constant_exposure,
    enumerate_assignments,
    exact_estimands,
    full_exposure,
    lipschitz_check,
    neighborhood_exposure,
    outcome_table,
    own_exposure,
    random_fixed_index_case,
    tightness_witness,
    variance_targets,
)

KINDS = ("own", "neighborhood", "global_price", "full", "constant")
FIG_STUDY = StudyConfig(n=1000, pi=0.5, reps=200, r=1, h=PowerSchedule(0.1), rho=PowerSchedule(0.01))


def _within(summary, estimand, k=3.0):
    row = summary.row(estimand)
    return abs(row.bias) <= k * row.mc_se, row


def test_criterion_1_identity(verdict):
    start = time.perf_counter()
    worst, count = 0.0, 0
    for n in (4, 6, 8):
        for pi in (0.3, 0.5, 0.7):
            rng = np.random.default_rng([1, n, int(pi * 10)])
            for _ in range(50):
                env, net = random_fixed_index_case(n, rng)
                T = outcome_table(env, net)
                for kind in KINDS:
                    rep = exact_estimands(T, builtin_exposure(kind, net), pi)
                    worst = max(worst, rep.identity_residual)
                    count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 30
    verdict(1, ok, f"max |MPE-ADE-AIE| = {worst:.2e} over {count} cases (tol 1e-9), {elapsed:.1f}s (< 30s)")
    assert ok


def test_criterion_2_bound(verdict):
    start = time.perf_counter()
    worst, checked = 0.0, 0
    for pi in (0.3, 0.5, 0.7):
        rng = np.random.default_rng([2, int(pi * 10)])
        for _ in range(100):
            env, net = random_fixed_index_case(8, rng)
            T = outcome_table(env, net)
            bound = float(rng.uniform(0.1, 3.0))
            F = T + rng.uniform(-bound, bound, size=T.shape)
            rep = lipschitz_check(T, pi, [F])
            worst = max(worst, rep.worst_ratio)
            checked += 3
    tight = min(tightness_witness(8, pi) for pi in (0.3, 0.5, 0.7))
    elapsed = time.perf_counter() - start
    ok = worst <= 1.0 and tight >= 0.25 and elapsed < 60
    verdict(2, ok, f"worst lhs/rhs = {worst:.3f} over {checked} checks (<= 1), witness ratio {tight:.3f} (>= 0.25), {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_3_ht_unbiased(verdict):
    worst = 0.0
    rng = np.random.default_rng(3)
    for n in (2, 4, 6, 8):
        for pi in (0.3, 0.5, 0.7):
            env, net = random_fixed_index_case(n, rng)
            T = outcome_table(env, net)
            W = enumerate_assignments(n)
            U = PerturbationMatrix(np.full(n, 0.1), 0.1)
            probs = pi ** W.sum(axis=1) * (1 - pi) ** (n - W.sum(axis=1))
            mean = sum(p * estimate_ade(ExperimentData(AssignmentVector(W[k], pi), net, U, T[k], np.zeros(n))) for k, p in enumerate(probs))
            oracle = exact_estimands(T, own_exposure(n), pi).tau_ade_oracle
            worst = max(worst, abs(mean - oracle))
    ok = worst <= 1e-10
    verdict(3, ok, f"max |E[HT ADE] - oracle ADE| = {worst:.2e} (tol 1e-10)")
    assert ok


def test_criterion_4_fixed_index_targets(verdict):
    start = time.perf_counter()
    parts, ok = [], True
    for link in ("linear", "cos"):
        cfg = replace(FIG_STUDY, fixed_index=FixedIndexParams(link=link, u=0.5))
        s = run_study(cfg)
        for k in ("ade", "aie_local", "aie_global"):
            good, row = _within(s, k)
            ok &= good
            parts.append(f"{link}/{k} {row.mean:.4f} vs {row.truth:.4f} ({row.bias / row.mc_se:+.2f} SE)")
    lin = study_targets(FIG_STUDY)
    ok &= np.allclose([lin["ade"], lin["aie_local"], lin["aie_global"]], [1.0, 0.25, -0.2], atol=1e-12)
    elapsed = time.perf_counter() - start
    ok &= elapsed < 300
    verdict(4, ok, "; ".join(parts) + f"; {elapsed:.0f}s (< 300s)")
    assert ok


PUBLISHED_TRUTH = (0.3514, -1.0871, -0.1333)
PUBLISHED_SD = (0.1522, 0.5731, 0.0973)


@pytest.mark.slow
def test_criterion_5_filmer(verdict):
    start = time.perf_counter()
    t = filmer_targets(FilmerParams(), 0.5)
    analytic = np.abs(np.array([t.ade, t.aie_local, t.aie_global]) - PUBLISHED_TRUTH).max()
    s = run_study(filmer_defaults())
    ok = analytic <= 5e-4
    parts = [f"truth gap {analytic:.1e}"]
    for k, sd_ref in zip(("ade", "aie_local", "aie_global"), PUBLISHED_SD):
        good, row = _within(s, k)
        ratio = row.sd / sd_ref
        ok &= good and 0.5 <= ratio <= 2.0
        parts.append(f"{k} mean {row.mean:.4f} ({row.bias / row.mc_se:+.2f} SE) sd {row.sd:.4f} (x{ratio:.2f})")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    verdict(5, ok, "; ".join(parts) + f"; {elapsed:.0f}s (< 600s)")
    assert ok


@pytest.mark.slow
def test_criterion_6_rates(verdict):
    start = time.perf_counter()
    base = StudyConfig(reps=200)
    parts, ok, dominant = [], True, {}
    for kappa, alpha in ((0.49, 0.40), (0.34, 0.26)):
        rep = rate_study(base, kappa, alpha, DEFAULT_GRID)
        for k in ("ade", "aie_local", "aie_global"):
            slope = rep.slopes[k][0]
            good = abs(slope - rep.theory[k]) <= 0.15
            ok &= good
            parts.append(f"({kappa},{alpha}) {k} {slope:.3f} vs {rep.theory[k]:.2f}")
        dominant[(kappa, alpha)] = (rep.predicted_dominant, rep.observed_dominant, rep.dominant_at_largest_n)
        ok &= rep.predicted_dominant == rep.observed_dominant == rep.dominant_at_largest_n
    ok &= dominant[(0.49, 0.40)][0] == "aie_global" and dominant[(0.34, 0.26)][0] == "aie_local"
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1200
    switch = ", ".join(f"{k}: {v[1]}" for k, v in dominant.items())
    verdict(6, ok, "; ".join(parts) + f"; dominating {switch}; {elapsed:.0f}s (< 1200s)")
    assert ok


@pytest.mark.slow
def test_criterion_7_clt_variances(verdict):
    start = time.perf_counter()
    n, rho, h = 4000, 0.01, 0.1
    cfg = StudyConfig(n=n, reps=2000, rho=PowerSchedule(rho), h=PowerSchedule(h), seed=7)
    s = run_study(cfg)
    vt = variance_targets(FixedIndexEnvironment(cfg.fixed_index), cfg.pi, GraphonSpec.erdos_renyi(rho), draws=10**6)
    err = {k: s.column(k) - s.row(k).truth for k in ("ade", "aie_local", "aie_global")}
    ratios = {
        "ade": np.var(np.sqrt(n) * err["ade"], ddof=1) / vt.ade_variance,
        "aie_local": np.var(err["aie_local"] / np.sqrt(rho), ddof=1) / vt.V_L,
        "aie_global": np.var(h * np.sqrt(n) * err["aie_global"], ddof=1) / vt.V_G,
    }
    limits = {"ade": 0.15, "aie_local": 0.20, "aie_global": 0.20}
    ok = all(abs(ratios[k] - 1) <= limits[k] for k in ratios)
    elapsed = time.perf_counter() - start
    ok &= elapsed < 1800
    detail = ", ".join(f"{k} empirical/theory {ratios[k]:.3f} (tol {limits[k]:.0%})" for k in ratios)
    verdict(7, ok, f"{detail}; {elapsed:.0f}s (< 1800s)")
    assert ok


def test_criterion_8_numerical_properties(verdict):
    start = time.perf_counter()
    failures = []
    rng = np.random.default_rng(8)

    # projector idempotence and orthogonality
    for _ in range(50):
        n, r = int(rng.integers(5, 60)), int(rng.integers(1, 5))
        Psi, _ = np.linalg.qr(rng.standard_normal((n, r)))
        v = rng.standard_normal(n)
        once = pc_project(v, Psi)
        if np.abs(pc_project(once, Psi) - once).max() > 1e-8 or np.abs(Psi.T @ once).max() > 1e-8:
            failures.append("projector")

    # eigen residuals, dense and sparse paths
    for n in (50, 1500):
        net = sample_graphon_network(GraphonSpec.erdos_renyi(0.05), n, SeedSpec(8, n))
        vals, vecs = top_r_eigenpairs(net, 3)
        A = net.adjacency
        if np.linalg.norm(A @ vecs - vecs * vals) > 1e-6 * np.sqrt(A.nnz):
            failures.append(f"eigen residual n={n}")
    if np.abs(np.abs(top_r_eigenpairs(complete(6), 1)[1][:, 0]) - 1 / np.sqrt(6)).max() > 1e-8:
        failures.append("complete graph eigenvector")

    # analytic vs finite-difference gradients: five links, both excess-demand functions
    x = np.linspace(-1.5, 1.5, 31)
    step = 1e-6
    for name, link in LINKS.items():
        fd = (link.g(x + step) - link.g(x - step)) / (2 * step)
        if np.any(np.abs(fd - link.d1(x)) > 1e-6 * np.maximum(1.0, np.abs(link.d1(x)))):
            failures.append(f"link {name}")
    fixed = FixedIndexEnvironment()
    prm = FilmerParams()
    filmer = FilmerSample(prm, draw_roster(prm, 40, rng), rng)
    for env, n, p in ((fixed, 40, 0.7), (filmer, 40, 6.0)):
        w = rng.integers(0, 2, n)
        P = np.full((n, 1), p)
        fd = (env.excess_demand(w, P + step) - env.excess_demand(w, P - step)) / (2 * step)
        exact = env.excess_demand_jacobian(w, P)[:, 0, 0]
        if np.any(np.abs(fd[:, 0] - exact) > 1e-6 * np.maximum(1.0, np.abs(exact))):
            failures.append(f"z gradient {type(env).__name__}")

    # equilibrium solver against the closed form
    for rep in range(20):
        seed = SeedSpec(80, rep)
        n = int(rng.integers(20, 3000))
        a = draw_assignment(n, float(rng.uniform(0.1, 0.9)), seed)
        U = draw_perturbations(n, 1, 0.1, seed)
        sol = solve_equilibrium(fixed, a, U)
        if abs(sol.scalar_price - fixed.clearing_price(a.w, U)) > sol.tolerance:
            failures.append(f"equilibrium n={n}")

    # refinement monotonicity of the conditional variance sum
    for _ in range(10):
        env, net = random_fixed_index_case(7, rng)
        T = outcome_table(env, net)
        chain = [constant_exposure(7), own_exposure(7), neighborhood_exposure(net), full_exposure(7)]
        vals = [exact_estimands(T, e, 0.5).conditional_variance_sum for e in chain]
        if any(b > a + 1e-12 for a, b in zip(vals, vals[1:])):
            failures.append("refinement")

    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 60
    verdict(8, ok, f"{len(failures)} property violations {sorted(set(failures))}; {elapsed:.1f}s (< 60s)")
    assert ok

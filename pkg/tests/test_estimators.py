import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SEED, empty
from pseudotrue.design import AssignmentVector, PerturbationMatrix, SeedSpec, draw_assignment, draw_perturbations
from pseudotrue.environments import FixedIndexEnvironment, FixedIndexParams
from pseudotrue.errors import ConfigurationError, EstimationError, UsageError
from pseudotrue.estimators import (
    ExperimentData,
    estimate_ade,
    estimate_all,
    estimate_global_aie,
    estimate_local_aie,
)
from pseudotrue.network import GraphonSpec, Network, sample_graphon_network, top_r_eigenvectors
from pseudotrue.oracle import enumerate_assignments, exact_estimands, expected_ht_ade, outcome_table, own_exposure, random_fixed_index_case


def _data(n=40, Y=None, Z=None, w=None, h=0.1, net=None, r=1, seed=SEED):
    a = AssignmentVector(w, 0.5) if w is not None else draw_assignment(n, 0.5, seed)
    n = a.n
    U = draw_perturbations(n, 1, h, seed)
    net = net if net is not None else sample_graphon_network(GraphonSpec.erdos_renyi(0.2), n, seed)
    Y = np.zeros(n) if Y is None else Y
    Z = np.zeros(n) if Z is None else Z
    return ExperimentData(a, net, U, Y, Z, r)


def test_ade_single_unit():
    d = _data(w=np.array([1]), Y=np.array([1.0]), net=Network.from_dense(np.zeros((1, 1))))
    assert estimate_ade(d) == 2.0


def test_ade_balanced_constant_outcome():
    w = np.array([1, 0] * 10)
    assert estimate_ade(_data(w=w, Y=np.full(20, 3.7))) == pytest.approx(0.0, abs=1e-14)


@given(st.floats(-5, 5), st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_ade_location_equivariance(c, seed):
    d = _data(n=30, Y=np.random.default_rng(seed).standard_normal(30), seed=SeedSpec(seed))
    shifted = _data(n=30, Y=d.Y + c, seed=SeedSpec(seed))
    expected = c * np.mean(np.where(d.a.w == 1, 2.0, -2.0))
    assert estimate_ade(shifted) - estimate_ade(d) == pytest.approx(expected, abs=1e-10)


def test_ade_unbiased_by_enumeration():
    rng = np.random.default_rng(8)
    for n in (3, 5, 7):
        env, net = random_fixed_index_case(n, rng)
        T = outcome_table(env, net)
        W = enumerate_assignments(n)
        pi = 0.5
        probs = 0.5**n
        mean = sum(
            probs * estimate_ade(ExperimentData(AssignmentVector(W[k], pi), net, PerturbationMatrix(np.full(n, 0.1), 0.1), T[k], np.zeros(n)))
            for k in range(2**n)
        )
        assert mean == pytest.approx(exact_estimands(T, own_exposure(n), pi).tau_ade_oracle, abs=1e-10)
        assert mean == pytest.approx(expected_ht_ade(T, pi), abs=1e-10)


def test_local_on_empty_graph_is_zero():
    d = _data(n=12, Y=np.arange(12.0), net=empty(12))
    assert estimate_local_aie(d) == 0


def test_zero_outcomes_give_zero_everywhere():
    rep = estimate_all(_data())
    assert (rep.ade, rep.aie_local, rep.aie_global, rep.mpe) == (0, 0, 0, 0)


def test_zero_outcome_global_with_live_demand():
    d = _data(Z=np.random.default_rng(0).standard_normal(40))
    assert estimate_global_aie(d) == 0


def test_mpe_is_sum_of_channels():
    env = FixedIndexEnvironment(FixedIndexParams(link="cos"))
    a = draw_assignment(300, 0.5, SEED)
    U = draw_perturbations(300, 1, 0.1, SEED)
    net = sample_graphon_network(GraphonSpec.erdos_renyi(0.05), 300, SEED)
    sim = env.simulate(a, net, U)
    rep = estimate_all(ExperimentData(a, net, U, sim.Y, sim.Z))
    assert rep.mpe - (rep.ade + rep.aie_local + rep.aie_global) == 0.0
    again = estimate_all(ExperimentData(a, net, U, sim.Y, sim.Z))
    assert again.as_dict() == rep.as_dict()


def test_pc_balancing_removes_component_signal():
    n, r = 200, 3
    net = sample_graphon_network(GraphonSpec.stochastic_block([[0.4, 0.05], [0.05, 0.3]], [0.5, 0.5], 1.0), n, SEED)
    Psi = top_r_eigenvectors(net, r)
    Y = Psi @ np.array([3.0, -1.0, 2.0])
    d = _data(n=n, Y=Y, net=net, r=r)
    assert abs(estimate_local_aie(d)) <= 1e-8


def test_global_matches_hand_solution():
    rng = np.random.default_rng(2)
    d = _data(n=50, Y=rng.standard_normal(50), Z=rng.standard_normal(50))
    U = d.U.U
    gamma = float(U[:, 0] @ d.Y / (U[:, 0] @ d.Z[:, 0]))
    tau_z = np.mean(np.where(d.a.w == 1, 2.0, -2.0) * d.Z[:, 0])
    assert estimate_global_aie(d) == pytest.approx(-gamma * tau_z)


def test_singular_instrument_raises():
    d = _data(n=10, Y=np.ones(10), Z=np.zeros(10))
    with pytest.raises(EstimationError) as info:
        estimate_global_aie(d)
    assert "condition_number" in info.value.diagnostics


def test_global_zero_without_demand_response():
    # theta_p = 0: treatment does not move demand, so the HT demand contrast averages to zero
    n, pi = 6, 0.5
    env = FixedIndexEnvironment(FixedIndexParams(theta_p=0.0))
    W = enumerate_assignments(n)
    Z = np.array([env.excess_demand(w, np.full((n, 1), 0.9))[:, 0] for w in W])
    tau_z = (np.where(W == 1, 2.0, -2.0) * Z).mean(axis=1)
    assert tau_z.mean() == pytest.approx(0.0, abs=1e-14)


def test_dimension_checks():
    with pytest.raises(UsageError):
        _data(n=10, Y=np.zeros(9))
    with pytest.raises(ConfigurationError):
        _data(n=10, r=11)

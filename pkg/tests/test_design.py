import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudotrue.design import (
    AssignmentVector,
    PerturbationMatrix,
    PowerSchedule,
    SeedSpec,
    draw_assignment,
    draw_perturbations,
    ht_weight,
)
from pseudotrue.errors import ConfigurationError


@pytest.mark.parametrize("pi", [0.0, 1.0, 1.0 - 1e-300, -0.1, 1.5, float("nan")])
def test_assignment_rejects_boundary_pi(pi):
    with pytest.raises(ConfigurationError):
        draw_assignment(4, pi, SeedSpec(1))


def test_assignment_law_of_large_numbers():
    a = draw_assignment(10**5, 0.5, SeedSpec(3))
    assert abs(a.w.mean() - 0.5) <= 0.01
    assert set(np.unique(a.w)) <= {0, 1}


def test_assignment_is_deterministic():
    a = draw_assignment(3, 0.5, SeedSpec(99, 4))
    b = draw_assignment(3, 0.5, SeedSpec(99, 4))
    assert np.array_equal(a.w, b.w)


def test_streams_differ_across_reps_and_tags():
    s = SeedSpec(5)
    x = s.rng("a").random(8)
    assert not np.array_equal(x, s.rng("b").random(8))
    assert not np.array_equal(x, s.child(1).rng("a").random(8))


def test_perturbation_support_and_shape():
    U = draw_perturbations(2, 1, 0.1, SeedSpec(0))
    assert U.shape == (2, 1)
    assert np.all(np.isin(U.U, [0.1, -0.1]))


def test_perturbation_column_mean_clt():
    n, h = 10**5, 0.1
    U = draw_perturbations(n, 1, h, SeedSpec(8))
    assert abs(U.U.mean()) <= 3 * h / np.sqrt(n)


def test_perturbation_determinism():
    a = draw_perturbations(4, 2, 0.05, SeedSpec(7))
    b = draw_perturbations(4, 2, 0.05, SeedSpec(7))
    assert np.array_equal(a.U, b.U)


def test_perturbation_validation():
    with pytest.raises(ConfigurationError):
        draw_perturbations(3, 1, 0.0, SeedSpec(0))
    with pytest.raises(ConfigurationError):
        PerturbationMatrix(np.array([0.1, 0.2]), 0.1)


@pytest.mark.parametrize("w,pi,expected", [(1, 0.5, 2.0), (0, 0.5, -2.0), (1, 0.25, 4.0)])
def test_ht_weight_values(w, pi, expected):
    assert ht_weight(w, pi) == pytest.approx(expected)


@given(st.floats(0.01, 0.99))
def test_ht_weight_has_exact_mean_zero(pi):
    assert pi * ht_weight(1, pi) + (1 - pi) * ht_weight(0, pi) == pytest.approx(0.0, abs=1e-12)


@given(st.integers(1, 50), st.floats(0.05, 0.95), st.integers(0, 2**32))
@settings(max_examples=30)
def test_assignment_vector_roundtrip(n, pi, seed):
    a = draw_assignment(n, pi, SeedSpec(seed))
    b = AssignmentVector(a.w.copy(), pi)
    assert np.array_equal(a.ht_weights(), b.ht_weights())


def test_assignment_vector_rejects_non_binary():
    with pytest.raises(ConfigurationError):
        AssignmentVector(np.array([0, 2, 1]), 0.5)


def test_power_schedule():
    assert PowerSchedule(0.75, 0.5)(4) == pytest.approx(0.375)
    assert PowerSchedule(0.1)(1000) == 0.1


def test_seed_validation():
    with pytest.raises(ConfigurationError):
        SeedSpec(-1)
    with pytest.raises(ConfigurationError):
        SeedSpec(2**64)

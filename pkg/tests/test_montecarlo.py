import math
from dataclasses import replace

import numpy as np
import pytest

import pseudotrue.montecarlo as mc
from pseudotrue.design import PowerSchedule
from pseudotrue.errors import ConfigurationError, EstimationError, StudyFailure
from pseudotrue.montecarlo import (
    ESTIMANDS,
    StudyConfig,
    _collect,
    _summarize,
    rate_study,
    run_replication,
    run_study,
    study_targets,
    theory_slopes,
)

SMALL = StudyConfig(n=200, reps=8, rho=PowerSchedule(0.05, 0.0))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        StudyConfig(reps=1)
    with pytest.raises(ConfigurationError):
        StudyConfig(n_grid=(100, 100, 400))
    with pytest.raises(ConfigurationError):
        StudyConfig(environment="lab")
    with pytest.raises(ConfigurationError):
        StudyConfig(pi=1.0)


def test_replication_is_a_function_of_seed_and_rep():
    a = run_replication(SMALL, 200, 3)
    b = run_replication(SMALL, 200, 3)
    c = run_replication(SMALL, 200, 4)
    assert a == b
    assert a != c


def test_summary_identities():
    s = run_study(SMALL)
    R = len(s.rep_index)
    for row in s.rows:
        assert row.mse == pytest.approx(row.bias**2 + row.sd**2 * (R - 1) / R, rel=1e-10)
        assert row.mc_se == pytest.approx(row.sd / math.sqrt(R))
        assert row.n_reps == R
    assert np.allclose(s.column("mpe"), s.column("ade") + s.column("aie_local") + s.column("aie_global"))


def test_identical_replications_have_zero_sd():
    row = _summarize(np.array([0.7, 0.7]), 1.0, "ade")
    assert row.sd == 0.0
    assert row.bias == pytest.approx(-0.3)


def test_summary_is_order_independent():
    rng = np.random.default_rng(0)
    values = rng.standard_normal(257) * 1e3 + 1e-3
    a = _summarize(values, 0.1, "ade")
    b = _summarize(rng.permutation(values), 0.1, "ade")
    assert a == b


def test_collect_sorts_by_rep():
    results = [(2, {k: 2.0 for k in ESTIMANDS}, None), (0, {k: 0.0 for k in ESTIMANDS}, None), (1, None, "EstimationError: x")]
    ok, failures = _collect(iter(results), None, 10)
    assert [r for r, _ in ok] == [0, 2]
    assert failures == [(1, "EstimationError: x")]


def test_failures_are_excluded_and_reported(monkeypatch):
    real = mc.run_replication

    def flaky(config, n, rep, master_seed=None):
        if rep == 3:
            raise EstimationError("singular", condition_number=1e12)
        return real(config, n, rep, master_seed)

    monkeypatch.setattr(mc, "run_replication", flaky)
    s = run_study(replace(SMALL, reps=20))
    assert len(s.failures) == 1 and s.failures[0][0] == 3
    assert s.row("ade").n_reps == 19


def test_too_many_failures_abort(monkeypatch):
    def broken(config, n, rep, master_seed=None):
        raise EstimationError("singular")

    monkeypatch.setattr(mc, "run_replication", broken)
    with pytest.raises(StudyFailure):
        run_study(SMALL)


def test_reps_are_streamed(tmp_path):
    path = tmp_path / "reps.csv"
    s = run_study(SMALL, reps_path=path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("rep,n,ade")
    assert len(lines) == 1 + SMALL.reps
    assert float(lines[1].split(",")[2]) == s.column("ade")[0]


def test_parallel_matches_serial():
    serial = run_study(SMALL)
    parallel = run_study(replace(SMALL, workers=2))
    assert serial.rows == parallel.rows


def test_targets():
    t = study_targets(StudyConfig())
    assert (t["ade"], t["aie_local"], t["aie_global"]) == pytest.approx((1.0, 0.25, -0.2))
    t = study_targets(StudyConfig(environment="filmer", n=100))
    assert t["aie_local"] == -1.0871


def test_theory_slopes_switch():
    a = theory_slopes(0.49, 0.40)
    assert a["aie_global"] == pytest.approx(-0.2) and a["mpe"] == a["aie_global"]
    b = theory_slopes(0.34, 0.26)
    assert b["mpe"] == b["aie_local"] == -0.34
    assert a["ade"] == b["ade"] == -1.0


def test_rate_study_grid_checks():
    with pytest.raises(ConfigurationError):
        rate_study(SMALL, 0.4, 0.3, grid=(100, 200))
    with pytest.raises(ConfigurationError):
        rate_study(SMALL, 0.4, 0.3, grid=(100, 200, 400))


def test_small_rate_study_runs():
    rep = rate_study(replace(SMALL, reps=6), 0.4, 0.3, grid=(100, 300, 800))
    assert len(rep.rows()) == 9
    assert rep.predicted_dominant == "aie_global"
    assert set(rep.slopes) == set(ESTIMANDS)


def test_filmer_replication_runs():
    cfg = StudyConfig(environment="filmer", n=300, r=6, reps=2, population_size=1000, h=PowerSchedule(0.15))
    out = run_replication(cfg, 300, 0)
    assert set(ESTIMANDS) <= set(out)
    assert out["mpe"] == pytest.approx(out["ade"] + out["aie_local"] + out["aie_global"])

import csv
import hashlib
import json

import pytest
import tomlkit

from pseudotrue.cli import main
from pseudotrue.config import RunConfig, config_to_toml, load_config, parse_config
from pseudotrue.errors import ConfigurationError

FAST = """
[study]
n = 150
reps = 6
seed = 3

[schedules]
rho_scale = 0.05
"""


@pytest.fixture
def fast_config(tmp_path):
    path = tmp_path / "fast.toml"
    path.write_text(FAST)
    return path


def _rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_missing_config_exits_2(tmp_path, capsys):
    missing = tmp_path / "nope.toml"
    assert main(["simulate", "--config", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_config_key_exits_2(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[study]\nnreps = 3\n")
    assert main(["simulate", "--config", str(path)]) == 2


def test_unparseable_config_exits_2(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[study\n")
    assert main(["simulate", "--config", str(path)]) == 2


def test_simulate_writes_schema_and_manifest(tmp_path, fast_config):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(fast_config), "--out", str(out)]) == 0
    rows = _rows(out / "summary.csv")
    assert rows[0] == ["estimand", "mean", "bias", "sd", "mse", "mc_se", "truth", "n_reps"]
    assert [r[0] for r in rows[1:]] == ["ade", "aie_local", "aie_global", "mpe"]
    assert len(_rows(out / "reps.csv")) == 7
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["master_seed"] == 3
    for entry in manifest["outputs"]:
        assert entry["sha256"] == hashlib.sha256((out / entry["path"]).read_bytes()).hexdigest()


def test_simulate_is_deterministic(tmp_path, fast_config):
    for d in ("a", "b"):
        assert main(["simulate", "--config", str(fast_config), "--reps", "10", "--seed", "7", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_seed_changes_results(tmp_path, fast_config):
    for d, seed in (("a", "1"), ("b", "2")):
        main(["simulate", "--config", str(fast_config), "--seed", seed, "--out", str(tmp_path / d)])
    assert (tmp_path / "a" / "summary.csv").read_bytes() != (tmp_path / "b" / "summary.csv").read_bytes()


def test_print_config_roundtrip(tmp_path, fast_config, capsys):
    assert main(["simulate", "--config", str(fast_config), "--seed", "11", "--print-config"]) == 0
    text = capsys.readouterr().out
    echoed = tmp_path / "echo.toml"
    echoed.write_text(text)
    again = load_config(echoed)
    assert again == parse_config(tomlkit.parse(text))
    assert again.study.seed == 11 and again.study.n == 150
    assert config_to_toml(again) == text


def test_default_config_roundtrip():
    run = RunConfig()
    assert parse_config(tomlkit.parse(config_to_toml(run))) == run


def test_layer_weight_override():
    run = parse_config(tomlkit.parse("[network.layer_weights]\nroof = 0.0\n"))
    assert run.study.network.layer_weights["roof"] == 0.0
    assert run.study.network.layer_weights["edu"] == 1.0
    with pytest.raises(ConfigurationError):
        parse_config(tomlkit.parse("[network.layer_weights]\ncaste = 1.0\n"))


def test_rate_study_outputs(tmp_path):
    cfg = tmp_path / "rate.toml"
    cfg.write_text("[study]\nreps = 4\nn_grid = [100, 200, 400, 800, 1600]\n")
    out = tmp_path / "rates"
    assert main(["rate-study", "--config", str(cfg), "--out", str(out)]) == 0
    rates = _rows(out / "rates.csv")
    assert rates[0] == ["n", "estimand", "mse", "mc_se"]
    assert len(rates) == 1 + 15
    slopes = {r[0]: r for r in _rows(out / "slopes.csv")[1:]}
    assert _rows(out / "slopes.csv")[0] == ["estimand", "slope", "slope_se", "theory_slope"]
    assert float(slopes["ade"][3]) == -1.0
    svg = (out / "rates.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 3


def test_rate_study_no_plot(tmp_path):
    cfg = tmp_path / "rate.toml"
    cfg.write_text("[study]\nreps = 3\nn_grid = [100, 300, 800]\n")
    out = tmp_path / "rates"
    assert main(["rate-study", "--config", str(cfg), "--out", str(out), "--no-plot"]) == 0
    assert not (out / "rates.svg").exists()


def test_rate_study_short_grid_exits_2(tmp_path):
    cfg = tmp_path / "rate.toml"
    cfg.write_text("[study]\nreps = 3\nn_grid = [100, 200]\n")
    assert main(["rate-study", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_oracle_check_defaults(capsys):
    assert main(["oracle-check"]) == 0
    out = capsys.readouterr().out
    assert "pseudo-true minus oracle discrepancy = 0.000e+00" in out


def test_oracle_check_enumeration_cap():
    assert main(["oracle-check", "--n", "20"]) == 2


def test_oracle_check_larger_n_skips_bounds(capsys):
    assert main(["oracle-check", "--n", "11", "--trials", "1", "--exposure", "full"]) == 0
    assert "skipped" in capsys.readouterr().out


def test_filmer_command(tmp_path):
    out = tmp_path / "filmer"
    code = main(["filmer", "--n", "300", "--reps", "3", "--rho", "0.03", "--out", str(out)])
    assert code == 0
    rows = _rows(out / "filmer_summary.csv")
    assert rows[0] == ["estimator", "truth", "mean", "bias", "sd"]
    truth = {r[0]: float(r[1]) for r in rows[1:]}
    assert truth["ade"] == pytest.approx(0.3514, abs=5e-4)
    assert truth["aie_local"] == pytest.approx(-1.0871, abs=5e-4)
    assert truth["aie_global"] == pytest.approx(-0.1333, abs=5e-4)
    hist = _rows(out / "hist_ade.csv")
    assert hist[0] == ["rep", "estimate"] and len(hist) == 4
    assert json.loads((out / "manifest.json").read_text())["network_density"] == 0.03


def test_filmer_rejects_fixed_index_config(tmp_path, fast_config):
    assert main(["filmer", "--config", str(fast_config), "--out", str(tmp_path / "o")]) == 2


def test_unknown_subcommand_exits_2():
    assert main(["nonsense"]) == 2

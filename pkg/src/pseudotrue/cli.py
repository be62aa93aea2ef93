"""Command-line front end.

Subcommands ``simulate``, ``rate-study``, ``oracle-check`` and ``filmer``. Exit codes:
0 success, 2 configuration or usage error, 3 study failure or failed check.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import DEFAULT_GRID, RunConfig, config_hash, config_to_toml, filmer_defaults, load_config, with_overrides
from .errors import ConfigurationError, PseudoTrueError, StudyFailure, UsageError
from .montecarlo import CHANNELS, ESTIMANDS, MonteCarloSummary, rate_study, run_study
from .oracle import (
    MAX_ENUMERATION_N,
    builtin_exposure,
    exact_estimands,
    expected_ht_ade,
    lipschitz_check,
    outcome_table,
    random_fixed_index_case,
    tightness_witness,
)

EXIT_OK, EXIT_CONFIG, EXIT_FAILURE = 0, 2, 3
IDENTITY_TOL = 1e-9
SUMMARY_HEADER = ["estimand", "mean", "bias", "sd", "mse", "mc_se", "truth", "n_reps"]
EXPOSURE_KINDS = ("own", "neighborhood", "global_price", "full", "constant")
LABELS = {"ade": "ADE", "aie_local": "local AIE", "aie_global": "global AIE", "mpe": "MPE"}


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, run: RunConfig, command: str, files: list[Path], started: str, extra: dict | None = None) -> Path:
    manifest = {
        "command": command,
        "config_hash": config_hash(run),
        "code_version": __version__,
        "master_seed": run.study.seed,
        "started": started,
        "finished": _now(),
        "outputs": [{"path": f.name, "sha256": _sha256(f)} for f in files],
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    (out / "config.toml").write_text(config_to_toml(run), encoding="utf-8")
    return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _summary_rows(summary: MonteCarloSummary):
    return [
        [r.estimand, _fmt(r.mean), _fmt(r.bias), _fmt(r.sd), _fmt(r.mse), _fmt(r.mc_se), _fmt(r.truth), r.n_reps]
        for r in summary.rows
    ]


def _print_summary(summary: MonteCarloSummary, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"n = {summary.n}, successful replications = {len(summary.rep_index)}, excluded = {len(summary.failures)}", file=stream)
    print(f"{'estimand':<12}{'truth':>10}{'mean':>10}{'bias':>10}{'sd':>10}{'mse':>11}{'mc_se':>10}", file=stream)
    for r in summary.rows:
        print(f"{r.estimand:<12}{r.truth:>10.4f}{r.mean:>10.4f}{r.bias:>10.4f}{r.sd:>10.4f}{r.mse:>11.5f}{r.mc_se:>10.4f}", file=stream)
    for rep, msg in summary.failures[:5]:
        print(f"  excluded rep {rep}: {msg}", file=stream)


def _load(args) -> RunConfig:
    run = load_config(args.config)
    if getattr(args, "command", None) == "filmer":
        if args.config is None:
            run = RunConfig(filmer_defaults(), run.rate)
        elif run.study.environment != "filmer":
            raise ConfigurationError("the filmer command needs [study] environment = \"filmer\"")
    return with_overrides(
        run,
        seed=args.seed,
        reps=args.reps,
        n=args.n,
        workers=getattr(args, "workers", None),
        network_rho=getattr(args, "rho", None),
        kappa=getattr(args, "kappa", None),
        alpha=getattr(args, "alpha", None),
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    return out


def cmd_simulate(args) -> int:
    run = _load(args)
    if args.print_config:
        sys.stdout.write(config_to_toml(run))
        return EXIT_OK
    out = _out_dir(args)
    started = _now()
    summary = run_study(run.study, reps_path=out / "reps.csv")
    _write_csv(out / "summary.csv", SUMMARY_HEADER, _summary_rows(summary))
    _print_summary(summary)
    _write_manifest(out, run, "simulate", [out / "summary.csv", out / "reps.csv"], started, {"excluded_reps": len(summary.failures)})
    return EXIT_OK


def cmd_rate_study(args) -> int:
    run = _load(args)
    if args.print_config:
        sys.stdout.write(config_to_toml(run))
        return EXIT_OK
    out = _out_dir(args)
    started = _now()
    grid = run.study.n_grid or DEFAULT_GRID
    rs = run.rate
    report = rate_study(run.study, rs.kappa, rs.alpha, grid, rs.scale)
    _write_csv(out / "rates.csv", ["n", "estimand", "mse", "mc_se"], [[n, k, _fmt(m), _fmt(s)] for n, k, m, s in report.rows()])
    _write_csv(
        out / "slopes.csv",
        ["estimand", "slope", "slope_se", "theory_slope"],
        [[k, _fmt(report.slopes[k][0]), _fmt(report.slopes[k][1]), _fmt(report.theory[k])] for k in ESTIMANDS],
    )
    files = [out / "rates.csv", out / "slopes.csv"]
    if not args.no_plot:
        (out / "rates.svg").write_text(loglog_svg(report.grid, {k: report.mse[k] for k in CHANNELS}), encoding="utf-8")
        files.append(out / "rates.svg")
    print(f"kappa = {rs.kappa}, alpha = {rs.alpha}, kappa + 2 alpha = {rs.kappa + 2 * rs.alpha:.2f}")
    print(f"{'estimand':<12}{'slope':>9}{'se':>8}{'theory':>9}")
    for k in ESTIMANDS:
        print(f"{k:<12}{report.slopes[k][0]:>9.3f}{report.slopes[k][1]:>8.3f}{report.theory[k]:>9.3f}")
    print(f"dominating channel: predicted {report.predicted_dominant}, observed {report.observed_dominant}")
    _write_manifest(
        out, run, "rate-study", files, started,
        {"grid": list(report.grid), "predicted_dominant": report.predicted_dominant, "observed_dominant": report.observed_dominant},
    )
    return EXIT_OK


def cmd_filmer(args) -> int:
    run = _load(args)
    if args.print_config:
        sys.stdout.write(config_to_toml(run))
        return EXIT_OK
    out = _out_dir(args)
    started = _now()
    summary = run_study(run.study, reps_path=out / "reps.csv")
    rows = [[r.estimand, _fmt(r.truth), _fmt(r.mean), _fmt(r.bias), _fmt(r.sd)] for r in summary.rows]
    _write_csv(out / "filmer_summary.csv", ["estimator", "truth", "mean", "bias", "sd"], rows)
    files = [out / "filmer_summary.csv", out / "reps.csv"]
    for k in ESTIMANDS:
        path = out / f"hist_{k}.csv"
        _write_csv(path, ["rep", "estimate"], [[int(rep), _fmt(v)] for rep, v in zip(summary.rep_index, summary.column(k))])
        files.append(path)
    _print_summary(summary)
    _write_manifest(out, run, "filmer", files, started, {"network_density": run.study.network.rho, "excluded_reps": len(summary.failures)})
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    n = args.n if args.n is not None else 8
    if not 1 <= n <= MAX_ENUMERATION_N:
        raise UsageError(f"oracle-check enumerates 2^n assignments and needs n <= {MAX_ENUMERATION_N}, got n={n}")
    if not 0 < args.pi < 1:
        raise UsageError(f"--pi must lie strictly inside (0, 1), got {args.pi}")
    kinds = EXPOSURE_KINDS if args.exposure == "all" else (args.exposure,)
    master = args.seed if args.seed is not None else 0
    worst, bound_pass, bound_total, failures = 0.0, 0, 0, []
    full_gap = 0.0
    for trial in range(args.trials):
        rng = np.random.default_rng([master, trial])
        env, net = random_fixed_index_case(n, rng, None if args.link == "random" else args.link)
        T = outcome_table(env, net)
        for kind in kinds:
            rep = exact_estimands(T, builtin_exposure(kind, net), args.pi)
            worst = max(worst, rep.identity_residual)
            if rep.identity_residual > IDENTITY_TOL:
                failures.append(f"identity residual {rep.identity_residual:.3e} (trial seed [{master}, {trial}], exposure {kind})")
            if kind == "full":
                full_gap = max(full_gap, abs(rep.tau_mpe - rep.tau_mpe_oracle), abs(rep.tau_ade - rep.tau_ade_oracle))
        ht_gap = abs(expected_ht_ade(T, args.pi) - exact_estimands(T, builtin_exposure("own", net), args.pi).tau_ade_oracle)
        if ht_gap > 1e-10:
            failures.append(f"HT expectation gap {ht_gap:.3e} (trial seed [{master}, {trial}])")
        if n <= 10:
            scale = np.abs(T).max() + 1.0
            cands = [T + rng.uniform(-scale, scale, size=T.shape) for _ in range(2)]
            lip = lipschitz_check(T, args.pi, cands)
            bound_total += lip.lhs.size
            bound_pass += int(np.sum(lip.lhs <= lip.rhs * (1 + 1e-12) + 1e-12))
            if not lip.holds:
                failures.append(f"bound violated, worst ratio {lip.worst_ratio:.4f} (trial seed [{master}, {trial}])")
    print(f"n = {n}, pi = {args.pi}, trials = {args.trials}, exposures = {', '.join(kinds)}")
    print(f"max identity residual |MPE - ADE - AIE| = {worst:.3e}")
    if "full" in kinds:
        print(f"full exposure: pseudo-true minus oracle discrepancy = {full_gap:.3e}")
    if n <= 10:
        print(f"bound checks passed: {bound_pass}/{bound_total}")
        print(f"tightness witness ratio (MPE) = {tightness_witness(n, args.pi):.6f}")
    else:
        print("bound checks skipped for n > 10")
    for msg in failures:
        print(f"FAIL: {msg}")
    return EXIT_OK if not failures else EXIT_FAILURE


def loglog_svg(grid: Sequence[int], series: dict, width: int = 640, height: int = 420) -> str:
    """Minimal log-log line chart: axes, decade grid, one polyline per series."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    margin = 60
    lx = np.log10(np.asarray(grid, dtype=float))
    ys = {k: np.log10(np.maximum(np.asarray(v, dtype=float), 1e-300)) for k, v in series.items()}
    ally = np.concatenate(list(ys.values()))
    x0, x1 = math.floor(lx.min()), math.ceil(lx.max())
    y0, y1 = math.floor(ally.min()), math.ceil(ally.max())
    y1 = max(y1, y0 + 1)
    x1 = max(x1, x0 + 1)

    def px(x):
        return margin + (x - x0) / (x1 - x0) * (width - 2 * margin)

    def py(y):
        return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin)

    buf = io.StringIO()
    buf.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">\n')
    buf.write(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    for d in range(x0, x1 + 1):
        buf.write(f'<line x1="{px(d):.1f}" y1="{py(y0):.1f}" x2="{px(d):.1f}" y2="{py(y1):.1f}" stroke="#ddd"/>\n')
        buf.write(f'<text x="{px(d):.1f}" y="{height - margin + 18}" text-anchor="middle">1e{d}</text>\n')
    for d in range(y0, y1 + 1):
        buf.write(f'<line x1="{px(x0):.1f}" y1="{py(d):.1f}" x2="{px(x1):.1f}" y2="{py(d):.1f}" stroke="#ddd"/>\n')
        buf.write(f'<text x="{margin - 8}" y="{py(d) + 4:.1f}" text-anchor="end">1e{d}</text>\n')
    buf.write(f'<line x1="{px(x0):.1f}" y1="{py(y0):.1f}" x2="{px(x1):.1f}" y2="{py(y0):.1f}" stroke="black"/>\n')
    buf.write(f'<line x1="{px(x0):.1f}" y1="{py(y0):.1f}" x2="{px(x0):.1f}" y2="{py(y1):.1f}" stroke="black"/>\n')
    buf.write(f'<text x="{width / 2:.1f}" y="{height - 15}" text-anchor="middle">n</text>\n')
    buf.write(f'<text x="15" y="{height / 2:.1f}" transform="rotate(-90 15 {height / 2:.1f})" text-anchor="middle">MSE</text>\n')
    for idx, (k, y) in enumerate(ys.items()):
        color = colors[idx % len(colors)]
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(lx, y))
        buf.write(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>\n')
        buf.write(f'<text x="{width - margin - 90}" y="{margin + 16 * idx}" fill="{color}">{LABELS.get(k, k)}</text>\n')
    buf.write("</svg>\n")
    return buf.getvalue()


def _common(p: argparse.ArgumentParser, *, config: bool = True) -> None:
    if config:
        p.add_argument("--config", metavar="PATH", help="TOML study configuration")
        p.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
        p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
        p.add_argument("--reps", type=int, help="replications per sample size")
        p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--seed", type=int, metavar="U64", help="master seed")
    p.add_argument("--n", type=int, metavar="N", help="sample size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pseudotrue", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo study at one sample size")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rate-study", help="MSE against n with log-log slope fits")
    _common(p)
    p.add_argument("--kappa", type=float, help="network sparsity exponent")
    p.add_argument("--alpha", type=float, help="perturbation exponent")
    p.add_argument("--no-plot", action="store_true", help="skip rates.svg")
    p.set_defaults(func=cmd_rate_study)

    p = sub.add_parser("oracle-check", help="exact identity and bound checks by enumeration")
    _common(p, config=False)
    p.add_argument("--pi", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=50, help="random environments")
    p.add_argument("--exposure", default="all", choices=("all", *EXPOSURE_KINDS))
    p.add_argument("--link", default="random", choices=("random", "linear", "quad", "cos", "log", "poly"))
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("filmer", help="calibrated structural study")
    _common(p)
    p.add_argument("--rho", type=float, help="household network density")
    p.set_defaults(func=cmd_filmer)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigurationError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StudyFailure as exc:
        print(f"study failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except PseudoTrueError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

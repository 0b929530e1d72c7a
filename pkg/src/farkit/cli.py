"""Command-line interface: simulate, fit, benchmark, rolling, verify.

Every command writes its primary artifacts as CSV plus a JSON metadata
sidecar carrying ``schema_version`` and the fully resolved configuration.
Numeric CSV cells use the shortest representation that parses back to the
exact double, so identical configs and seeds give byte-identical primary
outputs; wall-clock timings are kept out of those files.

Output files by command:

* ``simulate``  -> sample.csv (n rows x M columns), sample.meta.json
* ``fit``       -> kernel.csv (M x M), fit.meta.json (resolved tuning, CV curve)
* ``benchmark`` -> records.csv  (regime,n,method,replication,misfe,tuning,error)
                   regret.csv   (regime,n,method,mean_misfe,count,regret_pct)
                   worst_case.csv (method,n,worst_mean_misfe)
                   tuning.csv   (regime,n,method,mean_tuning)
                   summary.json (rate slope, timings, resolved config)
* ``rolling``   -> forecasts.csv (date,method,ise,alpha_or_k,refit_flag)
                   summary.csv  (method,mean_ise,median_ise,regret_pct,failures)
                   weekday_means.csv (weekday,h01..h48), rolling.meta.json
* ``verify``    -> verify.json; exit status 0 only if every check passes
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .evaluate import (
    BenchmarkConfig,
    TheoryProbe,
    fit_method,
    mean_misfe_table,
    operator_error_slope,
    parse_method,
    rate_slope_from_report,
    regret_table,
    run_benchmark,
    run_verification_suite,
    tuning_summary,
    worst_case_table,
)
from .fpca import eigendecompose
from .grid import make_trapezoid_grid, uniform_grid
from .moments import FunctionalSample, weighted_moments
from .preprocess import (
    PipelineConfig,
    RollingConfig,
    filter_and_interpolate,
    load_halfhourly_csv,
    preprocess_curves,
    rolling_forecast,
)
from .simulate import REGIMES, draw_regime_operator, simulate_far1
from .tikhonov import (
    application_alpha_grid,
    cv_select_alpha,
    default_alpha_grid,
    tikhonov_fit,
)

SCHEMA_VERSION = 1


def _fmt(value) -> str:
    """Shortest exact decimal form of a number for CSV cells."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="\n") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if header:
            writer.writerow(header)
        writer.writerows(rows)


def _write_matrix(path: Path, matrix) -> None:
    _write_csv(path, None, [[_fmt(v) for v in row] for row in np.atleast_2d(matrix)])


def _write_json(path: Path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _read_meta(path: Path) -> dict | None:
    if not path.exists():
        return None
    with open(path) as handle:
        meta = json.load(handle)
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema version {version!r}")
    return meta


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    if args.regime not in REGIMES:
        print(f"error: unknown regime {args.regime!r}; choose from I, II, III", file=sys.stderr)
        return 2
    if args.n < 2:
        print("error: --n must be at least 2", file=sys.stderr)
        return 2
    out = _out_dir(args)
    spec = REGIMES[args.regime]
    operator = draw_regime_operator(spec, args.seed)
    sample = simulate_far1(operator, spec, args.n, args.seed)
    _write_matrix(out / "sample.csv", sample.values)
    _write_json(
        out / "sample.meta.json",
        {
            "kind": "functional_sample",
            "regime": args.regime,
            "n": args.n,
            "seed": args.seed,
            "grid_points": [float(u) for u in sample.grid.points],
            "spectral_radius": operator.spectral_radius,
        },
    )
    print(f"wrote {args.n} curves on {sample.grid.size} grid points to {out}")
    return 0


# ---------------------------------------------------------------------------
# fit


def _load_sample(path: Path) -> FunctionalSample:
    values = np.loadtxt(path, delimiter=",", ndmin=2)
    meta = _read_meta(path.with_suffix(".meta.json"))
    if meta is not None and meta.get("grid_points"):
        grid = make_trapezoid_grid(np.asarray(meta["grid_points"], dtype=float))
    else:
        grid = uniform_grid(values.shape[1])
    return FunctionalSample(values, grid)


def cmd_fit(args) -> int:
    out = _out_dir(args)
    try:
        method = parse_method(args.method)
        sample = _load_sample(Path(args.input))
        moments = weighted_moments(sample)
        decomposition = eigendecompose(moments)
        cv = None
        if method.kind == "tikhonov" and method.cv:
            if args.cv_scheme == "holdout":
                grid = default_alpha_grid()
            else:
                grid = application_alpha_grid(float(decomposition.eigenvalues[0]))
            cv = cv_select_alpha(sample, grid, scheme=args.cv_scheme, n_folds=args.cv_folds)
            est = tikhonov_fit(moments, cv.selected_alpha, decomposition=decomposition)
            est = replace(est, tuning={**est.tuning, "selected_by": cv.scheme})
        else:
            est = fit_method(sample, method, moments=moments, decomposition=decomposition)
    except Exception as exc:
        _write_json(out / "fit.meta.json", {"kind": "error", "error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_matrix(out / "kernel.csv", est.kernel)
    meta = {
        "kind": "operator_fit",
        "method": args.method,
        "tuning": {k: (float(v) if isinstance(v, (int, float)) else v) for k, v in est.tuning.items()},
    }
    if cv is not None:
        meta["cv_scheme"] = cv.scheme
        meta["cv_curve"] = [[a, l] for a, l in cv.cv_curve]
    _write_json(out / "fit.meta.json", meta)
    print(f"fit {args.method}: tuning {est.tuning}")
    return 0


# ---------------------------------------------------------------------------
# benchmark


def _load_benchmark_config(args) -> BenchmarkConfig:
    data = {}
    if args.config:
        with open(args.config) as handle:
            data = json.load(handle)
        data.pop("schema_version", None)
    # command-line flags override config-file values override defaults
    if args.replications is not None:
        data["replications"] = args.replications
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.threads is not None:
        data["threads"] = args.threads
    return BenchmarkConfig.from_dict(data)


def write_records_csv(report, path: Path) -> None:
    """One row per cell result; timing stays out so reruns are byte-identical."""
    rows = [
        [r.regime, _fmt(r.n), r.method, _fmt(r.replication), _fmt(r.misfe), _fmt(r.tuning), r.error or ""]
        for r in report.records
    ]
    _write_csv(
        path,
        ["regime", "n", "method", "replication", "misfe", "tuning", "error"],
        rows,
    )


def cmd_benchmark(args) -> int:
    out = _out_dir(args)
    config = _load_benchmark_config(args)
    report = run_benchmark(config)
    write_records_csv(report, out / "records.csv")

    means = mean_misfe_table(report)
    regrets = regret_table(report)
    regret_rows = []
    for regime in config.regimes:
        for n in config.n_values:
            for method in config.methods:
                mean, _, count = means[(regime, n, method)]
                regret_rows.append(
                    [regime, _fmt(n), method, _fmt(mean), _fmt(count), _fmt(regrets[(regime, n, method)])]
                )
    _write_csv(
        out / "regret.csv",
        ["regime", "n", "method", "mean_misfe", "count", "regret_pct"],
        regret_rows,
    )

    worst = worst_case_table(report)
    _write_csv(
        out / "worst_case.csv",
        ["method", "n", "worst_mean_misfe"],
        [[m, _fmt(n), _fmt(worst[(m, n)])] for m in config.methods for n in config.n_values],
    )

    tunings = tuning_summary(report)
    _write_csv(
        out / "tuning.csv",
        ["regime", "n", "method", "mean_tuning"],
        [
            [regime, _fmt(n), method, _fmt(tunings[(regime, n, method)])]
            for regime in config.regimes
            for n in config.n_values
            for method in config.methods
        ],
    )

    try:
        slope = rate_slope_from_report(report)
    except ValueError:
        slope = None  # fewer than two sample sizes, or no cross-validated cells
    seconds_by_method: dict = {}
    for r in report.records:
        seconds_by_method[r.method] = seconds_by_method.get(r.method, 0.0) + r.seconds
    _write_json(
        out / "summary.json",
        {
            "kind": "benchmark_summary",
            "config": config.to_dict(),
            "rate_slope_log10_alpha_vs_log10_n": slope,
            "wall_clock_seconds": report.wall_clock_seconds,
            "fit_seconds_by_method": seconds_by_method,
            "failed_fits": sum(1 for r in report.records if r.failed),
        },
    )
    slope_text = "n/a" if slope is None else f"{slope:.3f}"
    print(
        f"benchmark: {len(report.records)} records, "
        f"rate slope {slope_text}, wall clock {report.wall_clock_seconds:.1f}s"
    )
    return 0


# ---------------------------------------------------------------------------
# rolling


def cmd_rolling(args) -> int:
    out = _out_dir(args)
    pipeline = PipelineConfig()
    records = load_halfhourly_csv(args.raw)
    complete = filter_and_interpolate(records, pipeline)
    prepared = preprocess_curves(complete, pipeline)

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    forecast_rows = []
    summary = []
    for label in methods:
        config = RollingConfig(
            window=args.window,
            refit_interval=args.refit,
            method=label,
            gap_policy=args.gap_policy,
        )
        result = rolling_forecast(prepared.sample, config, dates=prepared.dates)
        ises = np.array([r.ise for r in result.records if r.error is None])
        failures = sum(1 for r in result.records if r.error is not None)
        for r in result.records:
            forecast_rows.append(
                [
                    r.date.isoformat() if r.date else _fmt(r.index),
                    label,
                    _fmt(r.ise),
                    _fmt(r.tuning),
                    "1" if r.refit else "0",
                ]
            )
        summary.append(
            {
                "method": label,
                "mean_ise": float(ises.mean()) if ises.size else float("nan"),
                "median_ise": float(np.median(ises)) if ises.size else float("nan"),
                "evaluations": int(ises.size),
                "failures": failures,
                "skipped_gaps": result.skipped_gaps,
            }
        )

    best = min(s["mean_ise"] for s in summary if np.isfinite(s["mean_ise"]))
    for s in summary:
        s["regret_pct"] = 100.0 * (s["mean_ise"] - best) / best

    _write_csv(
        out / "forecasts.csv",
        ["date", "method", "ise", "alpha_or_k", "refit_flag"],
        forecast_rows,
    )
    _write_csv(
        out / "summary.csv",
        ["method", "mean_ise", "median_ise", "regret_pct", "evaluations", "failures"],
        [
            [s["method"], _fmt(s["mean_ise"]), _fmt(s["median_ise"]), _fmt(s["regret_pct"]), _fmt(s["evaluations"]), _fmt(s["failures"])]
            for s in summary
        ],
    )
    weekday_rows = [
        [name] + [_fmt(v) for v in prepared.weekday_means[i]]
        for i, name in enumerate(
            ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
        )
    ]
    _write_csv(
        out / "weekday_means.csv",
        ["weekday"] + [f"h{i:02d}" for i in range(1, 49)],
        weekday_rows,
    )
    _write_json(
        out / "rolling.meta.json",
        {
            "kind": "rolling_summary",
            "raw_file": str(args.raw),
            "kept_days": len(complete),
            "window": args.window,
            "refit_interval": args.refit,
            "gap_policy": args.gap_policy,
            "methods": methods,
            "summary": summary,
        },
    )
    print(f"rolling: {len(complete)} curves, {len(methods)} methods -> {out}")
    return 0


# ---------------------------------------------------------------------------
# verify


def _load_probes(path) -> list:
    with open(path) as handle:
        data = json.load(handle)
    if "probes" not in data or not isinstance(data["probes"], list):
        raise ValueError("probe config must carry a nonempty 'probes' list")
    if not data["probes"]:
        raise ValueError("probe list is empty")
    probes = []
    for entry in data["probes"]:
        probes.append(
            TheoryProbe.diagonal(
                beta=float(entry["beta"]),
                n_components=int(entry.get("n_components", 60)),
                eigen_decay=float(entry.get("eigen_decay", 2.0)),
                rho=float(entry.get("rho", 1.0)),
                eigen_scale=float(entry.get("eigen_scale", 1.0)),
            )
        )
    return probes


def cmd_verify(args) -> int:
    out = _out_dir(args)
    try:
        probes = _load_probes(args.probes) if args.probes else None
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    checks = run_verification_suite(probes)
    slope = None
    if not args.skip_diagnostics:
        slope, _ = operator_error_slope()
    payload = {
        "kind": "verification_report",
        "checks": [
            {"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks
        ],
        "estimation_error_slope_diagnostic": slope,
    }
    _write_json(out / "verify.json", payload)
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  ({c.detail})")
    if slope is not None:
        print(f"diagnostic: estimation-error slope vs n = {slope:.3f} (reported only)")
    if failed:
        print(f"{len(failed)} check(s) failed: {[c.name for c in failed]}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="farkit",
        description="Functional AR(1) estimation: simulate, fit, benchmark, roll, verify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a regime path to CSV")
    p.add_argument("--regime", required=True, help="regime id: I, II, or III")
    p.add_argument("--n", type=int, required=True, help="number of retained curves")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one estimator to a sample CSV")
    p.add_argument("--input", required=True, help="sample CSV (rows = curves)")
    p.add_argument(
        "--method",
        required=True,
        help="fpca:TAU | fpca:K=INT | tikhonov:ALPHA | tikhonov:cv",
    )
    p.add_argument("--cv-scheme", default="holdout", choices=["holdout", "k-fold-forward"])
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("benchmark", help="run the Monte Carlo benchmark grid")
    p.add_argument("--config", help="JSON config; omitted keys take defaults")
    p.add_argument("--replications", type=int, help="override replication count")
    p.add_argument("--seed", type=int, help="override master seed")
    p.add_argument("--threads", type=int, help="override worker thread count")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("rolling", help="preprocess raw half-hourly data and backtest")
    p.add_argument("--raw", required=True, help="CSV with header date,h01..h48")
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--refit", type=int, default=20)
    p.add_argument(
        "--methods",
        default="fpca:0.80,fpca:0.85,fpca:0.90,fpca:0.95,fpca:0.99,tikhonov:cv",
        help="comma-separated estimator ids",
    )
    p.add_argument(
        "--gap-policy", default="exclude-cross-gap", choices=["exclude-cross-gap", "contiguous"]
    )
    p.set_defaults(func=cmd_rolling)

    p = sub.add_parser("verify", help="run numerical self-checks")
    p.add_argument("--out", required=True)
    p.add_argument("--probes", help="JSON file with a 'probes' list of bias probes")
    p.add_argument(
        "--skip-diagnostics",
        action="store_true",
        help="skip the (slower) estimation-error slope diagnostic",
    )
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line harness.

Subcommands: calibrate, evaluate, sweep, ablate, simulate,
validate-guarantee. Exit codes: 0 success, 2 calibration infeasible
(minimal feasible alpha printed), 3 input format error, 4 argument error.

``--loss fdr`` selects the monotonized false-discovery loss for the
calibration-style commands (the selection rule needs a monotone loss);
``evaluate`` scores the raw pointwise loss at the given lambda.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .calibration import (
    BINARY_SEARCH,
    EXACT_BREAKPOINTS,
    GRID_SCAN,
    CalibrationInfeasible,
    calibrate,
)
from .evaluation import (
    ablate_splits,
    mean_predset_size,
    sweep,
    test_risk,
    validate_guarantee,
)
from .formats import FormatError, read_manifest, write_dataset
from .losses import FDR, FDR_MONOTONE, FNR, default_grid
from .reports import RunReport, write_report
from .synthetic import GeneratorParams, generate_dataset

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_FORMAT = 3
EXIT_ARGS = 4

_SEARCH_MODES = {"grid": GRID_SCAN, "binary": BINARY_SEARCH, "exact": EXACT_BREAKPOINTS}


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _loss_kind(name: str, monotone: bool):
    if name == "fnr":
        return FNR
    return FDR_MONOTONE if monotone else FDR


def _float_list(text: str, label: str):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise _ArgumentError(f"bad {label} list {text!r}")
    if not values:
        raise _ArgumentError(f"empty {label} list")
    return values


def _int_list(text: str, label: str):
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise _ArgumentError(f"bad {label} list {text!r}")
    if not values:
        raise _ArgumentError(f"empty {label} list")
    return values


def _int_pair(text: str, label: str):
    values = _int_list(text, label)
    if len(values) != 2:
        raise _ArgumentError(f"{label} must be 'lo,hi'")
    return (values[0], values[1])


def _report_format(path: str) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return "json"
    if suffix == ".csv":
        return "csv"
    raise _ArgumentError(f"report path must end in .csv or .json, got {path!r}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="riskcal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"riskcal {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("calibrate", help="select the risk-controlling threshold")
    p.add_argument("--manifest", required=True)
    p.add_argument("--loss", choices=("fnr", "fdr"), required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--grid-steps", type=int, default=1000)
    p.add_argument("--search", choices=tuple(_SEARCH_MODES), default="grid")
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score test records at a fixed lambda")
    p.add_argument("--manifest", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--loss", choices=("fnr", "fdr"), required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="calibrate/evaluate across risk levels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--loss", choices=("fnr", "fdr"), required=True)
    p.add_argument("--alphas", required=True)
    p.add_argument("--split-ratio", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-steps", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--fig-dir", default=None)

    p = sub.add_parser("ablate", help="split-ratio ablation protocol")
    p.add_argument("--manifest", required=True)
    p.add_argument("--loss", choices=("fnr", "fdr"), default="fnr")
    p.add_argument("--ratios", default="0.3,0.5,0.7")
    p.add_argument("--alphas", required=True)
    p.add_argument("--seeds", required=True)
    p.add_argument("--grid-steps", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--fig-dir", default=None)

    p = sub.add_parser("simulate", help="emit a synthetic PMAP/PGM dataset")
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--signal", type=float, default=0.85)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--background", type=float, default=0.15)
    p.add_argument("--blob-count", default="1,3")
    p.add_argument("--blob-radius", default="2,6")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("validate-guarantee", help="Monte Carlo audit of the risk guarantee")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--loss", choices=("fnr", "fdr"), required=True)
    p.add_argument("--n-cal", type=int, default=200)
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--trials", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--signal", type=float, default=0.85)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--background", type=float, default=0.15)
    p.add_argument("--grid-steps", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.add_argument("--fig-dir", default=None)

    return parser


def _generator_params(args) -> GeneratorParams:
    kwargs = dict(
        height=args.height,
        width=args.width,
        signal=args.signal,
        noise_sigma=args.noise,
        background_level=args.background,
    )
    if hasattr(args, "blob_count"):
        kwargs["blob_count_range"] = _int_pair(args.blob_count, "blob count")
        kwargs["blob_radius_range"] = _int_pair(args.blob_radius, "blob radius")
    try:
        return GeneratorParams(**kwargs)
    except ValueError as exc:
        raise _ArgumentError(str(exc))


def _run(args) -> RunReport:
    if args.subcommand == "calibrate":
        records = read_manifest(args.manifest)
        grid = default_grid(args.grid_steps)
        profile = calibrate(
            records,
            _loss_kind(args.loss, monotone=True),
            args.alpha,
            lambdas=grid,
            search_mode=_SEARCH_MODES[args.search],
        )
        print(
            f"lambda_hat={profile.lambda_hat:.6g} "
            f"empirical_risk={profile.empirical_risk_at_lambda_hat:.6g} "
            f"n={profile.n_calibration}"
        )
        return RunReport(
            tool_version=__version__,
            command="calibrate",
            params={
                "manifest": str(args.manifest),
                "loss": args.loss,
                "alpha": args.alpha,
                "grid_steps": args.grid_steps,
                "search": args.search,
            },
            profile=profile,
        )

    if args.subcommand == "evaluate":
        records = read_manifest(args.manifest)
        kind = _loss_kind(args.loss, monotone=False)
        risk = test_risk(records, args.lam, kind)
        size = mean_predset_size(records, args.lam)
        print(f"test_risk={risk:.6g} mean_predset_size={size:.6g} n={len(records)}")
        return RunReport(
            tool_version=__version__,
            command="evaluate",
            params={"manifest": str(args.manifest), "loss": args.loss, "lambda": args.lam},
            evaluation={
                "loss": args.loss,
                "lambda": args.lam,
                "test_risk": risk,
                "mean_predset_size": size,
                "n_test": len(records),
            },
        )

    if args.subcommand == "sweep":
        records = read_manifest(args.manifest)
        rows = sweep(
            records,
            _float_list(args.alphas, "alpha"),
            _loss_kind(args.loss, monotone=True),
            split_ratio=args.split_ratio,
            seed=args.seed,
            lambdas=default_grid(args.grid_steps),
        )
        if args.fig_dir:
            from .plots import plot_sweep

            plot_sweep(rows, args.fig_dir)
        print(f"sweep: {len(rows)} rows, {sum(1 for r in rows if not r.feasible)} infeasible")
        return RunReport(
            tool_version=__version__,
            command="sweep",
            params={
                "manifest": str(args.manifest),
                "loss": args.loss,
                "alphas": args.alphas,
                "split_ratio": args.split_ratio,
                "seed": args.seed,
                "grid_steps": args.grid_steps,
            },
            sweep_rows=rows,
        )

    if args.subcommand == "ablate":
        records = read_manifest(args.manifest)
        rows = ablate_splits(
            records,
            _float_list(args.ratios, "ratio"),
            _float_list(args.alphas, "alpha"),
            _loss_kind(args.loss, monotone=True),
            seeds=_int_list(args.seeds, "seed"),
            lambdas=default_grid(args.grid_steps),
        )
        if args.fig_dir:
            from .plots import plot_ablation

            plot_ablation(rows, args.fig_dir)
        n_pass = sum(1 for r in rows if r.control_status == "pass")
        print(f"ablate: {n_pass}/{len(rows)} cells pass")
        return RunReport(
            tool_version=__version__,
            command="ablate",
            params={
                "manifest": str(args.manifest),
                "loss": args.loss,
                "ratios": args.ratios,
                "alphas": args.alphas,
                "seeds": args.seeds,
                "grid_steps": args.grid_steps,
            },
            ablation_rows=rows,
        )

    if args.subcommand == "simulate":
        if args.n < 1:
            raise _ArgumentError("--n must be >= 1")
        params = _generator_params(args)
        records = generate_dataset(params, args.n, master_seed=args.seed)
        manifest_path = write_dataset(records, args.out_dir)
        print(f"wrote {len(records)} samples to {manifest_path}")
        return None

    if args.subcommand == "validate-guarantee":
        params = _generator_params(args)
        report = validate_guarantee(
            params,
            args.alpha,
            _loss_kind(args.loss, monotone=True),
            n_cal=args.n_cal,
            n_test=args.n_test,
            trials=args.trials,
            seed=args.seed,
            lambdas=default_grid(args.grid_steps),
        )
        if args.fig_dir:
            from .plots import plot_guarantee

            plot_guarantee(report, args.fig_dir)
        print(
            f"mean_test_risk={report.mean_test_risk:.6g} "
            f"std_error={report.std_error:.3g} "
            f"violation_fraction={report.violation_fraction:.3g} "
            f"(alpha={report.alpha:g}, trials={report.trials})"
        )
        return RunReport(
            tool_version=__version__,
            command="validate-guarantee",
            params={
                "loss": args.loss,
                "alpha": args.alpha,
                "n_cal": args.n_cal,
                "n_test": args.n_test,
                "trials": args.trials,
                "seed": args.seed,
                "height": args.height,
                "width": args.width,
                "signal": args.signal,
                "noise": args.noise,
                "background": args.background,
                "grid_steps": args.grid_steps,
            },
            guarantee=report,
        )

    raise _ArgumentError(f"unknown subcommand {args.subcommand!r}")


def main(argv=None) -> int:
    parser = _build_parser()
    start = time.monotonic()
    try:
        args = parser.parse_args(argv)
        fmt = _report_format(args.out) if getattr(args, "out", None) else None
        report = _run(args)
    except _ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except CalibrationInfeasible as exc:
        print(
            f"calibration infeasible: {exc} ",
            file=sys.stderr,
        )
        return EXIT_INFEASIBLE
    except (FormatError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    if report is not None:
        report.duration_seconds = time.monotonic() - start
        write_report(report, args.out, fmt)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

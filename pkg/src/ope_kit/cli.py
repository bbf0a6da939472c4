"""Command-line interface.

Subcommands: ``example1`` and ``example2`` run the synthetic benchmarks,
``uci`` runs the classification-to-bandit protocol on a local dataset,
``sweep`` traces performance against evaluation sample size, and
``selftest`` runs a quick property suite.  Exit codes: 0 success, 2
configuration error, 1 runtime error.
"""
from __future__ import annotations

import argparse
import sys
import traceback

import numpy as np

from .errors import OpeKitError, SizeTooLarge
from .harness import (
    LOGGING_MODES,
    RunConfig,
    DatasetSchema,
    parse_estimator_tag,
    run_monte_carlo,
    sample_size_sweep,
)
from .reporting import (
    ReportRow,
    render_sweep_svg,
    rows_from_summary,
    sweep_rows,
    write_report,
    format_number,
)
from .spline import SplineSpec
from .synthetic import SCENARIOS


def _comma_ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _comma_floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _comma_names(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _add_spline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--segments", type=int, default=None,
                        help="knot intervals (default: chosen from the sample size)")
    parser.add_argument("--degree", type=int, default=3, help="basis degree")
    parser.add_argument("--lambda-grid", type=_comma_floats, default=None,
                        metavar="L1,L2,...",
                        help="candidate smoothing weights (default: 25-point log grid)")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--out", default=None, help="output file path")
    parser.add_argument("--format", choices=("csv", "tsv", "json"), default=None,
                        help="output format (default: csv; sweep defaults to tsv)")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker processes (0 = auto, capped by OPE_KIT_THREADS)")
    _add_spline_flags(parser)


def _spline_from_args(args) -> SplineSpec | None:
    if args.segments is None and args.degree == 3 and args.lambda_grid is None:
        return None
    kwargs = {"degree": args.degree}
    if args.segments is not None:
        kwargs["segments"] = args.segments
    if args.lambda_grid is not None:
        kwargs["lambda_grid"] = tuple(args.lambda_grid)
    return SplineSpec(**kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ope-kit",
        description="Off-policy evaluation benchmarks for contextual bandits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p1 = sub.add_parser("example1", help="squared-normal rewards benchmark")
    p1.add_argument("--n", type=int, default=300, help="contexts per draw")
    p1.add_argument("--k", type=int, default=20, help="arms")
    p1.add_argument("--reps", type=int, default=2000, help="Monte Carlo draws")
    p1.add_argument("--scenarios", type=_comma_names, default=list(SCENARIOS))
    p1.add_argument("--estimators", type=_comma_names, default=["sw", "ipw", "nw"])
    _add_common_flags(p1)

    p2 = sub.add_parser("example2", help="two-component rewards benchmark with a baseline model")
    p2.add_argument("--n", type=int, default=300)
    p2.add_argument("--k", type=int, default=20)
    p2.add_argument("--reps", type=int, default=2000)
    p2.add_argument("--scenarios", type=_comma_names, default=list(SCENARIOS))
    p2.add_argument(
        "--estimators", type=_comma_names,
        default=["sw", "ipw", "nw", "mnw(beta=0.5)", "mnw(beta=1)"],
    )
    _add_common_flags(p2)

    pu = sub.add_parser("uci", help="classification-to-bandit protocol on a local dataset")
    pu.add_argument("--data", required=True, help="CSV dataset path")
    pu.add_argument("--schema", default=None, help="JSON schema sidecar path")
    pu.add_argument("--logging", choices=LOGGING_MODES, default="true")
    pu.add_argument("--estimators", type=_comma_names,
                    default=["dm", "ipw", "dr", "nw", "mnw"])
    pu.add_argument("--mc-iters", type=int, default=500)
    pu.add_argument("--repetitions", type=int, default=20)
    pu.add_argument("--noise-sigma", type=float, default=0.2)
    pu.add_argument("--eval-size", type=int, default=None,
                    help="evaluation subsample per iteration (default: full test half)")
    _add_common_flags(pu)

    ps = sub.add_parser("sweep", help="performance across evaluation sample sizes")
    ps.add_argument("--data", required=True,
                    help="CSV dataset path, or example1/example2 for synthetic mode")
    ps.add_argument("--schema", default=None)
    ps.add_argument("--scenario", choices=SCENARIOS, default="decreasing",
                    help="synthetic mode scenario")
    ps.add_argument("--k", type=int, default=20, help="synthetic mode arms")
    ps.add_argument("--sizes", type=_comma_ints, required=True, metavar="N1,N2,...")
    ps.add_argument("--logging", choices=LOGGING_MODES, default="true")
    ps.add_argument("--estimators", type=_comma_names, default=None,
                    help="default: ipw,nw for synthetic, dm,ipw,dr,nw,mnw otherwise")
    ps.add_argument("--mc-iters", type=int, default=500)
    ps.add_argument("--repetitions", type=int, default=5)
    ps.add_argument("--noise-sigma", type=float, default=0.2)
    ps.add_argument("--svg", default=None, help="also render a chart to this path")
    _add_common_flags(ps)

    pt = sub.add_parser("selftest", help="run the built-in property suite")
    pt.add_argument("--seed", type=int, default=0)

    return parser


def _print_summary_rows(rows: list[ReportRow]) -> None:
    headers = ("condition", "logging", "estimator", "bias", "sd", "rmse")
    table = [
        (r.condition, r.logging_mode, r.estimator,
         format_number(r.bias), format_number(r.sd), format_number(r.rmse))
        for r in rows
    ]
    widths = [max(len(h), *(len(t[i]) for t in table)) for i, h in enumerate(headers)]
    print("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
    for t in table:
        print("  ".join(c.ljust(w) for c, w in zip(t, widths)))


def _cmd_examples(args, dataset: str) -> int:
    spline = _spline_from_args(args)
    rows: list[ReportRow] = []
    for scenario in args.scenarios:
        config = RunConfig(
            dataset=dataset,
            scenario=scenario,
            n=args.n,
            n_actions=args.k,
            mc_iterations=args.reps,
            repetitions=1,
            master_seed=args.seed,
            estimators=tuple(args.estimators),
            spline=spline,
            threads=args.threads,
        )
        config.validate()
        rows.extend(rows_from_summary(run_monte_carlo(config)))
    _print_summary_rows(rows)
    if args.out:
        write_report(rows, args.out, args.format or "csv")
        print(f"wrote {args.out}")
    return 0


def _cmd_uci(args) -> int:
    schema = DatasetSchema.from_json(args.schema) if args.schema else None
    config = RunConfig(
        dataset=args.data,
        mc_iterations=args.mc_iters,
        repetitions=args.repetitions,
        logging_mode=args.logging,
        noise_sigma=args.noise_sigma,
        master_seed=args.seed,
        estimators=tuple(args.estimators),
        spline=_spline_from_args(args),
        eval_sample_size=args.eval_size,
        threads=args.threads,
        schema=schema,
    )
    config.validate()
    rows = rows_from_summary(run_monte_carlo(config))
    _print_summary_rows(rows)
    if args.out:
        write_report(rows, args.out, args.format or "csv")
        print(f"wrote {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    schema = DatasetSchema.from_json(args.schema) if args.schema else None
    synthetic = args.data in ("example1", "example2")
    estimators = args.estimators
    if estimators is None:
        estimators = ["ipw", "nw"] if synthetic else ["dm", "ipw", "dr", "nw", "mnw"]
    config = RunConfig(
        dataset=args.data,
        scenario=args.scenario,
        n_actions=args.k,
        mc_iterations=args.mc_iters,
        repetitions=args.repetitions,
        logging_mode=args.logging,
        noise_sigma=args.noise_sigma,
        master_seed=args.seed,
        estimators=tuple(estimators),
        spline=_spline_from_args(args),
        threads=args.threads,
        schema=schema,
    )
    config.validate()
    series = sample_size_sweep(config, args.sizes)
    rows = sweep_rows(series)
    for row in rows:
        print(
            f"size={row.size} {row.estimator}: rmse={format_number(row.rmse)} "
            f"bias={format_number(row.bias)}"
        )
    if args.out:
        write_report(rows, args.out, args.format or "tsv")
        print(f"wrote {args.out}")
    if args.svg:
        render_sweep_svg(rows, args.svg)
        print(f"wrote {args.svg}")
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    failures = run_selftest(seed=args.seed)
    return 1 if failures else 0


def _validate_args(args) -> None:
    for name in ("estimators",):
        tags = getattr(args, name, None)
        if tags:
            for tag in tags:
                parse_estimator_tag(tag)
    sizes = getattr(args, "sizes", None)
    if sizes is not None and any(s < 1 for s in sizes):
        raise ValueError("sizes must be positive")


def run_cli(argv=None) -> int:
    """Parse arguments and run the selected subcommand; returns an exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        _validate_args(args)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "example1":
            return _cmd_examples(args, "example1")
        if args.command == "example2":
            return _cmd_examples(args, "example2")
        if args.command == "uci":
            return _cmd_uci(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_selftest(args)
    except SizeTooLarge as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OpeKitError as exc:
        print(f"run failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        # Bad flag combinations surface as ValueError before any heavy work.
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"run failed (i/o): {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - unexpected failures
        traceback.print_exc()
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return run_cli(argv)


if __name__ == "__main__":
    sys.exit(main())

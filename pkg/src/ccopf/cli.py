"""Command line interface.

Subcommands: run (experiments on a grid case), nsamples (certified
scenario counts), sweep1d (hard-offset versus sample-count trade on the
1-D problem), validate (quick self-checks). Exit codes: 0 success,
1 usage or failed validation, 2 unreadable or invalid input data,
3 solver breakdown. The CCOPF_SEED environment variable, when set,
overrides any --seed argument.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .grid import CaseError
from .kernels import BACKEND, norm_isf, norm_sf
from .scenario import SolverError, sample_size_cc, sample_size_filtered, sample_size_is
from .validation import (
    METHODS,
    ExperimentConfig,
    ExperimentReport,
    load_case_ref,
    resolve_scenario_count,
    run_experiment,
    solve_1d_synthetic,
    sweep_1d,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad arguments; usage errors are 1 here
    def error(self, message):
        raise _UsageError(message)


def _fmt(value) -> str:
    """Shortest round-trip text for floats; stable across runs."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ccopf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run dispatch experiments on a case")
    run.add_argument("--case", required=True, help="case file path or bundled name")
    run.add_argument(
        "--method",
        action="append",
        default=None,
        help=f"one of {', '.join(METHODS)}; repeat or comma-separate for several",
    )
    run.add_argument("--eta", type=float, default=0.05, help="violation level")
    run.add_argument(
        "--scenarios",
        default="auto",
        help="scenario count, or 'auto' for the certified bound",
    )
    run.add_argument("--reps", type=int, default=50, help="independent repetitions")
    run.add_argument("--seed", type=int, default=0, help="base seed")
    run.add_argument(
        "--sigma", type=float, default=0.07, help="relative injection fluctuation"
    )
    run.add_argument(
        "--ntest", type=int, default=1000, help="out-of-sample deviations per repetition"
    )
    run.add_argument(
        "--delta", type=float, default=0.01, help="confidence for 'auto' counts"
    )
    run.add_argument("--jobs", type=int, default=1, help="parallel workers")
    run.add_argument("--out", default=None, help="JSON report path; CSVs written beside it")

    ns = sub.add_parser("nsamples", help="print certified scenario counts")
    ns.add_argument("--eta", type=float, required=True, help="violation level")
    ns.add_argument("--delta", type=float, required=True, help="confidence")
    ns.add_argument("--d", type=int, required=True, help="decision dimension")
    ns.add_argument("--pi", type=float, default=None, help="covered probability mass")
    ns.add_argument("--M", type=float, default=None, help="likelihood ratio bound")

    sweep = sub.add_parser("sweep1d", help="sample count versus hard offset, 1-D problem")
    sweep.add_argument("--a", type=float, default=0.0, help="row offset")
    sweep.add_argument("--eta", type=float, default=0.05, help="violation level")
    sweep.add_argument("--delta", type=float, default=0.01, help="confidence")
    sweep.add_argument("--grid", type=int, default=9, help="number of offsets")
    sweep.add_argument("--reps", type=int, default=200, help="repetitions per offset")
    sweep.add_argument("--seed", type=int, default=0, help="base seed")
    sweep.add_argument("--out", default=None, help="CSV path; stdout when omitted")

    val = sub.add_parser("validate", help="quick numerical self-checks")
    val.add_argument("--seed", type=int, default=0, help="base seed")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"ccopf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)

    if hasattr(args, "seed") and "CCOPF_SEED" in os.environ:
        try:
            args.seed = int(os.environ["CCOPF_SEED"])
        except ValueError:
            print(
                f"ccopf: error: CCOPF_SEED={os.environ['CCOPF_SEED']!r} is not an integer",
                file=sys.stderr,
            )
            return EXIT_USAGE

    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "nsamples":
            return _cmd_nsamples(args)
        if args.command == "sweep1d":
            return _cmd_sweep(args)
        return _cmd_validate(args)
    except _UsageError as exc:
        print(f"ccopf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, CaseError) as exc:
        # before ValueError: CaseError subclasses it but is a data problem
        print(f"ccopf: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"ccopf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"ccopf: error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


# ---------------------------------------------------------------------------
# run

def _parse_methods(raw: list[str] | None) -> tuple[str, ...]:
    if not raw:
        return ("sa-is",)
    methods: list[str] = []
    for item in raw:
        methods.extend(part.strip() for part in item.split(",") if part.strip())
    return tuple(methods)


def _parse_scenarios(raw: str) -> int | str:
    if raw == "auto":
        return "auto"
    try:
        return int(raw)
    except ValueError:
        raise _UsageError(f"--scenarios must be an integer or 'auto', got {raw!r}") from None


def _cmd_run(args) -> int:
    config = ExperimentConfig(
        case=args.case,
        methods=_parse_methods(args.method),
        eta=args.eta,
        scenarios=_parse_scenarios(args.scenarios),
        reps=args.reps,
        sigma_frac=args.sigma,
        seed=args.seed,
        n_test=args.ntest,
        delta=args.delta,
        jobs=args.jobs,
    )
    case = load_case_ref(config.case)
    for method in config.methods:
        n = resolve_scenario_count(config, case, method)
        origin = "fixed" if config.scenarios != "auto" or method == "dc-opf" else "certified bound"
        print(f"{method}: {n} scenarios ({origin})")

    report = run_experiment(config)

    for method, entry in report.summary().items():
        if entry.get("optimal", 0):
            print(
                f"{method}: {entry['optimal']}/{entry['reps']} optimal, "
                f"mean cost {entry['mean_objective']:.2f} $/h, "
                f"mean confidence {entry['mean_confidence']:.4f}"
            )
        else:
            print(f"{method}: 0/{entry['reps']} optimal")

    if args.out is not None:
        _write_report(report, Path(args.out))
    return EXIT_OK


def _write_report(report: ExperimentReport, out: Path):
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    _write_records_csv(report, out.with_suffix(".csv"))
    if len(report.config.methods) > 1:
        summary_path = out.with_name(out.stem + "_summary.csv")
        _write_summary_csv(report, summary_path)
    print(f"report written to {out}")


def _write_records_csv(report: ExperimentReport, path: Path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["method", "rep", "seed", "n_scenarios", "status", "objective",
             "confidence", "conf_stderr"]
        )
        for r in report.records:
            writer.writerow(
                [r.method, r.rep, r.seed, r.n_scenarios, r.status,
                 _fmt(r.objective), _fmt(r.confidence), _fmt(r.conf_stderr)]
            )


def _write_summary_csv(report: ExperimentReport, path: Path):
    summary = report.summary()
    columns = ["method", "n_scenarios", "optimal", "reps", "mean_objective",
               "min_objective", "max_objective", "mean_confidence", "min_confidence"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for method in report.config.methods:
            entry = summary[method]
            writer.writerow([method] + [_fmt(entry.get(c, math.nan)) for c in columns[1:]])


# ---------------------------------------------------------------------------
# nsamples / sweep1d / validate

def _cmd_nsamples(args) -> int:
    print(f"classical: {sample_size_cc(args.eta, args.delta, args.d)}")
    if args.pi is not None:
        print(f"filtered: {sample_size_filtered(args.eta, args.delta, args.d, args.pi)}")
        if args.M is not None:
            print(
                "importance: "
                f"{sample_size_is(args.eta, args.delta, args.d, args.pi, args.M)}"
            )
    elif args.M is not None:
        raise _UsageError("--M requires --pi")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    rows = sweep_1d(args.a, args.eta, args.delta, args.grid, args.reps, args.seed)
    header = ["hard_offset", "feasibility_rate", "n_scenarios"]
    if args.out is None:
        print(",".join(header))
        for b, rate, n in rows:
            print(f"{_fmt(b)},{_fmt(rate)},{n}")
    else:
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for b, rate, n in rows:
                writer.writerow([_fmt(b), _fmt(rate), str(n)])
        print(f"sweep written to {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    checks: list[tuple[str, bool]] = []

    grid = np.array([1e-9, 1e-6, 1e-3, 0.01, 0.05, 0.1, 0.25, 0.5])
    roundtrip = float(np.max(np.abs(norm_sf(norm_isf(grid)) - grid) / grid))
    checks.append((f"quantile round-trip (max rel err {roundtrip:.2e})", roundtrip < 1e-10))

    conservative = True
    for k in range(20):
        x_hat, _gap = solve_1d_synthetic(0.0, 0.05, "sa-is", 50, args.seed + k)
        conservative &= x_hat <= -float(norm_isf(0.05)) + 1e-9
    checks.append(("1-D tightened runs stay conservative", conservative))

    x_hat, gap = solve_1d_synthetic(0.0, 0.05, "sa-is", 0, args.seed)
    checks.append((f"1-D margin-only gap is zero (gap {gap:.2e})", abs(gap) < 1e-12))

    print(f"kernel backend: {BACKEND}")
    ok = True
    for label, passed in checks:
        print(f"{'PASS' if passed else 'FAIL'}: {label}")
        ok &= passed
    return EXIT_OK if ok else EXIT_USAGE

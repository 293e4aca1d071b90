"""lvspeedup: collect -> fit -> predict -> simulate -> parallel -> report.

Every stage reads and writes plain CSV/JSON so that runtime samples from
any Las Vegas algorithm can enter at ``fit``.  Exit codes: 0 success,
2 usage error, 3 data error, 4 statistical rejection without --force.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from . import io as lvio
from .distributions import (Family, InvalidParameters, QuadratureError, RuntimeDistribution,
                            SpeedupCurve, speedup_curve)
from .fitting import (DEFAULT_THRESHOLD, DegenerateSample, EmpiricalSample, FitReport,
                      SampleError, best_fit, fit_all)
from .multiwalk import (MissingBaseline, bootstrap_speedup, measure_parallel_speedup,
                        speedup_from_winners)
from .problems import PermutationProblem, ProblemKind
from .report import JoinError, build_report
from .solver import SolverError, SolverParams, collect

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_REJECTED = 0, 2, 3, 4


class UsageError(Exception):
    pass


class Rejected(Exception):
    pass


# argument types -----------------------------------------------------------

def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {value}")
    return value


def fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1], got {value}")
    return value


def int_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError(f"list must be strictly increasing, got {text!r}")
    return values


# parser -------------------------------------------------------------------

def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--problem", required=True, choices=[k.value for k in ProblemKind])
    g.add_argument("--n", required=True, type=positive_int, help="problem order")
    g.add_argument("--seed", type=int, default=0, help="base seed (run k uses seed+k)")
    g.add_argument("--tabu", type=nonneg_int, default=10, help="tabu tenure (iterations)")
    g.add_argument("--reset-fraction", type=fraction, default=0.25)
    g.add_argument("--reset-trigger", type=positive_int, default=None,
                   help="tabu-marked variables that trigger a reset (default: variables/10)")
    g.add_argument("--max-iterations", type=positive_int, default=None,
                   help="restart from scratch after this many iterations")
    g.add_argument("--iteration-cap", type=positive_int, default=None,
                   help="abandon a walk after this many iterations (runs marked unsolved)")


def _add_cores(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--cores", type=int_list, help="comma-separated core counts, e.g. 16,32,64")
    g.add_argument("--cores-upto", type=positive_int, metavar="N", help="every core count 1..N")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="flat key=value file of flag defaults")
    common.add_argument("-q", "--quiet", action="store_true", help="no progress or summaries on stderr")

    parser = argparse.ArgumentParser(
        prog="lvspeedup",
        description="Predict and measure multi-walk speedups of Las Vegas algorithms.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("collect", parents=[common], help="run the solver sequentially, write runs CSV")
    _add_solver_flags(p)
    p.add_argument("--runs", type=positive_int, required=True)
    p.add_argument("--jobs", type=positive_int, default=1, help="worker processes (results unchanged)")
    p.add_argument("-o", "--output", help="runs CSV (default: stdout)")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("fit", parents=[common], help="estimate and KS-test runtime distributions")
    p.add_argument("--input", required=True, help="runs CSV (or any CSV with an iterations/seconds column)")
    p.add_argument("--family", default="all",
                   help="exp, lognormal, gaussian, all, or a comma list (default: all)")
    p.add_argument("--threshold", type=probability, default=DEFAULT_THRESHOLD)
    p.add_argument("--unit", choices=["iterations", "seconds"], default="iterations")
    p.add_argument("-o", "--output", help="report JSON (default: stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="predicted speedup curve from a fit")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--fit", help="FitReport JSON (object or list) or a distribution JSON")
    src.add_argument("--family", help="give parameters directly: exp, lognormal or gaussian")
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    _add_cores(p)
    p.add_argument("--with-limit", action="store_true", help="also report the limit for non-exponential fits")
    p.add_argument("--force", action="store_true", help="predict even from a rejected fit")
    p.add_argument("-o", "--output", help="curve CSV (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", parents=[common], help="bootstrap min-resampling speedups")
    p.add_argument("--input", required=True, help="runs CSV")
    p.add_argument("--unit", choices=["iterations", "seconds"], default="iterations")
    _add_cores(p)
    p.add_argument("--resamples", type=positive_int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="bootstrap CSV (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("parallel", parents=[common], help="race walks first-wins, measure speedup")
    _add_solver_flags(p)
    p.add_argument("--workers", type=int_list, required=True, help="worker count(s), e.g. 8 or 2,4,8")
    p.add_argument("--trials", type=positive_int, default=50)
    p.add_argument("--baseline", required=True, help="sequential runs CSV of the same problem")
    p.add_argument("-o", "--output", help="parallel CSV (default: stdout)")
    p.set_defaults(func=cmd_parallel)

    p = sub.add_parser("report", parents=[common], help="join stage outputs into a comparison table")
    p.add_argument("--predict", help="curve CSV from predict")
    p.add_argument("--simulate", help="bootstrap CSV from simulate")
    p.add_argument("--parallel", help="parallel CSV (needs --baseline)")
    p.add_argument("--baseline", help="runs CSV used for measured speedups")
    p.add_argument("--fit", help="FitReport JSON, for the fit summary line")
    p.add_argument("--label", help="problem label (default: from the inputs)")
    p.add_argument("--csv", help="also write the table as CSV")
    p.add_argument("--json", help="also write the report as JSON")
    p.add_argument("-o", "--output", help="text table (default: stdout)")
    p.set_defaults(func=cmd_report)
    return parser


def _config_args(argv: list[str]) -> list[str]:
    """Splice ``--config`` key=value lines into argv as flags after the
    subcommand, so explicit flags still win."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    path = Path(known.config)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise lvio.DataError(f"cannot read config {path}: {exc.strerror}") from None
    extra = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{line_no}: expected key=value, got {raw!r}")
        flag = "--" + key.strip().replace("_", "-")
        value = value.strip()
        if value.lower() in ("true", "yes", "on"):
            extra.append(flag)
        elif value.lower() not in ("false", "no", "off"):
            extra += [flag, value]
    commands = {"collect", "fit", "predict", "simulate", "parallel", "report"}
    idx = next((i for i, a in enumerate(argv) if a in commands), None)
    if idx is None:
        return argv
    return argv[: idx + 1] + extra + argv[idx + 1:]


# helpers ------------------------------------------------------------------

def _emit(text: str, path: Optional[str]) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _note(args, msg: str) -> None:
    if not getattr(args, "quiet", False):
        print(msg, file=sys.stderr)


def _cores(args) -> list[int]:
    return args.cores if args.cores else list(range(1, args.cores_upto + 1))


def _problem_and_params(args):
    problem = PermutationProblem(ProblemKind(args.problem), args.n)
    params = SolverParams(tabu_tenure=args.tabu, reset_fraction=args.reset_fraction,
                          reset_trigger=args.reset_trigger, max_iterations=args.max_iterations,
                          rng_seed=args.seed)
    return problem, params


def _load_sample(path, unit="iterations") -> EmpiricalSample:
    p = Path(path)
    if not p.exists():
        raise lvio.DataError(f"cannot read {p}: no such file")
    return EmpiricalSample.from_csv(p, unit=unit)


def summary_table(rows: Sequence[tuple]) -> str:
    """Min/Mean/Median/Max table; rows are (label, EmpiricalSample)."""
    head = ("Problem", "Runs", "Min", "Mean", "Median", "Max")
    body = [(label, str(s.size), *(f"{v:,.2f}".rstrip("0").rstrip(".") for v in
                                   (s.min, s.mean, s.median, s.max))) for label, s in rows]
    widths = [max(len(r[i]) for r in (head, *body)) for i in range(len(head))]

    def fmt(r):
        return "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))

    return "\n".join([fmt(head), "-" * len(fmt(head)), *map(fmt, body)]) + "\n"


# commands -----------------------------------------------------------------

def cmd_collect(args) -> int:
    problem, params = _problem_and_params(args)
    step = max(1, args.runs // 10)

    def progress(done, total, rec):
        if done % step == 0 or done == total:
            _note(args, f"  {done}/{total} runs")

    col = collect(problem, params, args.runs, jobs=args.jobs, iteration_cap=args.iteration_cap,
                  progress=None if args.quiet else progress)
    buf = io.StringIO()
    lvio.write_runs_csv(col.runs, buf)
    _emit(buf.getvalue(), args.output)
    unsolved = sum(not r.solved for r in col.runs)
    if args.output not in (None, "-"):
        lvio.write_sidecar(args.output, lvio.metadata(
            "collect", problem=problem.label, runs=args.runs, seeds=[args.seed, args.seed + args.runs - 1],
            solver_params=params.as_dict(), effective_reset_trigger=params.trigger_for(problem),
            iteration_cap=args.iteration_cap, unsolved=unsolved))
    if not args.quiet:
        its = col.iterations()
        if its.size and its.min() > 0:
            sys.stderr.write(summary_table([(problem.label, col.iterations_sample())]))
        if unsolved:
            _note(args, f"warning: {unsolved} run(s) hit the iteration cap unsolved")
    return EXIT_OK


def _families(text: str) -> list[Family]:
    if text.strip().lower() == "all":
        return list(Family)
    try:
        return [Family.parse(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"unknown family in {text!r}; use exp, lognormal, gaussian or all") from None


def cmd_fit(args) -> int:
    families = _families(args.family)
    if not families:
        raise UsageError("no family given")
    sample = _load_sample(args.input, args.unit)
    reports = fit_all(sample, families, args.threshold)
    payload = [r.to_dict() for r in reports]
    text = json.dumps(payload if len(payload) > 1 else payload[0], indent=2) + "\n"
    _emit(text, args.output)
    if not args.quiet:
        for r in reports:
            if r.error:
                _note(args, f"{r.family:12s} error: {r.error}")
            else:
                _note(args, f"{r.family:12s} D={r.ks_statistic:.4f} p={r.p_value:.4g} {r.verdict:8s} "
                            f"{r.dist.describe()}")
    return EXIT_OK


def _dist_from_fit_file(args) -> RuntimeDistribution:
    data = lvio.read_json(args.fit)
    if isinstance(data, dict) and "family" in data and "dist" not in data and "verdict" not in data:
        return RuntimeDistribution.from_dict(data)
    items = data if isinstance(data, list) else [data]
    try:
        reports = [FitReport.from_dict(d) for d in items]
    except (SampleError, AttributeError, InvalidParameters) as exc:
        raise lvio.DataError(f"{args.fit}: {exc}") from None
    chosen = best_fit(reports)
    if chosen is not None:
        return chosen.dist
    usable = [r for r in reports if r.dist is not None]
    if not usable:
        raise lvio.DataError(f"{args.fit}: no fitted distribution in file")
    top = max(usable, key=lambda r: r.p_value or 0.0)
    msg = f"warning: fit rejected ({top.family}, p={top.p_value:.4g} < {top.threshold:g})"
    if not args.force:
        print(msg + "; rerun with --force to predict anyway", file=sys.stderr)
        raise Rejected(msg)
    print(msg + "; proceeding because of --force", file=sys.stderr)
    return top.dist


def cmd_predict(args) -> int:
    if args.fit:
        dist = _dist_from_fit_file(args)
    else:
        try:
            fam = Family.parse(args.family)
        except ValueError:
            raise UsageError(f"unknown family {args.family!r}") from None
        if fam is Family.EXPONENTIAL:
            if args.lam is None:
                raise UsageError("--lambda is required for the exponential")
            dist = RuntimeDistribution.exponential(args.x0, args.lam)
        else:
            if args.mu is None or args.sigma is None:
                raise UsageError(f"--mu and --sigma are required for {fam.value}")
            dist = RuntimeDistribution(fam, args.x0, mu=args.mu, sigma=args.sigma)
    curve = speedup_curve(dist, _cores(args), with_limit=args.with_limit or None)
    _emit(curve.to_csv(), args.output)
    if args.output not in (None, "-"):
        lvio.write_sidecar(args.output, lvio.metadata("predict", dist=dist.to_dict()))
    _note(args, f"predicted from {dist.describe()}"
                + (f"; limit {curve.limit:.6g}" if curve.limit is not None else ""))
    return EXIT_OK


def cmd_simulate(args) -> int:
    sample = _load_sample(args.input, args.unit)
    curve = bootstrap_speedup(sample, _cores(args), args.resamples, args.seed)
    buf = io.StringIO()
    lvio.write_bootstrap_csv(curve, buf)
    _emit(buf.getvalue(), args.output)
    if args.output not in (None, "-"):
        lvio.write_sidecar(args.output, lvio.metadata(
            "simulate", input=str(args.input), sample_size=sample.size, label=sample.label,
            resamples=args.resamples, seed=args.seed))
    return EXIT_OK


def cmd_parallel(args) -> int:
    problem, params = _problem_and_params(args)
    baseline = _load_sample(args.baseline, "iterations")
    records, summaries = [], []
    for workers in args.workers:
        def progress(done, total, rec, workers=workers):
            if done % max(1, total // 5) == 0 or done == total:
                _note(args, f"  workers={workers}: {done}/{total} trials")

        res = measure_parallel_speedup(problem, params, workers, args.trials, baseline,
                                       iteration_cap=args.iteration_cap,
                                       progress=None if args.quiet else progress)
        records += res.records
        oversub = any(r.oversubscribed for r in res.records)
        summaries.append({"workers": workers, "trials": args.trials, "speedup": res.mean_speedup,
                          "ci95": list(res.confidence_interval), "std_error": res.std_error,
                          "mean_winner_iterations": res.mean_winner_iterations,
                          "oversubscribed": oversub})
        lo, hi = res.confidence_interval
        _note(args, f"workers={workers}: speedup {res.mean_speedup:.3f} (95% CI {lo:.3f}..{hi:.3f})"
                    + (" [oversubscribed: more workers than CPUs]" if oversub else ""))
    buf = io.StringIO()
    lvio.write_parallel_csv(records, buf)
    _emit(buf.getvalue(), args.output)
    if args.output not in (None, "-"):
        lvio.write_sidecar(args.output, lvio.metadata(
            "parallel", problem=problem.label, solver_params=params.as_dict(),
            baseline=str(args.baseline), baseline_mean=baseline.mean, baseline_size=baseline.size,
            seed_policy="trial t, worker i uses seed + t*workers + i", speedups=summaries))
    return EXIT_OK


def cmd_report(args) -> int:
    predicted = bootstrap = measured = fit = None
    label = args.label
    if args.predict:
        path = Path(args.predict)
        try:
            curve = SpeedupCurve.from_csv(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise lvio.DataError(f"cannot read {path}: {exc.strerror}") from None
        except ValueError as exc:
            raise lvio.DataError(f"{path}: {exc}") from None
        predicted = curve.as_dict()
    if args.simulate:
        bootstrap = {n: (g, se) for n, g, se in lvio.read_bootstrap_csv(args.simulate)}
        meta = lvio.read_sidecar(args.simulate)
        label = label or (meta or {}).get("label")
    if args.parallel:
        if not args.baseline:
            raise UsageError("--parallel needs --baseline to compute measured speedups")
        baseline = _load_sample(args.baseline, "iterations")
        label = label or baseline.label
        wins: dict[int, list] = {}
        for row in lvio.read_parallel_csv(args.parallel):
            wins.setdefault(row["workers"], []).append(row["winner_iterations"])
        measured = {}
        for n, w in sorted(wins.items()):
            g, ci, _ = speedup_from_winners(baseline, w)
            measured[n] = (g, ci)
    if args.fit:
        data = lvio.read_json(args.fit)
        items = data if isinstance(data, list) else [data]
        try:
            reports = [FitReport.from_dict(d) for d in items]
        except (SampleError, AttributeError, InvalidParameters) as exc:
            raise lvio.DataError(f"{args.fit}: {exc}") from None
        chosen = best_fit(reports) or max(reports, key=lambda r: r.p_value or 0.0)
        fit = {"family": chosen.family, "params": chosen.dist.to_dict() if chosen.dist else None,
               "describe": chosen.dist.describe() if chosen.dist else chosen.family,
               "p_value": chosen.p_value, "verdict": chosen.verdict}
        label = label or chosen.sample_label
    if predicted is None and bootstrap is None and measured is None:
        raise UsageError("give at least one of --predict, --simulate, --parallel")
    report = build_report(label or "runs", predicted=predicted, bootstrap=bootstrap,
                          measured=measured, fit=fit,
                          metadata=lvio.metadata("report", inputs={
                              k: getattr(args, k) for k in ("predict", "simulate", "parallel", "baseline", "fit")
                              if getattr(args, k)}))
    _emit(report.to_text(), args.output)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    if args.json:
        Path(args.json).write_text(report.to_json(), encoding="utf-8")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _config_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"lvspeedup: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except lvio.DataError as exc:
        print(f"lvspeedup: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: --help/--version exit 0, errors exit 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lvspeedup {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Rejected:
        return EXIT_REJECTED
    except (lvio.DataError, SampleError, DegenerateSample, MissingBaseline, JoinError,
            InvalidParameters) as exc:
        print(f"lvspeedup {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (QuadratureError, SolverError) as exc:
        print(f"lvspeedup {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

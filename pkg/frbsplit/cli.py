"""
Command-line front door.

    frbsplit solve  --m 300 --n 600 --solver frb --seed 7
    frbsplit bench  --sizes 300x600,500x600 --trials 50 --out results.csv
    frbsplit verify --m 4 --n 8

Exit codes: 0 success, 1 usage/configuration/I-O error, 2 numerical failure
or certificate violation. Results go to stdout; logs go to stderr.
"""

import argparse
import logging
import os
import sys

import numpy as np

from frbsplit.bench import BENCHMARK_SIZES, generate_instance, report_to_frame, run_suite, write_report
from frbsplit.config import SOLVER_NAMES, CliConfig
from frbsplit.exceptions import (
    ConfigurationError,
    FrbError,
    InsufficientDataError,
    ReportError,
    ValidationError,
)
from frbsplit.merit import (
    check_descent,
    check_finite_length,
    check_residual_bound,
    estimate_linear_rate,
    write_trace,
)
from frbsplit.solvers import SolverKind, solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so usage errors map to exit code 1."""

    def error(self, message):
        raise UsageError(message)


def parse_sizes(text: str) -> list[tuple[int, int]]:
    """'300x600,500x600' -> [(300, 600), (500, 600)]"""
    sizes = []
    for item in text.split(","):
        try:
            m, n = item.lower().split("x")
            sizes.append((int(m), int(n)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid size {item!r}, expected MxN")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Instance seed (bench: base seed).")
    common.add_argument("--lambda", dest="lambda_override", type=float, default=None,
                        help="Step size λ (FRB) or λ′ (iTseng). Default 0.9999·0.25 / 0.1316.")
    common.add_argument("--alpha", dest="alpha_override", type=float, default=None,
                        help="iTseng inertia α (default 0.125).")
    common.add_argument("--gamma", dest="gamma_override", type=float, default=None,
                        help="DR step γ (default 0.93·(√1.5 − 1) ≈ 0.209).")
    common.add_argument("--tol", type=float, default=1e-8, help="Termination tolerance (default 1e-8).")
    common.add_argument("--max-iter", dest="max_iter", type=int, default=50_000,
                        help="Iteration cap (default 50000).")
    common.add_argument("--no-enforce", dest="enforce", action="store_false",
                        help="Do not reject step sizes violating λ < min{1/(4L), λ_f}.")
    common.add_argument("--log-level", dest="log_level",
                        default=os.getenv("FRBSPLIT_LOG_LEVEL", "WARNING"),
                        help="Logging level for stderr (default $FRBSPLIT_LOG_LEVEL or WARNING).")

    parser = _Parser(prog="frbsplit", description="FRB splitting solvers and benchmark.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_solve = sub.add_parser("solve", parents=[common], help="Solve one random instance.")
    p_solve.add_argument("--m", type=int, required=True)
    p_solve.add_argument("--n", type=int, required=True)
    p_solve.add_argument("--solver", choices=SOLVER_NAMES, required=True)
    p_solve.add_argument("--trace-out", dest="trace_path", default=None,
                         help="Write the per-iteration trace CSV here.")

    p_bench = sub.add_parser("bench", parents=[common], help="Run the benchmark suite.")
    p_bench.add_argument("--sizes", type=parse_sizes, default=list(BENCHMARK_SIZES),
                         help="Comma-separated MxN list (default: m in 300,400,500 by n in 600..1000).")
    p_bench.add_argument("--trials", type=int, default=50)
    p_bench.add_argument("--solvers", type=lambda s: s.split(","), default=list(SOLVER_NAMES),
                         help="Comma-separated subset of frb,dr,itseng.")
    p_bench.add_argument("--workers", type=int, default=1)
    p_bench.add_argument("--out", dest="out_path", default=None,
                         help="Report CSV path (default $FRBSPLIT_OUTPUT_DIR/bench.csv).")

    p_verify = sub.add_parser("verify", parents=[common], help="Check FRB merit certificates.")
    p_verify.add_argument("--m", type=int, default=300)
    p_verify.add_argument("--n", type=int, default=600)
    p_verify.add_argument("--trace-out", dest="trace_path", default=None)

    return parser


def config_from_args(args: argparse.Namespace) -> CliConfig:
    return CliConfig(
        command=args.command,
        m=getattr(args, "m", None),
        n=getattr(args, "n", None),
        solver=getattr(args, "solver", None) or ("frb" if args.command == "verify" else None),
        seed=args.seed,
        trials=getattr(args, "trials", 50),
        sizes=getattr(args, "sizes", None),
        solvers=getattr(args, "solvers", None),
        lambda_override=args.lambda_override,
        alpha_override=args.alpha_override,
        gamma_override=args.gamma_override,
        tol=args.tol,
        max_iter=args.max_iter,
        enforce=args.enforce,
        out_path=getattr(args, "out_path", None),
        trace_path=getattr(args, "trace_path", None),
        workers=getattr(args, "workers", 1),
    )


def _fmt(value: float) -> str:
    return f"{value:.6e}"


def cmd_solve(config: CliConfig) -> int:
    """Generate one instance, run one solver, print a summary line."""
    instance = generate_instance(config.m, config.n, config.seed)
    kind = SolverKind.from_name(config.solver)
    solver_config = config.solver_config(kind.value, record_trace=config.trace_path is not None)
    report = solve(kind, instance.problem(), np.zeros(instance.n), solver_config)

    success = report.terminal_objective < 1e-12
    print(
        f"solver={kind.label} m={config.m} n={config.n} seed={config.seed} "
        f"iterations={report.iterations} objective={_fmt(report.terminal_objective)} "
        f"success={str(success).lower()} reason={report.termination_reason.value}"
    )
    if config.trace_path:
        write_trace(report.trace, config.trace_path)
    return EXIT_OK


def cmd_bench(config: CliConfig) -> int:
    """Run the suite and write the CSV report."""
    out_dir = os.path.dirname(os.path.abspath(config.out_path))
    if not os.access(out_dir, os.W_OK):
        raise ReportError(f"--out: directory {out_dir} is not writable", path=config.out_path)
    configs = {s: config.solver_config(s, record_trace=False) for s in config.solvers}
    report = run_suite(
        config.sizes,
        config.trials,
        solvers=config.solvers,
        base_seed=config.seed,
        configs=configs,
        workers=config.workers,
    )
    write_report(report, config.out_path)
    sys.stdout.write(report_to_frame(report).to_csv(index=False, float_format="%.6e"))
    return EXIT_OK


def cmd_verify(config: CliConfig) -> int:
    """Run FRB with full tracing and check the descent and residual certificates."""
    instance = generate_instance(config.m, config.n, config.seed)
    problem = instance.problem()
    solver_config = config.solver_config("frb", record_trace=True, keep_iterates=True)
    report = solve(SolverKind.FRB, problem, np.zeros(instance.n), solver_config)
    trace = report.trace

    bound = problem.stepsize_bound()
    hypothesis_ok = solver_config.step_size < bound
    if not hypothesis_ok:
        print(
            f"step-size hypothesis violated: λ={solver_config.step_size:g} >= "
            f"min{{1/(4L), λ_f}}={bound:.6g}; certificates do not apply"
        )

    descent = check_descent(trace)
    residual = check_residual_bound(trace)
    print(f"descent violations: {len(descent)}, residual violations: {len(residual)}")
    if descent:
        print(f"first descent violation: k={descent[0]}")
    if residual:
        print(f"first residual violation: k={residual[0]}")
    if trace.M1 > 0:
        print(f"finite length: {'ok' if check_finite_length(trace) else 'violated'}")

    try:
        fit = estimate_linear_rate(trace)
        print(f"linear rate: Q={fit.rate:.6f} R2={fit.r_squared:.4f} window={fit.window}")
    except InsufficientDataError as e:
        print(f"linear rate: insufficient data ({e})")

    print(
        f"iterations={report.iterations} objective={_fmt(report.terminal_objective)} "
        f"reason={report.termination_reason.value}"
    )
    if config.trace_path:
        write_trace(trace, config.trace_path)
    return EXIT_OK if hypothesis_ok and not descent and not residual else EXIT_FAILURE


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "verify": cmd_verify}


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(args.log_level)
    try:
        config = config_from_args(args)
        return COMMANDS[config.command](config)
    except (ConfigurationError, ValidationError, ReportError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FrbError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

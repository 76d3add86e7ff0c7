"""
Random sparse-feasibility benchmark.

Each instance asks for an r-sparse solution of Ax = b, with r = ⌈m/5⌉ and
entries bounded by l = 10⁶, posed as min δ_D(x) + ½dist²(x, C). Every solver
starts from the origin. A trial counts as a success when the terminal
objective is below 1e-12, i.e. the run reached a global minimizer rather
than a mere stationary point.
"""

import json
import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import pandas as pd

from frbsplit.config import SEED_RANGE, SolverConfig
from frbsplit.exceptions import ConfigurationError, ReportError, SolverError, ValidationError
from frbsplit.pool import TrialPool
from frbsplit.problem import CompositeProblem
from frbsplit.prox import AffineSet, SparseBoxSet, feasibility_problem
from frbsplit.solvers import SolverKind, TerminationReason, solve

logger = logging.getLogger(__name__)

BOX_RADIUS = 1e6
SUCCESS_THRESHOLD = 1e-12
REPORT_COLUMNS = ["m", "n", "solver", "iter", "fval_min", "succ", "trials"]
BENCHMARK_SIZES: list[tuple[int, int]] = [
    (m, n) for m in (300, 400, 500) for n in (600, 700, 800, 900, 1000)
]
ALL_SOLVERS = (SolverKind.FRB, SolverKind.DR, SolverKind.ITSENG)


def sparsity_budget(m: int) -> int:
    """r = ⌈m/5⌉."""
    return -(-m // 5)


def default_config(kind: "SolverKind | str") -> SolverConfig:
    """Benchmark presets; traces are off since only terminal metrics are reported."""
    kind = SolverKind.from_name(kind)
    if kind is SolverKind.FRB:
        return SolverConfig.frb_default(record_trace=False)
    if kind is SolverKind.ITSENG:
        return SolverConfig.itseng_default(record_trace=False)
    return SolverConfig.dr_feasibility_default(record_trace=False)


@dataclass(frozen=True, eq=False)
class FeasibilityInstance:
    A: np.ndarray
    b: np.ndarray
    r: int
    l: float
    planted: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        m, n = self.A.shape
        if self.b.shape != (m,) or self.planted.shape != (n,):
            raise ValidationError(
                "inconsistent instance shapes",
                params={"A": self.A.shape, "b": self.b.shape, "planted": self.planted.shape},
            )
        if not SparseBoxSet(self.r, self.l).contains(self.planted):
            raise ValidationError("planted solution is not in D", params={"seed": self.seed})
        if np.linalg.norm(self.A @ self.planted - self.b) > 1e-10 * max(1.0, np.linalg.norm(self.b)):
            raise ValidationError("b is not A·planted", params={"seed": self.seed})

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @cached_property
    def _affine(self) -> AffineSet:
        return AffineSet(self.A, self.b)

    def affine_set(self) -> AffineSet:
        """C = {x : Ax = b}; factorized once per instance."""
        return self._affine

    def sparse_box(self) -> SparseBoxSet:
        return SparseBoxSet(self.r, self.l)

    def problem(self) -> CompositeProblem:
        return feasibility_problem(self.affine_set(), self.sparse_box())


def generate_instance(m: int, n: int, seed: int) -> FeasibilityInstance:
    """
    A has i.i.d. standard normal entries; r = ⌈m/5⌉ standard normal values,
    clamped to [-10⁶, 10⁶], are placed at r distinct uniformly random indices
    to form the planted x̃; b = A·x̃.

    All draws come from numpy.random.default_rng(seed) (PCG64) in that order;
    normals use numpy's ziggurat transform of the uniform stream.

    Negative seeds are mapped onto uint64 by two's complement, so -1 draws the
    same instance as 2**64 - 1.

    Raises:
        ValidationError: m >= n, or seed outside the 64-bit range
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError("seed must be an integer", params={"seed": seed})
    seed = int(seed)
    if not SEED_RANGE[0] <= seed < SEED_RANGE[1]:
        raise ValidationError("seed must fit in 64 bits", params={"seed": seed})
    if m < 1 or n < 1:
        raise ValidationError("m and n must be positive", params={"m": m, "n": n})
    if m >= n:
        raise ValidationError("m must be < n", params={"m": m, "n": n})

    rng = np.random.default_rng(seed & (2**64 - 1))
    A = rng.standard_normal((m, n))
    r = sparsity_budget(m)
    values = np.clip(rng.standard_normal(r), -BOX_RADIUS, BOX_RADIUS)
    support = rng.choice(n, size=r, replace=False)
    planted = np.zeros(n)
    planted[support] = values
    return FeasibilityInstance(A=A, b=A @ planted, r=r, l=BOX_RADIUS, planted=planted, seed=seed)


@dataclass(frozen=True)
class TrialResult:
    solver: SolverKind
    iterations: int
    terminal_objective: float
    wall_time: float
    termination_reason: TerminationReason = TerminationReason.TOLERANCE_MET
    m: int | None = None
    n: int | None = None
    seed: int | None = None

    @property
    def success(self) -> bool:
        return self.terminal_objective < SUCCESS_THRESHOLD


@dataclass(frozen=True)
class BenchRow:
    m: int
    n: int
    solver: str
    mean_iter_ceiling: int
    fval_min: float
    success_count: int
    trials: int

    def __post_init__(self):
        if not 0 <= self.success_count <= self.trials:
            raise ValidationError(
                "success_count out of range",
                params={"success_count": self.success_count, "trials": self.trials},
            )


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    results: list[TrialResult] = field(default_factory=list)

    def row(self, m: int, n: int, solver: "SolverKind | str") -> BenchRow:
        label = SolverKind.from_name(solver).label
        for row in self.rows:
            if (row.m, row.n, row.solver) == (m, n, label):
                return row
        raise KeyError((m, n, label))


def run_trial(
    instance: FeasibilityInstance,
    solver: "SolverKind | str",
    config: SolverConfig | None = None,
) -> TrialResult:
    """
    Run one solver on the instance from x_0 = 0.

    Raises:
        ConfigurationError: invalid solver configuration
        SolverError: any other failure, with the instance seed attached
    """
    kind = SolverKind.from_name(solver)
    config = config or default_config(kind)
    started = time.perf_counter()
    try:
        report = solve(kind, instance.problem(), np.zeros(instance.n), config)
    except ConfigurationError:
        raise
    except Exception as e:
        logger.error(
            f"{kind.label} failed on instance m={instance.m}, n={instance.n}, seed={instance.seed}: {e}"
        )
        raise SolverError(
            f"{kind.label} failed on instance seed={instance.seed}: {e}",
            seed=instance.seed,
            m=instance.m,
            n=instance.n,
            solver=kind.value,
        ) from e

    return TrialResult(
        solver=kind,
        iterations=report.iterations,
        terminal_objective=report.terminal_objective,
        wall_time=time.perf_counter() - started,
        termination_reason=report.termination_reason,
        m=instance.m,
        n=instance.n,
        seed=instance.seed,
    )


def _run_instance(
    m: int, n: int, seed: int, solvers: tuple[SolverKind, ...], configs: dict
) -> list[TrialResult]:
    """Generate one instance and run every requested solver on it."""
    instance = generate_instance(m, n, seed)
    return [run_trial(instance, kind, configs.get(kind)) for kind in solvers]


def aggregate(m: int, n: int, kind: SolverKind, results: list[TrialResult]) -> BenchRow:
    """Mean-iteration ceiling, minimal terminal objective and success count."""
    return BenchRow(
        m=m,
        n=n,
        solver=kind.label,
        mean_iter_ceiling=math.ceil(sum(r.iterations for r in results) / len(results)),
        fval_min=min(r.terminal_objective for r in results),
        success_count=sum(r.success for r in results),
        trials=len(results),
    )


def run_suite(
    sizes: list[tuple[int, int]],
    trials: int,
    solvers: list["SolverKind | str"] = ALL_SOLVERS,
    base_seed: int = 0,
    configs: dict | None = None,
    workers: int = 1,
) -> BenchReport:
    """
    For each size and trial t, instance seed = base_seed + t; every solver
    runs on the same instance. Rows come out ordered by size, then solver.

    Raises:
        ValidationError: trials < 1
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1", params={"trials": trials})
    kinds = tuple(SolverKind.from_name(s) for s in solvers)
    configs = {SolverKind.from_name(k): v for k, v in (configs or {}).items()}
    tasks = [(m, n, base_seed + t, kinds, configs) for m, n in sizes for t in range(trials)]

    with TrialPool(workers) as pool:
        per_instance = pool.map(_run_instance, tasks)

    report = BenchReport()
    for index, (m, n) in enumerate(sizes):
        block = per_instance[index * trials : (index + 1) * trials]
        for j, kind in enumerate(kinds):
            results = [instance_results[j] for instance_results in block]
            report.results.extend(results)
            row = aggregate(m, n, kind, results)
            report.rows.append(row)
            logger.info(
                f"{m}x{n} {kind.label}: iter={row.mean_iter_ceiling}, "
                f"fval_min={row.fval_min:.4e}, succ={row.success_count}/{row.trials}"
            )
    return report


def report_to_frame(report: BenchReport) -> pd.DataFrame:
    return pd.DataFrame(
        [
            (r.m, r.n, r.solver, r.mean_iter_ceiling, r.fval_min, r.success_count, r.trials)
            for r in report.rows
        ],
        columns=REPORT_COLUMNS,
    )


def write_report(report: BenchReport, path) -> None:
    """
    CSV with header m,n,solver,iter,fval_min,succ,trials; floats in
    scientific notation with 7 significant digits.
    Raises:
        ReportError
    """
    try:
        report_to_frame(report).to_csv(path, index=False, float_format="%.6e")
    except OSError as e:
        logger.error(f"Failed to write report to {path}: {e}")
        raise ReportError(f"cannot write report to {path}: {e}", path=path)


def read_report(path) -> BenchReport:
    """
    Raises:
        ReportError
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise ReportError(f"cannot read report from {path}: {e}", path=path)
    rows = [
        BenchRow(
            m=int(rec["m"]),
            n=int(rec["n"]),
            solver=str(rec["solver"]),
            mean_iter_ceiling=int(rec["iter"]),
            fval_min=float(rec["fval_min"]),
            success_count=int(rec["succ"]),
            trials=int(rec["trials"]),
        )
        for rec in frame.to_dict("records")
    ]
    return BenchReport(rows=rows)


def save_instance(instance: FeasibilityInstance, path) -> None:
    """
    Store the recipe (seed, m, n); load_instance regenerates the data.
    Raises:
        ValidationError: the instance has no seed
        ReportError
    """
    if instance.seed is None:
        raise ValidationError("only seeded instances can be saved")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"seed": int(instance.seed), "m": instance.m, "n": instance.n}, fh)
    except OSError as e:
        raise ReportError(f"cannot write instance to {path}: {e}", path=path)


def load_instance(path) -> FeasibilityInstance:
    """
    Raises:
        ReportError
    """
    try:
        with open(path, encoding="utf-8") as fh:
            recipe = json.load(fh)
        return generate_instance(int(recipe["m"]), int(recipe["n"]), int(recipe["seed"]))
    except (OSError, KeyError, ValueError) as e:
        raise ReportError(f"cannot load instance from {path}: {e}", path=path)

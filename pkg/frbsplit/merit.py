"""
FRB merit function H(x, y) = f(x) + g(x) + ‖x - y‖²/(4λ) and the run-time
certificates built on it.

Along an FRB run with z_k = (x_{k+1}, x_k) and 0 < λ < min{1/(4L), λ_f}:

    M1·‖z_k - z_{k-1}‖² ≤ H(z_{k-1}) - H(z_k),           M1 = 1/(4λ) - L
    ‖(A_{k+1}, B_{k+1})‖ ≤ M2·‖z_k - z_{k-1}‖,            M2 = √2·(L + 2/λ)

where (A, B) is the subgradient of H at z_k returned by frb_residual.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from frbsplit.exceptions import (
    InsufficientDataError,
    ReportError,
    ValidationError,
)
from frbsplit.problem import CompositeProblem, evaluate_objective
from frbsplit.utility import as_vector, validate_positive

logger = logging.getLogger(__name__)

DESCENT_RELATIVE_SLACK = 1e-8
RESIDUAL_ABSOLUTE_SLACK = 1e-10
MIN_RATE_SAMPLES = 20
RATE_TAIL_FRACTION = 0.6
RATE_TAIL_CAP = 500
TRACE_COLUMNS = ["k", "H", "z_gap", "residual_norm", "objective"]


@dataclass(frozen=True)
class MeritSample:
    """
    Telemetry of one iteration k (the step producing x_{k+1}).

    z_gap is the product norm ‖z_k - z_{k-1}‖ = √(‖x_{k+1}-x_k‖² + ‖x_k-x_{k-1}‖²).
    H_value and residual_norm are NaN for solvers other than FRB.
    """

    k: int
    H_value: float
    z_gap: float
    residual_norm: float
    objective: float


@dataclass
class SolverTrace:
    """
    Ordered samples of one run. samples[0] describes the starting pair
    z_{-1} = (x_0, x_{-1}) with k = -1.
    """

    lam: float
    lipschitz_L: float
    solver: str = "frb"
    samples: list[MeritSample] = field(default_factory=list)
    iterates: list[np.ndarray] | None = None

    @property
    def M1(self) -> float:
        return 1.0 / (4.0 * self.lam) - self.lipschitz_L

    @property
    def M2(self) -> float:
        return math.sqrt(2.0) * (self.lipschitz_L + 2.0 / self.lam)

    def append(self, sample: MeritSample) -> None:
        self.samples.append(sample)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of log‖x_k - x*‖ against k; unpacks to (rate, r_squared)."""

    rate: float
    r_squared: float
    window: int

    def __iter__(self):
        return iter((self.rate, self.r_squared))


def merit_value(x, y, lam: float, problem: CompositeProblem) -> float:
    """
    H(x, y) = F(x) + ‖x - y‖²/(4λ); +inf exactly when f(x) is +inf.
    Raises:
        DimensionError
    """
    validate_positive("lam", lam)
    x = as_vector(x, problem.dim, name="x")
    y = as_vector(y, problem.dim, name="y")
    objective = evaluate_objective(problem, x)
    if objective == math.inf:
        return math.inf
    d = x - y
    return objective + float(d @ d) / (4.0 * lam)


def frb_residual(
    x_next,
    x_curr,
    x_prev,
    lam: float,
    problem: CompositeProblem,
    gradients: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Subgradient (A_{k+1}, B_{k+1}) ∈ ∂H(z_k) for x_next produced by an FRB step
    from (x_curr, x_prev):

        p = (x_k - x_{k+1})/λ + ∇g(x_{k+1}) - 2∇g(x_k) + ∇g(x_{k-1})
        A = p + (x_{k+1} - x_k)/(2λ),   B = (x_k - x_{k+1})/(2λ)

    gradients, when given, are the cached (∇g(x_{k+1}), ∇g(x_k), ∇g(x_{k-1}))
    so that the solver does not pay for extra gradient evaluations.
    """
    validate_positive("lam", lam)
    x_next = as_vector(x_next, problem.dim, name="x_next")
    x_curr = as_vector(x_curr, problem.dim, name="x_curr")
    x_prev = as_vector(x_prev, problem.dim, name="x_prev")
    if gradients is None:
        grad = problem.smooth.gradient
        gradients = (grad(x_next), grad(x_curr), grad(x_prev))
    g_next, g_curr, g_prev = gradients

    step_back = x_curr - x_next
    p = step_back / lam + g_next - 2.0 * g_curr + g_prev
    a = p - step_back / (2.0 * lam)
    b = step_back / (2.0 * lam)
    return a, b


def residual_norm(a: np.ndarray, b: np.ndarray) -> float:
    return math.sqrt(float(a @ a) + float(b @ b))


def _require_frb(trace: SolverTrace) -> None:
    if trace.solver != "frb":
        raise ValidationError(
            "merit certificates apply to FRB traces only", params={"solver": trace.solver}
        )


def check_descent(trace: SolverTrace) -> list[int]:
    """
    Iterations k where M1·z_gap(k)² > H(k-1) - H(k) + 1e-8·(1 + |H(k-1)|).
    Pairs whose earlier merit value is +inf are skipped (nothing to descend from).
    """
    _require_frb(trace)
    m1 = trace.M1
    violations = []
    for prev, cur in zip(trace.samples, trace.samples[1:]):
        if not math.isfinite(prev.H_value):
            continue
        slack = DESCENT_RELATIVE_SLACK * (1.0 + abs(prev.H_value))
        if m1 * cur.z_gap**2 > prev.H_value - cur.H_value + slack:
            violations.append(cur.k)
    if violations:
        logger.warning(f"Descent certificate violated at {len(violations)} iterations")
    return violations


def check_monotone(trace: SolverTrace) -> list[int]:
    """Iterations k where H(k) exceeds H(k-1) beyond the relative slack."""
    _require_frb(trace)
    return [
        cur.k
        for prev, cur in zip(trace.samples, trace.samples[1:])
        if math.isfinite(prev.H_value)
        and cur.H_value > prev.H_value + DESCENT_RELATIVE_SLACK * (1.0 + abs(prev.H_value))
    ]


def check_residual_bound(trace: SolverTrace) -> list[int]:
    """Iterations k where ‖(A, B)‖ > M2·z_gap(k) + 1e-10."""
    _require_frb(trace)
    m2 = trace.M2
    violations = [
        s.k
        for s in trace.samples
        if s.residual_norm > m2 * s.z_gap + RESIDUAL_ABSOLUTE_SLACK
    ]
    if violations:
        logger.warning(f"Residual bound violated at {len(violations)} iterations")
    return violations


def check_finite_length(trace: SolverTrace, inf_value: float = 0.0) -> bool:
    """
    Σ_k z_gap(k)² ≤ (H(z_{-1}) - inf F)/M1, up to the relative slack.
    inf_value is a lower bound of F (0 for the feasibility problem).
    """
    _require_frb(trace)
    m1 = trace.M1
    if not m1 > 0:
        raise ValidationError(
            "finite-length bound needs λ < 1/(4L)", params={"M1": m1, "lam": trace.lam}
        )
    if not trace.samples:
        return True
    start = trace.samples[0].H_value
    if not math.isfinite(start):
        return True
    total = sum(s.z_gap**2 for s in trace.samples[1:])
    bound = (start - inf_value) / m1
    return total <= bound + DESCENT_RELATIVE_SLACK * (1.0 + abs(start)) / m1


def estimate_linear_rate(trace: SolverTrace, x_star=None) -> RateFit:
    """
    Fit log‖x_k - x*‖ ≈ c + k·log Q over the tail window (last 60% of the
    iterates, at most 500). Q < 1 indicates linear convergence.

    x_star defaults to the run's final iterate.

    Raises:
        InsufficientDataError: fewer than 20 tail iterates with ‖x_k - x*‖ > 0,
            or the trace kept no iterates
    """
    if not trace.iterates:
        raise InsufficientDataError("trace holds no iterates (run with keep_iterates=True)")
    iterates = np.asarray(trace.iterates)
    x_star = iterates[-1] if x_star is None else as_vector(x_star, iterates.shape[1], "x_star")

    total = iterates.shape[0]
    window = min(RATE_TAIL_CAP, math.ceil(RATE_TAIL_FRACTION * total))
    ks = np.arange(total - window, total)
    dist = np.linalg.norm(iterates[ks] - x_star, axis=1)
    usable = dist > 0
    if np.count_nonzero(usable) < MIN_RATE_SAMPLES:
        raise InsufficientDataError(
            f"only {int(np.count_nonzero(usable))} usable tail samples, "
            f"need at least {MIN_RATE_SAMPLES}"
        )
    fit = stats.linregress(ks[usable], np.log(dist[usable]))
    rate = RateFit(
        rate=float(np.exp(fit.slope)),
        r_squared=float(fit.rvalue**2),
        window=int(np.count_nonzero(usable)),
    )
    logger.debug(f"Linear rate fit Q={rate.rate:.6f}, R²={rate.r_squared:.4f}")
    return rate


def trace_to_frame(trace: SolverTrace) -> pd.DataFrame:
    return pd.DataFrame(
        [(s.k, s.H_value, s.z_gap, s.residual_norm, s.objective) for s in trace.samples],
        columns=TRACE_COLUMNS,
    )


def write_trace(trace: SolverTrace, path) -> None:
    """
    CSV with columns k,H,z_gap,residual_norm,objective.
    Raises:
        ReportError
    """
    try:
        trace_to_frame(trace).to_csv(path, index=False, float_format="%.10e")
    except OSError as e:
        logger.error(f"Failed to write trace to {path}: {e}")
        raise ReportError(f"cannot write trace to {path}: {e}", path=path)

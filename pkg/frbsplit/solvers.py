"""
Forward-reflected-backward (FRB) splitting and two baselines.

FRB:     x_{k+1} ∈ Prox_{λf}(x_k - λ(2∇g(x_k) - ∇g(x_{k-1})))
iTseng:  p_{k+1} ∈ Prox_{λ′f}(x_k - λ′∇g(x_k) + α(x_k - x_{k-1}))
         x_{k+1} = p_{k+1} + λ′(∇g(x_k) - ∇g(p_{k+1}))
DR:      y_{t+1} = Prox_{γg}(z_t),  x_{t+1} ∈ Prox_{γf}(2y_{t+1} - z_t),
         z_{t+1} = z_t + x_{t+1} - y_{t+1}

All runs start from x_{-1} = x_0.
"""

import logging
import math
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from frbsplit.config import DR_GAMMA_FACTOR, SolverConfig
from frbsplit.exceptions import ConfigurationError, UnsupportedProblemError, ValidationError
from frbsplit.merit import MeritSample, SolverTrace, frb_residual, residual_norm
from frbsplit.problem import CompositeProblem, evaluate_objective
from frbsplit.prox import AffineSet, SparseBoxSet, project_sparse_box
from frbsplit.utility import as_vector

logger = logging.getLogger(__name__)


class SolverKind(str, Enum):
    FRB = "frb"
    DR = "dr"
    ITSENG = "itseng"

    @classmethod
    def from_name(cls, name: "str | SolverKind") -> "SolverKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValidationError(
                f"unknown solver {name!r}", params={"solver": name}
            )

    @property
    def label(self) -> str:
        return {"frb": "FRB", "dr": "DR", "itseng": "iTseng"}[self.value]


class TerminationReason(str, Enum):
    TOLERANCE_MET = "tolerance_met"
    MAX_ITER = "max_iter"
    STAGNATION = "stagnation"


@dataclass(frozen=True)
class IterateState:
    """x_k, x_{k-1} and their cached gradients."""

    x_curr: np.ndarray
    x_prev: np.ndarray
    grad_curr: np.ndarray
    grad_prev: np.ndarray
    k: int = 0


@dataclass
class RunReport:
    final_x: np.ndarray
    iterations: int
    terminal_objective: float
    termination_reason: TerminationReason
    trace: SolverTrace | None = None
    solver: SolverKind = SolverKind.FRB
    wall_time: float = 0.0


def init_state(problem: CompositeProblem, x0) -> IterateState:
    """State with x_{-1} = x_0; costs one gradient evaluation."""
    x0 = as_vector(x0, problem.dim, name="x0")
    grad0 = problem.smooth.gradient(x0)
    return IterateState(x_curr=x0, x_prev=x0, grad_curr=grad0, grad_prev=grad0, k=0)


def frb_step(state: IterateState, problem: CompositeProblem, lam: float) -> IterateState:
    """
    One FRB iteration: one prox and one new gradient evaluation.
    Prox oracle failures propagate.
    """
    forward = state.x_curr - lam * (2.0 * state.grad_curr - state.grad_prev)
    x_next = as_vector(problem.nonsmooth.prox(forward, lam), problem.dim, name="prox output")
    grad_next = problem.smooth.gradient(x_next)
    return IterateState(
        x_curr=x_next,
        x_prev=state.x_curr,
        grad_curr=grad_next,
        grad_prev=state.grad_curr,
        k=state.k + 1,
    )


def feasibility_frb_step(
    x_curr, x_prev, affine: AffineSet, box: SparseBoxSet, lam: float
) -> np.ndarray:
    """FRB for δ_D + ½dist²(·, C) in closed form: Proj_D(x_k - λA†A(2x_k - x_{k-1}) + λA†b)."""
    z = (
        x_curr
        - lam * affine.apply_pinv(affine.A @ (2.0 * x_curr - x_prev))
        + lam * affine.apply_pinv(affine.b)
    )
    return project_sparse_box(z, box)


def feasibility_itseng_step(
    x_curr, x_prev, affine: AffineSet, box: SparseBoxSet, lam: float, alpha: float
) -> tuple[np.ndarray, np.ndarray]:
    """
    Inertial Tseng for δ_D + ½dist²(·, C) in closed form. Returns (p_{k+1}, x_{k+1}):
        p_{k+1} = Proj_D(x_k - λ′A†(Ax_k - b) + α(x_k - x_{k-1}))
        x_{k+1} = p_{k+1} + λ′A†A(x_k - p_{k+1})
    """
    p = project_sparse_box(
        x_curr - lam * affine.apply_pinv(affine.residual(x_curr)) + alpha * (x_curr - x_prev),
        box,
    )
    return p, p + lam * affine.apply_pinv(affine.A @ (x_curr - p))


def _gap_ratio(x_next: np.ndarray, x_curr: np.ndarray, x_prev: np.ndarray) -> float:
    gap = max(np.linalg.norm(x_next - x_curr), np.linalg.norm(x_curr - x_prev))
    scale = max(
        1.0, np.linalg.norm(x_next), np.linalg.norm(x_curr), np.linalg.norm(x_prev)
    )
    return float(gap / scale)


def stopping_criterion(x_next, x_curr, x_prev, tol: float) -> bool:
    """
    max{‖x_{k+1}-x_k‖, ‖x_k-x_{k-1}‖} / max{1, ‖x_{k+1}‖, ‖x_k‖, ‖x_{k-1}‖} < tol
    """
    x_next = as_vector(x_next, name="x_next")
    x_curr = as_vector(x_curr, x_next.shape[0], name="x_curr")
    x_prev = as_vector(x_prev, x_next.shape[0], name="x_prev")
    return _gap_ratio(x_next, x_curr, x_prev) < tol


def _dr_ratio(z_next, z_curr, y_next, x_next) -> float:
    scale = max(
        1.0, np.linalg.norm(z_curr), np.linalg.norm(y_next), np.linalg.norm(x_next)
    )
    return float(np.linalg.norm(z_next - z_curr) / scale)


def dr_stopping_criterion(z_next, z_curr, y_next, x_next, tol: float) -> bool:
    """
    ‖z_{t+1} - z_t‖ / max{1, ‖z_t‖, ‖y_{t+1}‖, ‖x_{t+1}‖} < tol.
    ‖z_{t+1} - z_t‖ equals ‖x_{t+1} - y_{t+1}‖, so this also bounds the
    disagreement of the two prox outputs.
    """
    return _dr_ratio(
        as_vector(z_next), as_vector(z_curr), as_vector(y_next), as_vector(x_next)
    ) < tol


class _RunLoop:
    """Termination bookkeeping shared by the three solvers."""

    def __init__(self, kind: SolverKind, config: SolverConfig):
        self.kind = kind
        self.config = config
        self.iterations = 0
        self._best_ratio = math.inf
        self._since_best = 0
        self._started = time.perf_counter()

    def update(self, ratio: float) -> TerminationReason | None:
        self.iterations += 1
        if ratio < self.config.tol:
            return TerminationReason.TOLERANCE_MET
        if ratio < self._best_ratio:
            self._best_ratio = ratio
            self._since_best = 0
        else:
            self._since_best += 1
            if self._since_best >= self.config.stagnation_window:
                return TerminationReason.STAGNATION
        return None

    def finish(
        self,
        problem: CompositeProblem,
        final_x: np.ndarray,
        reason: TerminationReason | None,
        trace: SolverTrace | None,
    ) -> RunReport:
        reason = reason or TerminationReason.MAX_ITER
        objective = evaluate_objective(problem, final_x)
        elapsed = time.perf_counter() - self._started
        if reason is TerminationReason.STAGNATION:
            logger.warning(
                f"{self.kind.label} stagnated after {self.iterations} iterations "
                f"(no decrease in {self.config.stagnation_window} iterations)"
            )
        elif reason is TerminationReason.MAX_ITER and self.config.max_iter > 0:
            logger.warning(f"{self.kind.label} hit max_iter={self.config.max_iter}")
        logger.info(
            f"{self.kind.label} finished: iterations={self.iterations}, "
            f"objective={objective:.6e}, reason={reason.value}"
        )
        return RunReport(
            final_x=final_x,
            iterations=self.iterations,
            terminal_objective=objective,
            termination_reason=reason,
            trace=trace,
            solver=self.kind,
            wall_time=elapsed,
        )


def _new_trace(
    kind: SolverKind, problem: CompositeProblem, x0: np.ndarray, lam: float, config: SolverConfig
) -> SolverTrace | None:
    if not config.record_trace:
        return None
    trace = SolverTrace(
        lam=lam,
        lipschitz_L=problem.lipschitz_L,
        solver=kind.value,
        iterates=[x0] if config.keep_iterates else None,
    )
    objective = evaluate_objective(problem, x0)
    merit = objective if kind is SolverKind.FRB else math.nan
    trace.append(
        MeritSample(
            k=-1,
            H_value=merit,
            z_gap=0.0,
            residual_norm=0.0 if kind is SolverKind.FRB else math.nan,
            objective=objective,
        )
    )
    return trace


def check_stepsize_rule(problem: CompositeProblem, lam: float) -> None:
    """
    Raises:
        ConfigurationError: λ ≥ min{1/(4L), λ_f}
    """
    bound = problem.stepsize_bound()
    if not lam < bound:
        raise ConfigurationError(
            f"step size λ={lam:g} violates the rule λ < min{{1/(4L), λ_f}} = {bound:.6g} "
            f"(L={problem.lipschitz_L:g}, λ_f={problem.prox_threshold:g})"
        )


def frb_solve(problem: CompositeProblem, x0, config: SolverConfig) -> RunReport:
    """
    Run FRB from x_{-1} = x_0 until the gap ratio drops below config.tol,
    the ratio stagnates, or max_iter iterations are done.

    Raises:
        ConfigurationError: step-size rule violated while enforced
    """
    lam = config.step_size
    if config.enforce_stepsize_rule:
        check_stepsize_rule(problem, lam)
    else:
        logger.warning(f"FRB step-size rule not enforced (λ={lam:g})")
    logger.debug(f"FRB start: dim={problem.dim}, λ={lam:g}, bound={problem.stepsize_bound():g}")

    state = init_state(problem, x0)
    trace = _new_trace(SolverKind.FRB, problem, state.x_curr, lam, config)
    loop = _RunLoop(SolverKind.FRB, config)
    reason = None

    for _ in range(config.max_iter):
        new = frb_step(state, problem, lam)
        if trace is not None:
            _record_frb_sample(trace, problem, lam, state, new)
        ratio = _gap_ratio(new.x_curr, state.x_curr, state.x_prev)
        state = new
        reason = loop.update(ratio)
        if reason is not None:
            break

    return loop.finish(problem, state.x_curr, reason, trace)


def _record_frb_sample(
    trace: SolverTrace,
    problem: CompositeProblem,
    lam: float,
    state: IterateState,
    new: IterateState,
) -> None:
    step = new.x_curr - state.x_curr
    back = state.x_curr - state.x_prev
    step_sq = float(step @ step)
    objective = evaluate_objective(problem, new.x_curr)
    merit = math.inf if objective == math.inf else objective + step_sq / (4.0 * lam)
    a, b = frb_residual(
        new.x_curr,
        state.x_curr,
        state.x_prev,
        lam,
        problem,
        gradients=(new.grad_curr, state.grad_curr, state.grad_prev),
    )
    trace.append(
        MeritSample(
            k=state.k,
            H_value=merit,
            z_gap=math.sqrt(step_sq + float(back @ back)),
            residual_norm=residual_norm(a, b),
            objective=objective,
        )
    )
    if trace.iterates is not None:
        trace.iterates.append(new.x_curr)


def itseng_solve(problem: CompositeProblem, x0, config: SolverConfig) -> RunReport:
    """
    Inertial Tseng (forward-backward-forward) with step λ′ = config.step_size and
    inertia α = config.inertia_alpha. Terminates on the same gap ratio as FRB,
    measured on the corrected iterates x_k.

    final_x is the last prox output p_{k+1}; the corrected iterate x_{k+1}
    may leave dom f, so the terminal objective is evaluated at p_{k+1}.
    """
    lam = config.step_size
    alpha = config.inertia_alpha
    if config.enforce_stepsize_rule and not lam < problem.prox_threshold:
        raise ConfigurationError(
            f"step size λ′={lam:g} must be below the prox threshold λ_f={problem.prox_threshold:g}"
        )
    logger.debug(f"iTseng start: dim={problem.dim}, λ′={lam:g}, α={alpha:g}")

    x_curr = as_vector(x0, problem.dim, name="x0")
    x_prev = x_curr
    grad_curr = problem.smooth.gradient(x_curr)
    p = x_curr
    trace = _new_trace(SolverKind.ITSENG, problem, x_curr, lam, config)
    loop = _RunLoop(SolverKind.ITSENG, config)
    reason = None

    for k in range(config.max_iter):
        p = as_vector(
            problem.nonsmooth.prox(x_curr - lam * grad_curr + alpha * (x_curr - x_prev), lam),
            problem.dim,
            name="prox output",
        )
        x_next = p + lam * (grad_curr - problem.smooth.gradient(p))
        grad_next = problem.smooth.gradient(x_next)

        if trace is not None:
            step, back = x_next - x_curr, x_curr - x_prev
            trace.append(
                MeritSample(
                    k=k,
                    H_value=math.nan,
                    z_gap=math.sqrt(float(step @ step) + float(back @ back)),
                    residual_norm=math.nan,
                    objective=evaluate_objective(problem, p),
                )
            )
            if trace.iterates is not None:
                trace.iterates.append(p)

        ratio = _gap_ratio(x_next, x_curr, x_prev)
        x_prev, x_curr, grad_curr = x_curr, x_next, grad_next
        reason = loop.update(ratio)
        if reason is not None:
            break

    return loop.finish(problem, p, reason, trace)


def dr_solve(problem: CompositeProblem, z0, config: SolverConfig) -> RunReport:
    """
    Douglas-Rachford with the smooth prox taken first. γ = config.dr_gamma,
    or 0.25/L when unset. final_x is the last prox_{γf} output x_{t+1}.

    Raises:
        UnsupportedProblemError: the smooth part has no prox oracle
        ConfigurationError: γ ≥ λ_f while the step-size rule is enforced
    """
    if not problem.smooth.has_prox:
        raise UnsupportedProblemError(
            "Douglas-Rachford needs a prox oracle for the smooth part"
        )
    gamma = config.dr_gamma if config.dr_gamma is not None else DR_GAMMA_FACTOR / problem.lipschitz_L
    if config.enforce_stepsize_rule and not gamma < problem.prox_threshold:
        raise ConfigurationError(
            f"DR step γ={gamma:g} must be below the prox threshold λ_f={problem.prox_threshold:g}"
        )
    logger.debug(f"DR start: dim={problem.dim}, γ={gamma:g}")

    z = as_vector(z0, problem.dim, name="z0")
    x = z
    trace = _new_trace(SolverKind.DR, problem, z, gamma, config)
    loop = _RunLoop(SolverKind.DR, config)
    reason = None

    for t in range(config.max_iter):
        y = as_vector(problem.smooth.prox(z, gamma), problem.dim, name="smooth prox output")
        x = as_vector(problem.nonsmooth.prox(2.0 * y - z, gamma), problem.dim, name="prox output")
        z_next = z + x - y

        if trace is not None:
            trace.append(
                MeritSample(
                    k=t,
                    H_value=math.nan,
                    z_gap=float(np.linalg.norm(z_next - z)),
                    residual_norm=math.nan,
                    objective=evaluate_objective(problem, x),
                )
            )
            if trace.iterates is not None:
                trace.iterates.append(x)

        ratio = _dr_ratio(z_next, z, y, x)
        z = z_next
        reason = loop.update(ratio)
        if reason is not None:
            break

    return loop.finish(problem, x, reason, trace)


_SOLVERS = {
    SolverKind.FRB: frb_solve,
    SolverKind.DR: dr_solve,
    SolverKind.ITSENG: itseng_solve,
}


def solve(kind: "SolverKind | str", problem: CompositeProblem, x0, config: SolverConfig) -> RunReport:
    """Dispatch to the solver named by kind."""
    return _SOLVERS[SolverKind.from_name(kind)](problem, x0, config)

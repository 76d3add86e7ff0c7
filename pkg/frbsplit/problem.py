"""
Composite objective F = f + g consumed by every solver.

g is the smooth part (value, gradient, Lipschitz constant of the gradient),
f is the nonsmooth part (extended-real value, proximal oracle, prox threshold).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from frbsplit.exceptions import ValidationError
from frbsplit.utility import as_vector

logger = logging.getLogger(__name__)


class ProxOracle(Protocol):
    """Protocol for proximal oracles: (z, step) -> one element of Prox_{step·h}(z)."""

    def __call__(self, z: np.ndarray, step: float) -> np.ndarray:
        ...


@dataclass(frozen=True)
class SmoothPart:
    """
    Smooth part g with L-Lipschitz gradient.

    prox is optional; only Douglas-Rachford needs it.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz_L: float
    prox: ProxOracle | None = None

    def __post_init__(self):
        if not self.lipschitz_L > 0:
            raise ValidationError(
                "lipschitz_L must be positive", params={"lipschitz_L": self.lipschitz_L}
            )

    @property
    def has_prox(self) -> bool:
        return self.prox is not None


@dataclass(frozen=True)
class NonsmoothPart:
    """
    Proper lsc prox-bounded part f.

    value may return math.inf. prox must return one deterministic element of
    the (possibly set-valued) proximal mapping; the selection rule is
    documented on each concrete oracle.
    """

    value: Callable[[np.ndarray], float]
    prox: ProxOracle
    prox_threshold: float = math.inf

    def __post_init__(self):
        if not self.prox_threshold > 0:
            raise ValidationError(
                "prox_threshold must be positive",
                params={"prox_threshold": self.prox_threshold},
            )


@dataclass(frozen=True)
class CompositeProblem:
    """min F(x) = f(x) + g(x) over R^dim."""

    dim: int
    smooth: SmoothPart
    nonsmooth: NonsmoothPart

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValidationError("dim must be a positive integer", params={"dim": self.dim})

    @property
    def lipschitz_L(self) -> float:
        return self.smooth.lipschitz_L

    @property
    def prox_threshold(self) -> float:
        return self.nonsmooth.prox_threshold

    def stepsize_bound(self) -> float:
        """min{1/(4L), λ_f}: FRB step sizes must lie strictly below this."""
        return min(1.0 / (4.0 * self.lipschitz_L), self.prox_threshold)

    def objective(self, x) -> float:
        return evaluate_objective(self, x)


def evaluate_objective(problem: CompositeProblem, x) -> float:
    """
    F(x) = f(x) + g(x).

    Returns math.inf exactly when f(x) is +inf.
    Raises:
        DimensionError
    """
    x = as_vector(x, problem.dim)
    f_val = float(problem.nonsmooth.value(x))
    if f_val == math.inf:
        return math.inf
    return f_val + float(problem.smooth.value(x))

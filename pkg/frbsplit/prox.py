"""
Closed-form projections and proximal operators.

Covers the sets of the sparse feasibility problem
    C = {x : Ax = b},   D = {x : ‖x‖₀ ≤ r, ‖x‖∞ ≤ l},
the smooth part ½dist²(·, C), and the parts used by the convex sanity problems.
"""

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from frbsplit.cache import CacheBackend, FactorizationCache
from frbsplit.exceptions import FactorizationError, ValidationError
from frbsplit.problem import CompositeProblem, NonsmoothPart, SmoothPart
from frbsplit.utility import as_vector, validate_positive

logger = logging.getLogger(__name__)

# Largest condition number of A·Aᵀ (estimated from the Cholesky diagonal)
# accepted before the set is declared rank deficient.
MAX_GRAM_CONDITION = 1e12


def project_box(z, l: float) -> np.ndarray:
    """Componentwise clamp of z to [-l, l]."""
    validate_positive("l", l)
    return np.clip(np.asarray(z, dtype=np.float64), -l, l)


@dataclass(frozen=True)
class SparseBoxSet:
    """D = {x : ‖x‖₀ ≤ r, ‖x‖∞ ≤ l}."""

    r: int
    l: float

    def __post_init__(self):
        if int(self.r) != self.r or self.r < 1:
            raise ValidationError("r must be a positive integer", params={"r": self.r})
        validate_positive("l", self.l)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.count_nonzero(x) <= self.r and np.max(np.abs(x), initial=0.0) <= self.l)

    def project(self, z) -> np.ndarray:
        return project_sparse_box(z, self)


def project_sparse_box(z, box: SparseBoxSet) -> np.ndarray:
    """
    One element of Proj_D(z).

    Each coordinate is clamped to [-l, l]; the r coordinates with the largest
    gain vᵢ = zᵢ² - (clamp(zᵢ) - zᵢ)² are kept and the rest set to zero.
    Ties in vᵢ are broken by ascending index.

    Raises:
        ValidationError: r > n
    """
    z = as_vector(z, name="z")
    n = z.shape[0]
    if box.r > n:
        raise ValidationError(
            f"sparsity budget r={box.r} exceeds dimension n={n}",
            params={"r": box.r, "n": n},
        )
    clamped = np.clip(z, -box.l, box.l)
    gain = z * z - (clamped - z) ** 2
    # stable sort keeps ascending index order among equal gains
    keep = np.argsort(-gain, kind="stable")[: box.r]
    out = np.zeros_like(z)
    out[keep] = clamped[keep]
    return out


def brute_force_sparse_box(z, box: SparseBoxSet) -> np.ndarray:
    """
    Proj_D(z) by enumerating every support of size r. Exponential in n;
    only meant as a reference for small problems.
    """
    z = as_vector(z, name="z")
    n = z.shape[0]
    if box.r > n:
        raise ValidationError(
            f"sparsity budget r={box.r} exceeds dimension n={n}",
            params={"r": box.r, "n": n},
        )
    clamped = np.clip(z, -box.l, box.l)
    best, best_dist = None, math.inf
    for support in itertools.combinations(range(n), box.r):
        candidate = np.zeros_like(z)
        idx = list(support)
        candidate[idx] = clamped[idx]
        dist = float(np.sum((candidate - z) ** 2))
        if dist < best_dist:
            best, best_dist = candidate, dist
    return best


class AffineSet:
    """
    C = {x : Ax = b} for A of full row rank.

    The Cholesky factor of A·Aᵀ is computed once at construction and reused
    by every projection, so A† = Aᵀ(AAᵀ)⁻¹ is never formed explicitly.

    Raises:
        ValidationError: shapes are inconsistent or m > n
        FactorizationError: A is (numerically) rank deficient
    """

    def __init__(self, A, b, max_condition: float = MAX_GRAM_CONDITION):
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise ValidationError("A must be a 2-D matrix", params={"shape": A.shape})
        m, n = A.shape
        if m > n:
            raise ValidationError(
                "A must have at most as many rows as columns", params={"m": m, "n": n}
            )
        b = as_vector(b, m, name="b")

        self.A = A
        self.b = b
        self.m = m
        self.n = n
        self.solver_cache = self._factorize(A, max_condition)
        logger.debug(f"Factorized A·Aᵀ for affine set of shape {m}x{n}")

    @staticmethod
    def _factorize(A: np.ndarray, max_condition: float):
        gram = A @ A.T
        try:
            factor = linalg.cho_factor(gram, lower=True)
        except linalg.LinAlgError:
            estimate = float(np.linalg.cond(gram))
            logger.error(f"Cholesky factorization of A·Aᵀ failed, cond ≈ {estimate:.3e}")
            raise FactorizationError(
                f"A is rank deficient (cond(A·Aᵀ) ≈ {estimate:.3e})",
                condition_estimate=estimate,
            )
        diag = np.abs(np.diag(factor[0]))
        estimate = float((diag.max() / diag.min()) ** 2) if diag.min() > 0 else math.inf
        if estimate > max_condition:
            raise FactorizationError(
                f"A is numerically rank deficient (cond(A·Aᵀ) ≳ {estimate:.3e})",
                condition_estimate=estimate,
            )
        return factor

    @property
    def shape(self) -> tuple[int, int]:
        return self.m, self.n

    def residual(self, x) -> np.ndarray:
        """A·x - b."""
        return self.A @ x - self.b

    def apply_pinv(self, y) -> np.ndarray:
        """A†y = Aᵀ(AAᵀ)⁻¹y."""
        return self.A.T @ linalg.cho_solve(self.solver_cache, y)

    def project(self, z) -> np.ndarray:
        return project_affine(z, self)

    def distance(self, x) -> float:
        return float(np.linalg.norm(self.apply_pinv(self.residual(x))))


def project_affine(z, affine: AffineSet) -> np.ndarray:
    """Proj_C(z) = z - A†(Az - b)."""
    z = as_vector(z, affine.n, name="z")
    return z - affine.apply_pinv(affine.residual(z))


def affine_dist_smooth(affine: AffineSet) -> SmoothPart:
    """
    g = ½dist²(·, C), with ∇g(x) = x - Proj_C(x) = A†(Ax - b) and L = 1.

    prox_{γg}(z) = (z + γ·Proj_C(z)) / (1 + γ).
    """

    def gradient(x):
        return affine.apply_pinv(affine.residual(x))

    def value(x):
        d = gradient(x)
        return 0.5 * float(d @ d)

    def prox(z, gamma):
        return (z + gamma * project_affine(z, affine)) / (1.0 + gamma)

    return SmoothPart(value=value, gradient=gradient, lipschitz_L=1.0, prox=prox)


def prox_l1(z, tau: float) -> np.ndarray:
    """Soft thresholding: sign(z)·max(|z| - tau, 0)."""
    validate_positive("tau", tau)
    z = np.asarray(z, dtype=np.float64)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


# Smooth parts


def zero_smooth(n: int) -> SmoothPart:
    """g ≡ 0. L is reported as 1 (any positive constant bounds a zero gradient)."""
    return SmoothPart(
        value=lambda x: 0.0,
        gradient=lambda x: np.zeros(n),
        lipschitz_L=1.0,
        prox=lambda z, gamma: np.array(z, dtype=np.float64, copy=True),
    )


def quadratic_smooth(n: int) -> SmoothPart:
    """g = ½‖x‖², L = 1."""
    return SmoothPart(
        value=lambda x: 0.5 * float(x @ x),
        gradient=lambda x: np.array(x, dtype=np.float64, copy=True),
        lipschitz_L=1.0,
        prox=lambda z, gamma: np.asarray(z, dtype=np.float64) / (1.0 + gamma),
    )


def least_squares_smooth(A, b, cache: CacheBackend | None = None) -> SmoothPart:
    """
    g = ½‖Ax - b‖², L = λ_max(AᵀA).

    prox_{γg}(z) = (I + γAᵀA)⁻¹(z + γAᵀb); the Cholesky factor of I + γAᵀA is
    kept in cache per γ.
    """
    A = np.asarray(A, dtype=np.float64)
    b = as_vector(b, A.shape[0], name="b")
    cache = cache if cache is not None else FactorizationCache()
    gram = A.T @ A
    atb = A.T @ b
    lipschitz = float(np.linalg.eigvalsh(gram)[-1])

    def value(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    def gradient(x):
        return A.T @ (A @ x - b)

    def prox(z, gamma):
        key = float(gamma)
        factor = cache.get(key)
        if factor is None:
            factor = linalg.cho_factor(np.eye(A.shape[1]) + gamma * gram, lower=True)
            cache.set(key, factor)
            logger.debug(f"Cached I + γAᵀA factor for γ={gamma:.6g}")
        return linalg.cho_solve(factor, z + gamma * atb)

    return SmoothPart(value=value, gradient=gradient, lipschitz_L=lipschitz, prox=prox)


# Nonsmooth parts


def zero_nonsmooth() -> NonsmoothPart:
    """f ≡ 0, prox is the identity."""
    return NonsmoothPart(
        value=lambda x: 0.0,
        prox=lambda z, step: np.array(z, dtype=np.float64, copy=True),
    )


def indicator_zero() -> NonsmoothPart:
    """f = δ_{0}."""
    return NonsmoothPart(
        value=lambda x: 0.0 if not np.any(x) else math.inf,
        prox=lambda z, step: np.zeros_like(np.asarray(z, dtype=np.float64)),
    )


def l1_nonsmooth(tau: float) -> NonsmoothPart:
    """f = tau·‖x‖₁; prox with step λ is soft thresholding at λ·tau."""
    validate_positive("tau", tau)
    return NonsmoothPart(
        value=lambda x: tau * float(np.sum(np.abs(x))),
        prox=lambda z, step: prox_l1(z, step * tau),
    )


def sparse_box_indicator(box: SparseBoxSet) -> NonsmoothPart:
    """
    f = δ_D. prox with any step is Proj_D (λ_f = ∞); the selected element
    follows project_sparse_box's tie-breaking.
    """
    return NonsmoothPart(
        value=lambda x: 0.0 if box.contains(x) else math.inf,
        prox=lambda z, step: project_sparse_box(z, box),
    )


def feasibility_problem(affine: AffineSet, box: SparseBoxSet) -> CompositeProblem:
    """min δ_D(x) + ½dist²(x, C): zero exactly on C ∩ D."""
    return CompositeProblem(
        dim=affine.n,
        smooth=affine_dist_smooth(affine),
        nonsmooth=sparse_box_indicator(box),
    )

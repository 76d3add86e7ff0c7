import math

import numpy as np
import pytest

from frbsplit.bench import generate_instance
from frbsplit.exceptions import DimensionError, ValidationError
from frbsplit.problem import CompositeProblem, NonsmoothPart, SmoothPart, evaluate_objective
from frbsplit.prox import (
    SparseBoxSet,
    indicator_zero,
    l1_nonsmooth,
    least_squares_smooth,
    quadratic_smooth,
    sparse_box_indicator,
    zero_nonsmooth,
)
from tests.conftest import central_difference


def origin_problem(n=3):
    return CompositeProblem(dim=n, smooth=quadratic_smooth(n), nonsmooth=indicator_zero())


def test_objective_vanishes_at_origin():
    assert evaluate_objective(origin_problem(), np.zeros(3)) == 0.0


def test_objective_infinite_outside_dom_f():
    assert evaluate_objective(origin_problem(), [1.0, 0.0, 0.0]) == math.inf


def test_objective_zero_at_planted_solution():
    instance = generate_instance(5, 9, seed=1)
    assert evaluate_objective(instance.problem(), instance.planted) == pytest.approx(0.0, abs=1e-20)


def test_objective_dimension_mismatch():
    with pytest.raises(DimensionError):
        evaluate_objective(origin_problem(3), np.zeros(4))


def test_objective_is_deterministic(rng):
    A = rng.standard_normal((6, 4))
    b = rng.standard_normal(6)
    problem = CompositeProblem(4, least_squares_smooth(A, b), l1_nonsmooth(0.3))
    x = rng.standard_normal(4)
    assert evaluate_objective(problem, x) == evaluate_objective(problem, x)
    assert problem.objective(x) == evaluate_objective(problem, x)


def test_infinite_f_short_circuits_smooth_value():
    calls = []
    smooth = SmoothPart(
        value=lambda x: calls.append(x) or 0.0,
        gradient=lambda x: x,
        lipschitz_L=1.0,
    )
    problem = CompositeProblem(2, smooth, indicator_zero())
    assert problem.objective([1.0, 1.0]) == math.inf
    assert calls == []


@pytest.mark.parametrize("make_smooth", ["quadratic", "least_squares"])
def test_smooth_gradient_matches_finite_differences(rng, make_smooth):
    n = 5
    if make_smooth == "quadratic":
        smooth = quadratic_smooth(n)
    else:
        smooth = least_squares_smooth(rng.standard_normal((7, n)), rng.standard_normal(7))
    for _ in range(5):
        x = rng.standard_normal(n)
        grad = smooth.gradient(x)
        fd = central_difference(smooth.value, x)
        assert np.linalg.norm(fd - grad) <= 1e-5 * max(1.0, np.linalg.norm(grad))


def test_least_squares_gradient_is_lipschitz(rng):
    A = rng.standard_normal((8, 5))
    smooth = least_squares_smooth(A, rng.standard_normal(8))
    for _ in range(20):
        x, y = rng.standard_normal(5), rng.standard_normal(5)
        lhs = np.linalg.norm(smooth.gradient(x) - smooth.gradient(y))
        assert lhs <= smooth.lipschitz_L * np.linalg.norm(x - y) * (1 + 1e-10)


def test_least_squares_prox_is_optimal(rng):
    A = rng.standard_normal((8, 5))
    b = rng.standard_normal(8)
    smooth = least_squares_smooth(A, b)
    z = rng.standard_normal(5)
    for gamma in (0.1, 2.0, 0.1):
        p = smooth.prox(z, gamma)
        np.testing.assert_allclose(gamma * A.T @ (A @ p - b) + p - z, 0.0, atol=1e-10)


@pytest.mark.parametrize(
    "nonsmooth",
    [l1_nonsmooth(0.5), sparse_box_indicator(SparseBoxSet(2, 1.0)), zero_nonsmooth()],
)
def test_prox_never_worse_than_staying_put(rng, nonsmooth):
    for _ in range(20):
        z = rng.standard_normal(6)
        if nonsmooth.value(z) == math.inf:
            z = sparse_box_indicator(SparseBoxSet(2, 1.0)).prox(z, 1.0)
        lam = rng.uniform(0.05, 2.0)
        p = nonsmooth.prox(z, lam)
        assert nonsmooth.value(p) + np.sum((p - z) ** 2) / (2 * lam) <= nonsmooth.value(z) + 1e-12


def test_prox_beats_small_perturbations(rng):
    f = l1_nonsmooth(0.4)
    z = rng.standard_normal(6)
    lam = 0.7
    p = f.prox(z, lam)
    best = f.value(p) + np.sum((p - z) ** 2) / (2 * lam)
    for _ in range(50):
        d = 1e-3 * rng.standard_normal(6)
        assert best <= f.value(p + d) + np.sum((p + d - z) ** 2) / (2 * lam) + 1e-15


def test_invalid_parts_rejected():
    with pytest.raises(ValidationError):
        SmoothPart(value=lambda x: 0.0, gradient=lambda x: x, lipschitz_L=0.0)
    with pytest.raises(ValidationError):
        NonsmoothPart(value=lambda x: 0.0, prox=lambda z, s: z, prox_threshold=-1.0)
    with pytest.raises(ValidationError):
        CompositeProblem(0, quadratic_smooth(1), zero_nonsmooth())


def test_stepsize_bound():
    problem = origin_problem()
    assert problem.stepsize_bound() == 0.25
    capped = CompositeProblem(
        3, quadratic_smooth(3), NonsmoothPart(lambda x: 0.0, lambda z, s: z, prox_threshold=0.1)
    )
    assert capped.stepsize_bound() == 0.1

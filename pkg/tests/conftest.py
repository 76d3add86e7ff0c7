import dataclasses

import numpy as np
import pytest

from frbsplit.bench import generate_instance
from frbsplit.problem import CompositeProblem


class OracleCounter:
    """Wraps a problem so gradient and prox calls are counted."""

    def __init__(self, problem: CompositeProblem):
        self.gradient_calls = 0
        self.prox_calls = 0
        smooth, nonsmooth = problem.smooth, problem.nonsmooth

        def gradient(x):
            self.gradient_calls += 1
            return smooth.gradient(x)

        def prox(z, step):
            self.prox_calls += 1
            return nonsmooth.prox(z, step)

        self.problem = dataclasses.replace(
            problem,
            smooth=dataclasses.replace(smooth, gradient=gradient),
            nonsmooth=dataclasses.replace(nonsmooth, prox=prox),
        )


def central_difference(value, x, h=1e-6):
    grad = np.empty_like(x)
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (value(x + e) - value(x - e)) / (2 * h)
    return grad


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_instance():
    return generate_instance(20, 40, seed=3)


@pytest.fixture
def tiny_instance():
    return generate_instance(4, 8, seed=11)

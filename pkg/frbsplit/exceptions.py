# Basic exceptions


class FrbError(Exception):
    """Base exception for frbsplit errors."""
    pass


class ValidationError(FrbError):
    params = None
    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


class DimensionError(ValidationError):
    """Raised when a vector does not match the problem dimension."""
    pass


class ConfigurationError(FrbError):
    """Raised when solver or CLI configuration is invalid."""
    pass


class FactorizationError(FrbError):
    """Raised when A·Aᵀ cannot be factorized (A is not of full row rank)."""

    def __init__(self, message, condition_estimate: float | None = None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class UnsupportedProblemError(FrbError):
    """Raised when a solver needs an oracle the problem does not provide."""
    pass


class InsufficientDataError(FrbError):
    """Raised when a trace is too short for a rate fit."""
    pass


class SolverError(FrbError):
    """Raised when a benchmark trial fails; carries what is needed to reproduce it."""

    def __init__(self, message, *, seed=None, m=None, n=None, solver=None):
        super().__init__(message)
        self.seed = seed
        self.m = m
        self.n = n
        self.solver = solver


class ReportError(FrbError):
    """Raised when a report, trace or instance file cannot be written or read."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path

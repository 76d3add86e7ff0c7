import math
import os
from typing import Any

from frbsplit.exceptions import ConfigurationError

FRB_STEP_SIZE = 0.9999 * 0.25
ITSENG_STEP_SIZE = 0.1316
ITSENG_INERTIA = 0.125
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50_000
DEFAULT_STAGNATION_WINDOW = 5_000
# DR step when dr_gamma is unset: DR_GAMMA_FACTOR / L
DR_GAMMA_FACTOR = 0.25
# instance seeds, signed or unsigned 64-bit
SEED_RANGE = (-(2**63), 2**64)
# DR step on feasibility instances (L = 1), kept below √(3/2) − 1
DR_FEASIBILITY_GAMMA = 0.93 * (math.sqrt(1.5) - 1)


class SolverConfig:
    """
    Settings shared by the FRB, DR and inertial Tseng solvers.

    step_size is λ for FRB and λ′ for iTseng; DR uses dr_gamma and falls back
    to 0.25/L when it is None.
    """

    def __init__(
        self,
        step_size: float = FRB_STEP_SIZE,
        max_iter: int = DEFAULT_MAX_ITER,
        tol: float = DEFAULT_TOL,
        inertia_alpha: float = ITSENG_INERTIA,
        dr_gamma: float | None = None,
        enforce_stepsize_rule: bool = True,
        stagnation_window: int = DEFAULT_STAGNATION_WINDOW,
        record_trace: bool = True,
        keep_iterates: bool = False,
    ):
        self.step_size = step_size
        self.max_iter = max_iter
        self.tol = tol
        self.inertia_alpha = inertia_alpha
        self.dr_gamma = dr_gamma
        self.enforce_stepsize_rule = enforce_stepsize_rule
        self.stagnation_window = stagnation_window
        self.record_trace = record_trace
        self.keep_iterates = keep_iterates

        self.validate()

    @classmethod
    def frb_default(cls, **overrides) -> "SolverConfig":
        """FRB with λ = 0.9999·¼, the sparse feasibility setting."""
        return cls(**{"step_size": FRB_STEP_SIZE, **overrides})

    @classmethod
    def itseng_default(cls, **overrides) -> "SolverConfig":
        """Inertial Tseng with λ′ = 0.1316 and α = 1/8."""
        return cls(
            **{"step_size": ITSENG_STEP_SIZE, "inertia_alpha": ITSENG_INERTIA, **overrides}
        )

    @classmethod
    def dr_default(cls, **overrides) -> "SolverConfig":
        """Douglas-Rachford; γ resolves to 0.25/L at run start."""
        return cls(**{"dr_gamma": None, **overrides})

    @classmethod
    def dr_feasibility_default(cls, **overrides) -> "SolverConfig":
        """Douglas-Rachford with γ = 0.93·(√(3/2) − 1), the sparse feasibility setting."""
        return cls(**{"dr_gamma": DR_FEASIBILITY_GAMMA, **overrides})

    @classmethod
    def from_env(cls, **overrides) -> "SolverConfig":
        """
        Create config from environment variables.
        expected variables (all optional):
            - FRBSPLIT_STEP_SIZE
            - FRBSPLIT_MAX_ITER
            - FRBSPLIT_TOL
            - FRBSPLIT_INERTIA_ALPHA
            - FRBSPLIT_DR_GAMMA
        """
        env = {
            "step_size": ("FRBSPLIT_STEP_SIZE", float),
            "max_iter": ("FRBSPLIT_MAX_ITER", int),
            "tol": ("FRBSPLIT_TOL", float),
            "inertia_alpha": ("FRBSPLIT_INERTIA_ALPHA", float),
            "dr_gamma": ("FRBSPLIT_DR_GAMMA", float),
        }
        values: dict[str, Any] = {}
        for field, (var, cast) in env.items():
            raw = os.getenv(var)
            if raw is None:
                continue
            try:
                values[field] = cast(raw)
            except ValueError:
                raise ConfigurationError(f"{var} is not a valid {cast.__name__}: {raw!r}")
        values.update(overrides)
        return cls(**values)

    @classmethod
    def from_dict(cls, config_dict: dict[str, Any]) -> "SolverConfig":
        """
        Create config from dictionary. Unknown keys are rejected.
        """
        known = set(cls().__dict__)
        unknown = set(config_dict) - known
        if unknown:
            raise ConfigurationError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**config_dict)

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)

    def replace(self, **changes) -> "SolverConfig":
        return type(self)(**{**self.to_dict(), **changes})

    def validate(self) -> None:
        """Validate field ranges."""
        if not self.step_size > 0:
            raise ConfigurationError(f"step_size must be positive, got {self.step_size}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 0:
            raise ConfigurationError(f"max_iter must be a non-negative integer, got {self.max_iter}")
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be positive, got {self.tol}")
        if not 0 <= self.inertia_alpha < 1:
            raise ConfigurationError(
                f"inertia_alpha must lie in [0, 1), got {self.inertia_alpha}"
            )
        if self.dr_gamma is not None and not self.dr_gamma > 0:
            raise ConfigurationError(f"dr_gamma must be positive, got {self.dr_gamma}")
        if int(self.stagnation_window) != self.stagnation_window or self.stagnation_window < 1:
            raise ConfigurationError(
                f"stagnation_window must be a positive integer, got {self.stagnation_window}"
            )
        if self.keep_iterates and not self.record_trace:
            raise ConfigurationError("keep_iterates requires record_trace")

    def __repr__(self) -> str:
        fields = ", ".join(f"{k}={v!r}" for k, v in self.__dict__.items())
        return f"SolverConfig({fields})"

    def __eq__(self, other) -> bool:
        return isinstance(other, SolverConfig) and self.__dict__ == other.__dict__


SOLVER_NAMES = ("frb", "dr", "itseng")
COMMANDS = ("solve", "bench", "verify")


class CliConfig:
    """
    Flags of one command-line invocation.
    out_path defaults to $FRBSPLIT_OUTPUT_DIR/<command>.csv.
    """

    def __init__(
        self,
        command: str,
        m: int | None = None,
        n: int | None = None,
        solver: str | None = None,
        seed: int = 0,
        trials: int = 50,
        sizes: list[tuple[int, int]] | None = None,
        solvers: list[str] | None = None,
        lambda_override: float | None = None,
        alpha_override: float | None = None,
        gamma_override: float | None = None,
        tol: float = DEFAULT_TOL,
        max_iter: int = DEFAULT_MAX_ITER,
        enforce: bool = True,
        out_path: str | None = None,
        trace_path: str | None = None,
        workers: int = 1,
    ):
        self.command = command
        self.m = m
        self.n = n
        self.solver = solver.lower() if solver else solver
        self.seed = seed
        self.trials = trials
        self.sizes = sizes
        self.solvers = [s.lower() for s in solvers] if solvers else list(SOLVER_NAMES)
        self.lambda_override = lambda_override
        self.alpha_override = alpha_override
        self.gamma_override = gamma_override
        self.tol = tol
        self.max_iter = max_iter
        self.enforce = enforce
        self.out_path = out_path or self.default_out_path(command)
        self.trace_path = trace_path
        self.workers = workers

        self.validate()

    @staticmethod
    def default_out_path(command: str) -> str:
        return os.path.join(os.getenv("FRBSPLIT_OUTPUT_DIR", "."), f"{command}.csv")

    def validate(self) -> None:
        """Validate command-specific required fields; messages name the flag."""
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")

        if self.command == "solve":
            missing = [f"--{k}" for k in ("m", "n", "solver") if getattr(self, k) is None]
            if missing:
                raise ConfigurationError(f"solve requires {', '.join(missing)}")
        if self.command == "bench":
            if not self.sizes:
                raise ConfigurationError("--sizes: bench requires at least one size")
            if self.trials < 1:
                raise ConfigurationError("--trials: must be at least 1")
            for m, n in self.sizes:
                if m < 1 or n < 1:
                    raise ConfigurationError(f"--sizes: m and n must be positive, got {m}x{n}")
                if m >= n:
                    raise ConfigurationError(f"--sizes: m must be < n, got {m}x{n}")

        last_seed = self.seed + (self.trials - 1 if self.command == "bench" else 0)
        if not (SEED_RANGE[0] <= self.seed and last_seed < SEED_RANGE[1]):
            raise ConfigurationError(f"--seed: instance seeds must fit in 64 bits, got {self.seed}")
        if self.m is not None and self.m < 1:
            raise ConfigurationError("--m: must be a positive integer")
        if self.n is not None and self.n < 1:
            raise ConfigurationError("--n: must be a positive integer")
        if self.m is not None and self.n is not None and self.m >= self.n:
            raise ConfigurationError(f"--m: m must be < n (got m={self.m}, n={self.n})")
        if self.solver is not None and self.solver not in SOLVER_NAMES:
            raise ConfigurationError(f"--solver: must be one of {', '.join(SOLVER_NAMES)}")
        bad = [s for s in self.solvers if s not in SOLVER_NAMES]
        if bad:
            raise ConfigurationError(f"--solvers: unknown solver(s) {', '.join(bad)}")
        if not self.tol > 0:
            raise ConfigurationError("--tol: must be positive")
        if self.max_iter < 0:
            raise ConfigurationError("--max-iter: must be non-negative")
        if self.workers < 1:
            raise ConfigurationError("--workers: must be at least 1")

    def solver_config(self, solver: str | None = None, **extra) -> SolverConfig:
        """SolverConfig for one solver, starting from its preset and applying flag overrides."""
        solver = (solver or self.solver or "frb").lower()
        overrides: dict[str, Any] = {
            "tol": self.tol,
            "max_iter": self.max_iter,
            "enforce_stepsize_rule": self.enforce,
            **extra,
        }
        if solver == "frb":
            if self.lambda_override is not None:
                overrides["step_size"] = self.lambda_override
            return SolverConfig.frb_default(**overrides)
        if solver == "itseng":
            if self.lambda_override is not None:
                overrides["step_size"] = self.lambda_override
            if self.alpha_override is not None:
                overrides["inertia_alpha"] = self.alpha_override
            return SolverConfig.itseng_default(**overrides)
        if self.gamma_override is not None:
            overrides["dr_gamma"] = self.gamma_override
        return SolverConfig.dr_feasibility_default(**overrides)

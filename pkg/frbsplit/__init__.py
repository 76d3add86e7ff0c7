# Main exports
from frbsplit.config import SolverConfig
from frbsplit.exceptions import (
    ConfigurationError,
    DimensionError,
    FactorizationError,
    FrbError,
    InsufficientDataError,
    ReportError,
    SolverError,
    UnsupportedProblemError,
    ValidationError,
)
from frbsplit.merit import (
    SolverTrace,
    check_descent,
    check_residual_bound,
    estimate_linear_rate,
    frb_residual,
    merit_value,
)
from frbsplit.problem import CompositeProblem, NonsmoothPart, SmoothPart, evaluate_objective
from frbsplit.prox import (
    AffineSet,
    SparseBoxSet,
    affine_dist_smooth,
    feasibility_problem,
    project_affine,
    project_box,
    project_sparse_box,
    prox_l1,
)
from frbsplit.solvers import (
    RunReport,
    SolverKind,
    TerminationReason,
    dr_solve,
    frb_solve,
    frb_step,
    itseng_solve,
    solve,
    stopping_criterion,
)

__version__ = "0.1.0"

"""Min-max solutions of variational and optimal-control problems with an uncertain parameter."""

__version__ = "0.1.0"

from .el import (
    Classification,
    ELSolution,
    SaddleReport,
    assemble_el_residuals,
    classify_saddle,
    oracle_discrete_saddle,
    saddle_probe,
    solve_el,
)
from .errors import (
    ControlSolveFailed,
    DegenerateIntegrand,
    IntegrationDiverged,
    InvalidProblem,
    NonFiniteEvaluation,
    ProblemNotFound,
    SingularJacobian,
    VarimaxError,
)
from .numerics import NewtonConfig, TimeGrid, Trajectory, newton_solve, quadrature, rk4_integrate
from .oc import OCSolution, assemble_oc_residuals, classify_oc, solve_oc, solve_oc_initial_uncertainty
from .problems import (
    BoundarySpec,
    Box,
    FixedTimeFixedState,
    FixedTimeFreeState,
    FreeTimeFixedState,
    FreeTimeFreeState,
    IntegrandDef,
    OCProblem,
    Unbounded,
    VariationalProblem,
    lookup,
    registry,
    transform_initial_uncertainty,
)
from .robust import (
    CandidateControl,
    ScanResult,
    boundary_candidates,
    evaluate_cost_at,
    oc_saddle_probe,
    robust_candidates,
    worst_case_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")]

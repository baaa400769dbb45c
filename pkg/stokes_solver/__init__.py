from stokes_solver.methods import (
    StokesReport,
    a_lambda_operator,
    apply_a_lambda,
    apply_schur,
    method1_solve,
    method2_solve,
    schur_operator,
    solve_velocity,
)
from stokes_solver.preconditioners import (
    BmbtMass,
    InnerStats,
    SchurFamily,
    SchurPrecondKind,
    VelocityPrecondKind,
    apply_schur_precond,
    bmbt_operator,
    schur_precond_terms,
    schur_preconditioner,
    solve_bmbt,
    velocity_preconditioner,
)
from stokes_solver.projection import projection_step
from stokes_solver.system import NullspacePolicy, StokesSolveError, StokesSystem

__all__ = [
    "StokesReport",
    "a_lambda_operator",
    "apply_a_lambda",
    "apply_schur",
    "method1_solve",
    "method2_solve",
    "schur_operator",
    "solve_velocity",
    "BmbtMass",
    "InnerStats",
    "SchurFamily",
    "SchurPrecondKind",
    "VelocityPrecondKind",
    "apply_schur_precond",
    "bmbt_operator",
    "schur_precond_terms",
    "schur_preconditioner",
    "solve_bmbt",
    "velocity_preconditioner",
    "projection_step",
    "NullspacePolicy",
    "StokesSolveError",
    "StokesSystem",
]

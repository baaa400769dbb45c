import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator

from krylov.operators import as_operator, make_operator
from krylov.solvers import KrylovReport, cg, gmres
from multigrid.amg import FixedVCycles
from stokes_solver.preconditioners import (
    InnerStats,
    SchurPrecondKind,
    VelocityPrecondKind,
    apply_schur_precond,
    schur_preconditioner,
    velocity_preconditioner,
)
from stokes_solver.system import StokesSolveError, StokesSystem

# Внутренние решения скорости в операторе Шура и обратные подстановки
SCHUR_VELOCITY_KIND = VelocityPrecondKind("a3", FixedVCycles(2))
# Порог внутренних решений скорости (оператор Шура, правая часть, обратная подстановка)
INNER_TOL = 1e-10


@dataclass
class StokesReport:
    method: str
    outer: KrylovReport
    inner_iterations: int = 0
    velocity_applications: int = 0
    stages: Dict[str, KrylovReport] = field(default_factory=dict)
    wall_time: float = 0.0
    incompressibility: float = float("nan")

    @property
    def converged(self) -> bool:
        return self.outer.converged

    @property
    def iterations(self) -> int:
        return self.outer.iterations


def apply_a_lambda(system: StokesSystem, x: np.ndarray) -> np.ndarray:
    """A_lambda x = A x + lambda mu B^T M_Q^{-1} B x."""
    y = system.velocity_matrix @ x
    if system.rho > 0:
        y = y + system.rho * (system.divergence.T @ system.solve_mass_pressure(system.divergence @ x))
    return y


def a_lambda_operator(system: StokesSystem) -> LinearOperator:
    return make_operator(system.n_velocity, lambda x: apply_a_lambda(system, x), symmetric=True, fixed=True,
                         name="A_lambda")


def solve_velocity(system: StokesSystem, rhs: np.ndarray, kind: VelocityPrecondKind = SCHUR_VELOCITY_KIND,
                   rel_tol: float = 1e-10, max_iter: int = 2000,
                   augmented: bool = True) -> Tuple[np.ndarray, KrylovReport]:
    """
    CG для A_lambda U = rhs (augmented=False - для A без слагаемого расширенного лагранжиана).
    Предобуславливатель "до порога" включает гибкий CG.
    """
    op = a_lambda_operator(system) if augmented else as_operator(system.velocity_matrix, symmetric=True)
    precond = velocity_preconditioner(system, kind)
    return cg(op, precond, rhs, rel_tol=rel_tol, max_iter=max_iter, flexible=not precond.fixed)


def apply_schur(system: StokesSystem, p: np.ndarray, inner_tol: float = INNER_TOL,
                stats: Optional[InnerStats] = None) -> np.ndarray:
    """S_lambda p = B A_lambda^{-1} B^T p с внутренним CG."""
    w, report = solve_velocity(system, system.divergence.T @ p, rel_tol=inner_tol)
    if not report.converged:
        raise StokesSolveError("schur_velocity", report,
                               f"Inner velocity solve stopped at {report.final_residual:.3e} (tol {inner_tol:.1e})")
    if stats is not None:
        stats.velocity_iterations += report.iterations
    return system.constrain_pressure(system.divergence @ w)


def schur_operator(system: StokesSystem, inner_tol: float = INNER_TOL, stats: Optional[InnerStats] = None) -> LinearOperator:
    return make_operator(system.n_pressure, lambda p: apply_schur(system, p, inner_tol, stats), symmetric=True,
                         fixed=True, name="S_lambda")


def finalize_report(system: StokesSystem, report: StokesReport, u: np.ndarray, f_mod: np.ndarray, start: float):
    report.wall_time = time.perf_counter() - start
    report.incompressibility = system.incompressibility(u, f_mod)
    logging.info(f"{report.method}: {report.outer.iterations} outer / {report.inner_iterations} inner iterations, "
                 f"residual {report.outer.final_residual:.2e}, {report.wall_time:.2f}s")


def method1_solve(system: StokesSystem, f_mod: np.ndarray, schur_kind: SchurPrecondKind, rel_tol: float = 1e-10,
                  inner_tol: Optional[float] = None, restart: int = 200,
                  max_iter: int = 1000) -> Tuple[np.ndarray, np.ndarray, StokesReport]:
    """
    Метод 1: GMRES по давлению для S_lambda P = G - B A_lambda^{-1} F_lambda,
    затем U из A U = F + B^T P.
    """
    start = time.perf_counter()
    inner_tol = INNER_TOL if inner_tol is None else inner_tol
    stats = InnerStats()

    f_lambda = system.augmented_rhs(f_mod)
    w, first = solve_velocity(system, f_lambda, rel_tol=inner_tol)
    if not first.converged:
        raise StokesSolveError("velocity_rhs", first)
    rhs = system.constrain_pressure(system.divergence_rhs - system.divergence @ w)

    p, outer = gmres(schur_operator(system, inner_tol, stats), schur_preconditioner(system, schur_kind, stats), rhs,
                     rel_tol=rel_tol, restart=restart, max_iter=max_iter, project=system.constrain_pressure)
    p = system.normalize_pressure(p)

    u, back = solve_velocity(system, f_mod + system.divergence.T @ p, rel_tol=inner_tol, augmented=False)
    if not back.converged:
        raise StokesSolveError("velocity_backsolve", back)

    report = StokesReport(method="method1", outer=outer,
                          inner_iterations=stats.total + first.iterations + back.iterations,
                          stages={"velocity_rhs": first, "pressure": outer, "velocity_backsolve": back})
    finalize_report(system, report, u, f_mod, start)
    return u, p, report


def method2_solve(system: StokesSystem, f_mod: np.ndarray, schur_kind: SchurPrecondKind,
                  velocity_kind: VelocityPrecondKind, rel_tol: float = 1e-10, restart: int = 200,
                  max_iter: int = 1000,
                  velocity_inner_tol: Optional[float] = INNER_TOL) -> Tuple[np.ndarray, np.ndarray, StokesReport]:
    """
    Метод 2: FGMRES для полной системы с блочно-треугольным предобуславливателем
    (два обращения A_lambda на итерацию: CG до velocity_inner_tol с предобуславливателем A~).
    velocity_inner_tol=None - вместо CG однократное применение A~.
    """
    start = time.perf_counter()
    stats = InnerStats()
    n_u, n_p = system.n_velocity, system.n_pressure
    b = system.divergence
    a_lambda = a_lambda_operator(system)
    velocity_precond = velocity_preconditioner(system, velocity_kind)

    if velocity_inner_tol is None:
        def velocity_inverse(r):
            stats.velocity_applications += 1
            return velocity_precond.matvec(r)
    else:
        def velocity_inverse(r):
            stats.velocity_applications += 1
            x, report = cg(a_lambda, velocity_precond, r, rel_tol=velocity_inner_tol, flexible=not velocity_precond.fixed)
            if not report.converged:
                raise StokesSolveError("velocity_block", report)
            stats.velocity_iterations += report.iterations
            return x

    def project(z):
        return np.concatenate([z[:n_u], system.constrain_pressure(z[n_u:])])

    def apply(z):
        u, p = z[:n_u], z[n_u:]
        return np.concatenate([a_lambda.matvec(u) - b.T @ p, system.constrain_pressure(b @ u)])

    def precondition(r):
        w = velocity_inverse(r[:n_u])
        s = r[n_u:] - b @ w
        z_p = system.constrain_pressure(apply_schur_precond(system, schur_kind, s, stats))
        z_u = w + velocity_inverse(b.T @ z_p)
        return np.concatenate([z_u, z_p])

    rhs = np.concatenate([system.augmented_rhs(f_mod), system.divergence_rhs])
    z, outer = gmres(make_operator(n_u + n_p, apply, name="stokes"),
                     make_operator(n_u + n_p, precondition, fixed=False, name="block_triangular"),
                     rhs, rel_tol=rel_tol, restart=restart, max_iter=max_iter, project=project, flexible=True)
    u = z[:n_u]
    p = system.normalize_pressure(z[n_u:])

    report = StokesReport(method="method2", outer=outer, inner_iterations=stats.total,
                          velocity_applications=stats.velocity_applications, stages={"coupled": outer})
    finalize_report(system, report, u, f_mod, start)
    return u, p, report

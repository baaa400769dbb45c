import time
from typing import Tuple

import numpy as np

from krylov.operators import as_operator
from krylov.solvers import cg
from multigrid.amg import FixedVCycles, amg_operator
from stokes_solver.methods import StokesReport, finalize_report, solve_velocity
from stokes_solver.system import StokesSolveError, StokesSystem


def projection_step(system: StokesSystem, f_mod: np.ndarray, rel_tol: float = 1e-10,
                    max_iter: int = 2000) -> Tuple[np.ndarray, np.ndarray, StokesReport]:
    """
    Один шаг проекционного метода (вращательная форма) как эталон стоимости:
      A U~ = F;  tau L_Q phi = -(B U~ - G);  P = phi - mu M_Q^{-1} (B U~ - G).
    Возвращает непроецированную скорость U~ и давление.
    """
    start = time.perf_counter()
    u, velocity = solve_velocity(system, f_mod, rel_tol=rel_tol, max_iter=max_iter, augmented=False)
    if not velocity.converged:
        raise StokesSolveError("projection_velocity", velocity)

    defect = system.divergence @ u - system.divergence_rhs
    laplacian = amg_operator(system.hierarchy("pressure_laplacian"), FixedVCycles(2), name="L_Q")
    phi, poisson = cg(as_operator(system.tau * system.pressure_laplacian, symmetric=True), laplacian,
                      -(defect - defect.mean()), rel_tol=rel_tol, max_iter=max_iter,
                      project=lambda v: v - v.mean())
    if not poisson.converged:
        raise StokesSolveError("projection_poisson", poisson)

    mass = amg_operator(system.hierarchy("mass_pressure"), FixedVCycles(2), name="M_Q")
    correction, mass_report = cg(as_operator(system.mass_pressure, symmetric=True), mass, defect,
                                 rel_tol=rel_tol, max_iter=max_iter)
    if not mass_report.converged:
        raise StokesSolveError("projection_mass", mass_report)

    p = system.normalize_pressure(phi - system.mu * correction)
    report = StokesReport(method="projection", outer=velocity,
                          inner_iterations=poisson.iterations + mass_report.iterations,
                          stages={"velocity": velocity, "poisson": poisson, "mass": mass_report})
    finalize_report(system, report, u, f_mod, start)
    return u, p, report

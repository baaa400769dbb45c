import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from krylov.operators import as_operator, identity_operator

# Относительный порог "счастливого" обрыва процесса Арнольди
ARNOLDI_BREAKDOWN_TOL = 1e-13


class KrylovBreakdown(RuntimeError):
    """Обрыв CG: неположительная кривизна p^T A p или (z, r) <= 0."""

    def __init__(self, iteration: int, curvature: float, message: str = ""):
        self.iteration = iteration
        self.curvature = curvature
        super().__init__(message or f"CG breakdown at iteration {iteration}: curvature {curvature:.3e}")


@dataclass
class KrylovReport:
    method: str
    iterations: int = 0
    relative_residuals: List[float] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    final_residual: float = float("nan")
    restarts: int = 0
    flexible: bool = False

    def summary(self) -> dict:
        return {
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": self.final_residual,
            "wall_time": self.wall_time,
        }


def _prepare(op, precond, b, project):
    op = as_operator(op)
    n = op.shape[0]
    b = np.asarray(b, dtype=float).ravel()
    if b.shape[0] != n:
        raise ValueError(f"Right-hand side of length {b.shape[0]} for operator of size {n}")
    precond = identity_operator(n) if precond is None else as_operator(precond)
    if project is None:
        def project(v):
            return v
    return op, precond, b.copy(), project


def cg(op, precond, b: np.ndarray, rel_tol: float = 1e-10, max_iter: int = 1000,
       project: Optional[Callable] = None, flexible: bool = False) -> Tuple[np.ndarray, KrylovReport]:
    """
    Предобусловленный CG с нулевым начальным приближением.
    Сходимость объявляется только по истинной невязке ||b - A x|| / ||b||.
    Незафиксированный (до порога) предобуславливатель требует flexible=True:
    тогда beta считается по формуле Полака-Рибьера.
    """
    op, precond, b, project = _prepare(op, precond, b, project)
    if not flexible and not getattr(precond, "fixed", True):
        raise ValueError("CG requires a fixed preconditioner; pass flexible=True for threshold-based ones")
    start = time.perf_counter()
    report = KrylovReport(method="fcg" if flexible else "cg", relative_residuals=[1.0], flexible=flexible)

    b = project(b)
    x = np.zeros_like(b)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        report.converged = True
        report.final_residual = 0.0
        report.wall_time = time.perf_counter() - start
        return x, report

    r = b.copy()
    z = project(precond.matvec(r))
    rz = r @ z
    if rz <= 0:
        raise KrylovBreakdown(0, rz, f"Preconditioner is not positive definite: (z, r) = {rz:.3e}")
    p = z.copy()

    for k in range(1, max_iter + 1):
        q = project(op.matvec(p))
        curvature = p @ q
        if curvature <= 0:
            raise KrylovBreakdown(k, curvature)
        alpha = rz / curvature
        x += alpha * p
        r_old = r
        r = r - alpha * q
        rel = np.linalg.norm(r) / norm_b
        report.iterations = k
        report.relative_residuals.append(float(rel))

        if rel <= rel_tol:
            r_true = project(b - op.matvec(x))
            rel_true = np.linalg.norm(r_true) / norm_b
            if rel_true <= rel_tol:
                report.converged = True
                break
            # замена рекуррентной невязки истинной
            r = r_true

        z = project(precond.matvec(r))
        rz_new = r @ z
        if rz_new <= 0:
            raise KrylovBreakdown(k, rz_new, f"Preconditioner is not positive definite at iteration {k}")
        if flexible:
            beta = (z @ (r - r_old)) / rz
        else:
            beta = rz_new / rz
        rz = rz_new
        p = z + beta * p

    final = np.linalg.norm(project(b - op.matvec(x))) / norm_b
    report.final_residual = float(final)
    report.converged = bool(final <= rel_tol)
    report.wall_time = time.perf_counter() - start
    if not report.converged:
        logging.warning(f"{report.method}: no convergence after {report.iterations} iterations, "
                        f"relative residual {final:.3e} (tol {rel_tol:.1e})")
    return x, report


def _givens(a: float, b: float) -> Tuple[float, float]:
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def gmres(op, precond, b: np.ndarray, rel_tol: float = 1e-10, restart: int = 200, max_iter: int = 1000,
          project: Optional[Callable] = None, flexible: Optional[bool] = None) -> Tuple[np.ndarray, KrylovReport]:
    """
    GMRES(restart) с правым предобуславливанием и нулевым начальным приближением.
    Если предобуславливатель не фиксирован, используется гибкий вариант (FGMRES),
    который хранит предобусловленные векторы.
    """
    op, precond, b, project = _prepare(op, precond, b, project)
    if restart < 1:
        raise ValueError(f"restart must be >= 1, got {restart}")
    if flexible is None:
        flexible = not getattr(precond, "fixed", True)
    start = time.perf_counter()
    report = KrylovReport(method="fgmres" if flexible else "gmres", relative_residuals=[1.0], flexible=flexible)

    b = project(b)
    n = b.shape[0]
    x = np.zeros(n)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        report.converged = True
        report.final_residual = 0.0
        report.wall_time = time.perf_counter() - start
        return x, report

    r = b.copy()
    beta = norm_b
    total = 0
    rel_true = 1.0
    while True:
        m = restart
        basis = np.zeros((m + 1, n))
        zvecs = np.zeros((m, n)) if flexible else None
        hess = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        basis[0] = r / beta
        g[0] = beta
        used = 0
        breakdown = False

        for j in range(m):
            z = project(precond.matvec(basis[j]))
            if flexible:
                zvecs[j] = z
            w = project(op.matvec(z))
            w_norm = np.linalg.norm(w)
            # модифицированный Грам-Шмидт с повторной ортогонализацией
            for _ in range(2):
                for i in range(j + 1):
                    h = basis[i] @ w
                    hess[i, j] += h
                    w -= h * basis[i]
            hess[j + 1, j] = np.linalg.norm(w)
            breakdown = hess[j + 1, j] <= ARNOLDI_BREAKDOWN_TOL * max(w_norm, 1e-300)
            if not breakdown:
                basis[j + 1] = w / hess[j + 1, j]
            else:
                hess[j + 1, j] = 0.0

            for i in range(j):
                tmp = cs[i] * hess[i, j] + sn[i] * hess[i + 1, j]
                hess[i + 1, j] = -sn[i] * hess[i, j] + cs[i] * hess[i + 1, j]
                hess[i, j] = tmp
            cs[j], sn[j] = _givens(hess[j, j], hess[j + 1, j])
            hess[j, j] = cs[j] * hess[j, j] + sn[j] * hess[j + 1, j]
            hess[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            used = j + 1
            total += 1
            rel = abs(g[j + 1]) / norm_b
            report.relative_residuals.append(float(rel))
            if rel <= rel_tol or breakdown or total >= max_iter:
                break

        if used:
            y = solve_triangular(hess[:used, :used], g[:used], check_finite=False)
            if flexible:
                x += zvecs[:used].T @ y
            else:
                x += project(precond.matvec(basis[:used].T @ y))

        r = project(b - op.matvec(x))
        rel_true = np.linalg.norm(r) / norm_b
        report.iterations = total
        if rel_true <= rel_tol or total >= max_iter:
            break
        beta = np.linalg.norm(r)
        if breakdown and abs(g[used]) / norm_b > rel_tol:
            logging.debug(f"{report.method}: Arnoldi breakdown at iteration {total} without convergence, restarting")
        report.restarts += 1

    report.final_residual = float(rel_true)
    report.converged = bool(rel_true <= rel_tol)
    report.wall_time = time.perf_counter() - start
    if not report.converged:
        logging.warning(f"{report.method}: no convergence after {total} iterations, "
                        f"relative residual {rel_true:.3e} (tol {rel_tol:.1e})")
    return x, report

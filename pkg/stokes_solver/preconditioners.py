import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy.sparse.linalg import LinearOperator

from krylov.operators import make_operator
from krylov.solvers import KrylovReport, gmres
from multigrid.amg import AmgMode, FixedVCycles, ToThreshold, amg_apply, amg_operator, parse_mode
from stokes_solver.system import StokesSystem

VELOCITY_MATRICES = ("a1", "a2", "a3")


@dataclass
class InnerStats:
    """Счётчики внутренних итераций одного решения."""

    velocity_iterations: int = 0
    schur_iterations: int = 0
    velocity_applications: int = 0

    @property
    def total(self) -> int:
        return self.velocity_iterations + self.schur_iterations


@dataclass(frozen=True)
class VelocityPrecondKind:
    """Приближение A~ (a1, a2, a3) и режим AMG для него."""

    matrix: str = "a3"
    mode: AmgMode = FixedVCycles(2)

    def __post_init__(self):
        if self.matrix not in VELOCITY_MATRICES:
            raise ValueError(f"Unknown velocity approximation {self.matrix!r}")

    @property
    def label(self) -> str:
        return f"{self.matrix}x{self.mode.label}"

    @classmethod
    def parse(cls, token: str) -> "VelocityPrecondKind":
        """'a3x2vc' -> (a3, FixedVCycles(2)); 'a1xth' -> (a1, ToThreshold())."""
        matrix, sep, mode = token.strip().lower().partition("x")
        if not sep:
            raise ValueError(f"Velocity preconditioner token {token!r} must look like 'a3x2vc'")
        return cls(matrix=matrix, mode=parse_mode(mode))


class SchurFamily(str, Enum):
    C = "c"
    C_LAMBDA = "clambda"
    C_DELTA = "cdelta"


@dataclass(frozen=True)
class SchurPrecondKind:
    """
    mu (1 + lambda) (M_Q)_a^{-1} + tau^{-1} X^{-1}, где X^{-1}:
      c       - (B M_V^{-1} B^T)^{-1}, M_V через AMG в режиме b
      clambda - (B Lambda_V^{-1} B^T)^{-1} с диагональной Lambda_V
      cdelta  - (L_Q)_b^{-1}
    """

    family: SchurFamily = SchurFamily.C_LAMBDA
    mass_mode: AmgMode = FixedVCycles(2)
    second_mode: AmgMode = FixedVCycles(2)

    @property
    def label(self) -> str:
        if self.mass_mode == self.second_mode:
            return f"{self.family.value}x{self.mass_mode.label}"
        return f"{self.family.value}x{self.mass_mode.label},{self.second_mode.label}"

    @property
    def fixed(self) -> bool:
        """Линеен ли предобуславливатель (внутренние GMRES делают его нелинейным)."""
        return (self.family == SchurFamily.C_DELTA
                and isinstance(self.mass_mode, FixedVCycles)
                and isinstance(self.second_mode, FixedVCycles))

    @classmethod
    def parse(cls, token: str) -> "SchurPrecondKind":
        """'clambdax2vc', 'cxth', 'cdeltaxth,2vc'."""
        family, sep, modes = token.strip().lower().partition("x")
        if not sep:
            raise ValueError(f"Schur preconditioner token {token!r} must look like 'clambdax2vc'")
        parts = [parse_mode(m) for m in modes.split(",")]
        if len(parts) == 1:
            parts = parts * 2
        if len(parts) != 2:
            raise ValueError(f"Schur preconditioner token {token!r} has too many modes")
        return cls(family=SchurFamily(family), mass_mode=parts[0], second_mode=parts[1])


class BmbtMass(str, Enum):
    LUMPED = "lumped"
    CONSISTENT_TH = "consistent_th"
    CONSISTENT_2VC = "consistent_2vc"


def velocity_preconditioner(system: StokesSystem, kind: VelocityPrecondKind) -> LinearOperator:
    return amg_operator(system.hierarchy(f"velocity_{kind.matrix}"), kind.mode, name=kind.matrix)


def bmbt_operator(system: StokesSystem, mass: BmbtMass) -> LinearOperator:
    """x -> B M^{-1} B^T x для выбранного приближения массовой матрицы скорости."""
    mass = BmbtMass(mass)
    b = system.divergence
    if mass == BmbtMass.LUMPED:
        inverse = 1.0 / system.lumped_mass.diagonal()

        def solve(v):
            return inverse * v
    else:
        hierarchy = system.hierarchy("mass_velocity")
        mode = ToThreshold(system.operator_tol) if mass == BmbtMass.CONSISTENT_TH else FixedVCycles(2)

        def solve(v):
            return amg_apply(hierarchy, v, mode)[0]

    def apply(x):
        return system.constrain_pressure(b @ solve(b.T @ x))

    return make_operator(system.n_pressure, apply, symmetric=True, fixed=mass != BmbtMass.CONSISTENT_TH,
                         name=f"bmbt[{mass.value}]")


def solve_bmbt(system: StokesSystem, rhs: np.ndarray, mass: BmbtMass, rel_tol: float = 1e-10,
               precond_mode: AmgMode = None, restart: int = 200,
               max_iter: int = 1000) -> Tuple[np.ndarray, KrylovReport]:
    """
    GMRES для B M^{-1} B^T X = rhs, предобусловленный (eps M_Q + L_Q) через AMG.
    Решение определено с точностью до ядра оператора (проекция по политике системы).
    """
    if precond_mode is None:
        precond_mode = ToThreshold(system.threshold_tol)
    precond = amg_operator(system.hierarchy("shifted_pressure_laplacian"), precond_mode, name="shifted_laplacian")
    return gmres(bmbt_operator(system, mass), precond, system.constrain_pressure(np.asarray(rhs, dtype=float)),
                 rel_tol=rel_tol, restart=restart, max_iter=max_iter, project=system.constrain_pressure)


def schur_precond_terms(system: StokesSystem, kind: SchurPrecondKind, r: np.ndarray,
                        stats: Optional[InnerStats] = None,
                        bmbt_precond_mode: AmgMode = None) -> Tuple[np.ndarray, np.ndarray]:
    """Два слагаемых предобуславливателя Шура: массовое и "B M^{-1} B^T"/лапласово."""
    r = system.constrain_pressure(np.asarray(r, dtype=float))
    mass_part = amg_apply(system.hierarchy("mass_pressure"), r, kind.mass_mode)[0]
    mass_term = system.constrain_pressure(system.mu * (1.0 + system.lam) * mass_part)

    if kind.family == SchurFamily.C_DELTA:
        second = amg_apply(system.hierarchy("pressure_laplacian"), r - r.mean(), kind.second_mode)[0]
    else:
        if kind.family == SchurFamily.C_LAMBDA:
            mass = BmbtMass.LUMPED
        elif isinstance(kind.second_mode, ToThreshold):
            mass = BmbtMass.CONSISTENT_TH
        else:
            mass = BmbtMass.CONSISTENT_2VC
        second, report = solve_bmbt(system, r, mass, rel_tol=system.threshold_tol, precond_mode=bmbt_precond_mode)
        if stats is not None:
            stats.schur_iterations += report.iterations
        if not report.converged:
            logging.debug(f"Inner B M^-1 B^T solve stopped at {report.final_residual:.3e}")
    second_term = system.constrain_pressure(second / system.tau)
    return mass_term, second_term


def apply_schur_precond(system: StokesSystem, kind: SchurPrecondKind, r: np.ndarray,
                        stats: Optional[InnerStats] = None, bmbt_precond_mode: AmgMode = None) -> np.ndarray:
    mass_term, second_term = schur_precond_terms(system, kind, r, stats, bmbt_precond_mode)
    return mass_term + second_term


def schur_preconditioner(system: StokesSystem, kind: SchurPrecondKind, stats: Optional[InnerStats] = None,
                         bmbt_precond_mode: AmgMode = None) -> LinearOperator:
    return make_operator(system.n_pressure,
                         lambda r: apply_schur_precond(system, kind, r, stats, bmbt_precond_mode),
                         symmetric=True, fixed=kind.fixed, name=kind.label)

import logging
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional

import numpy as np
import scipy.sparse as sp

from fem_assembly.assembler import MatrixKind, assemble, assemble_load, lump_velocity_mass
from fem_assembly.boundary import (
    BoundaryCondition,
    apply_dirichlet,
    apply_dirichlet_divergence,
    dirichlet_condition,
)
from fem_assembly.spaces import MixedSpace
from mesh_builder.mesh import DIRICHLET_TAG
from multigrid.amg import AmgHierarchy, ToThreshold, amg_apply, amg_setup
from sparse_ops.operations import as_csr
from utils import project_mean_zero


class NullspacePolicy(str, Enum):
    PROJECT_MEAN_ZERO = "project_mean_zero"
    PINNED = "pinned"
    OPEN_BOUNDARY = "open_boundary"


class StokesSolveError(RuntimeError):
    """Внутренний этап метода не сошёлся."""

    def __init__(self, stage: str, report=None, message: str = ""):
        self.stage = stage
        self.report = report
        super().__init__(message or f"Stokes solve failed at stage '{stage}'")


# (сильный порог AMG, размер блока) для каждого приближения
HIERARCHY_SETTINGS = {
    "velocity_a1": (0.7, 2),
    "velocity_a2": (0.7, 2),
    "velocity_a3": (0.1, 2),
    "mass_velocity": (0.1, 2),
    "mass_pressure": (0.1, 1),
    "shifted_pressure_laplacian": (0.1, 1),
    "pressure_laplacian": (0.1, 1),
}

# сдвиг eps в (eps M_Q + L_Q) для предобуславливания B M_V^{-1} B^T
LAPLACIAN_SHIFT = 1.0
THRESHOLD_TOL = 1e-10
OPERATOR_TOL = 1e-10


def _eliminate(matrix, bc: BoundaryCondition) -> sp.csr_matrix:
    return apply_dirichlet(matrix, None, bc)[0]


@dataclass(eq=False)
class StokesSystem:
    """
    Обобщённая задача Стокса  A U - B^T P = F,  B U = G  с
    A = tau^{-1} M_V + mu E_V и граничными условиями Дирихле, исключёнными симметрично.

    threshold_tol - порог для решений "до сходимости" внутри предобуславливателей,
    operator_tol  - порог для решений внутри операторов (A_lambda, B M_V^{-1} B^T).
    """

    space: MixedSpace
    tau: float
    mu: float
    lam: float
    policy: NullspacePolicy
    bc: BoundaryCondition
    velocity_matrix: sp.csr_matrix
    mass_velocity: sp.csr_matrix
    mass_pressure: sp.csr_matrix
    divergence: sp.csr_matrix
    divergence_rhs: np.ndarray
    divergence_lift: np.ndarray
    lumped_mass: sp.csr_matrix
    vector_laplacian: sp.csr_matrix
    grad_div: sp.csr_matrix
    pressure_laplacian: sp.csr_matrix
    raw_velocity_matrix: sp.csr_matrix
    threshold_tol: float = THRESHOLD_TOL
    operator_tol: float = OPERATOR_TOL
    _hierarchies: Dict[str, AmgHierarchy] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def build(cls, space: MixedSpace, tau: float, mu: float, lam: float = 0.0,
              boundary: Optional[Callable] = None, policy: NullspacePolicy = None,
              form: str = "strain", **tolerances) -> "StokesSystem":
        if not tau > 0:
            raise ValueError(f"tau must be positive, got {tau!r}")
        if not mu > 0:
            raise ValueError(f"mu must be positive, got {mu!r}")
        if lam < 0:
            raise ValueError(f"lambda must be non-negative, got {lam!r}")
        if policy is None:
            has_open = np.any(space.mesh.boundary_tags != DIRICHLET_TAG)
            policy = NullspacePolicy.OPEN_BOUNDARY if has_open else NullspacePolicy.PROJECT_MEAN_ZERO
        policy = NullspacePolicy(policy)

        bc = dirichlet_condition(space, boundary)
        mass_v = assemble(MatrixKind.MASS_VELOCITY, space)
        laplacian_v = assemble(MatrixKind.VECTOR_LAPLACIAN, space)
        grad_div = assemble(MatrixKind.GRAD_DIV, space)
        if form == "strain":
            viscous = assemble(MatrixKind.STRAIN_STIFFNESS, space)
        elif form == "laplacian":
            viscous = laplacian_v + grad_div
        else:
            raise ValueError(f"Unknown viscous form {form!r}")
        raw_a = as_csr(mass_v / tau + mu * viscous)

        divergence, g = apply_dirichlet_divergence(assemble(MatrixKind.DIVERGENCE, space), bc)
        lumped = lump_velocity_mass(space)
        free = bc.free_mask(space.n_velocity)
        lumped = sp.diags(lumped.diagonal() * free + (1.0 - free)).tocsr()

        system = cls(
            space=space, tau=float(tau), mu=float(mu), lam=float(lam), policy=policy, bc=bc,
            velocity_matrix=_eliminate(raw_a, bc),
            mass_velocity=_eliminate(mass_v, bc),
            mass_pressure=assemble(MatrixKind.MASS_PRESSURE, space),
            divergence=divergence,
            divergence_rhs=g,
            divergence_lift=g,
            lumped_mass=lumped,
            vector_laplacian=as_csr(sp.diags(free) @ laplacian_v @ sp.diags(free)),
            grad_div=as_csr(sp.diags(free) @ grad_div @ sp.diags(free)),
            pressure_laplacian=assemble(MatrixKind.PRESSURE_LAPLACIAN, space),
            raw_velocity_matrix=raw_a,
            **tolerances,
        )
        system.divergence_rhs = system.constrain_pressure(g)
        logging.info(f"Stokes system: {space.n_velocity} velocity + {space.n_pressure} pressure dofs, "
                     f"tau={tau:.4g}, mu={mu:.4g}, lambda={lam:.4g}, policy={policy.value}")
        return system

    @property
    def n_velocity(self) -> int:
        return self.space.n_velocity

    @property
    def n_pressure(self) -> int:
        return self.space.n_pressure

    @property
    def rho(self) -> float:
        """Параметр расширенного лагранжиана rho = lambda * mu."""
        return self.lam * self.mu

    def constrain_pressure(self, p: np.ndarray) -> np.ndarray:
        """Проекция на допустимое подпространство давления (зависит от политики ядра)."""
        if self.policy == NullspacePolicy.PROJECT_MEAN_ZERO:
            return project_mean_zero(p)
        if self.policy == NullspacePolicy.PINNED:
            q = np.array(p, dtype=float)
            q[0] = 0.0
            return q
        return p

    def normalize_pressure(self, p: np.ndarray) -> np.ndarray:
        """P -= (1^T M_Q P) / (1^T M_Q 1); при открытой границе давление единственно."""
        if self.policy == NullspacePolicy.OPEN_BOUNDARY:
            return p
        weights = np.asarray(self.mass_pressure.sum(axis=0)).ravel()
        return p - (weights @ p) / weights.sum()

    def velocity_rhs(self, f: Callable, with_parameters: bool = False) -> np.ndarray:
        """Вектор нагрузки с учётом граничных условий."""
        if with_parameters:
            load = assemble_load(self.space, f, tau=self.tau, mu=self.mu)
        else:
            load = assemble_load(self.space, f)
        return apply_dirichlet(self.raw_velocity_matrix, load, self.bc)[1]

    def tilde_matrix(self, kind: str) -> sp.csr_matrix:
        """
        a1: A + lambda mu D,  a2: A,  a3: tau^{-1} M_V + mu L_V
        (все с исключёнными условиями Дирихле).
        """
        if kind == "a1":
            return as_csr(self.velocity_matrix + self.rho * self.grad_div)
        if kind == "a2":
            return self.velocity_matrix
        if kind == "a3":
            free = self.bc.free_mask(self.n_velocity)
            constrained = sp.diags(1.0 - free)
            return as_csr((self.mass_velocity - constrained) / self.tau + self.mu * self.vector_laplacian + constrained)
        raise ValueError(f"Unknown velocity approximation {kind!r}")

    def _hierarchy_matrix(self, name: str) -> sp.csr_matrix:
        if name.startswith("velocity_"):
            return self.tilde_matrix(name.split("_", 1)[1])
        if name == "mass_velocity":
            return self.mass_velocity
        if name == "mass_pressure":
            return self.mass_pressure
        if name == "shifted_pressure_laplacian":
            return as_csr(LAPLACIAN_SHIFT * self.mass_pressure + self.pressure_laplacian)
        if name == "pressure_laplacian":
            return self.pressure_laplacian
        raise ValueError(f"Unknown hierarchy {name!r}")

    def hierarchy(self, name: str) -> AmgHierarchy:
        with self._lock:
            if name not in self._hierarchies:
                theta, block = HIERARCHY_SETTINGS[name]
                self._hierarchies[name] = amg_setup(self._hierarchy_matrix(name), strong_threshold=theta,
                                                    block_size=block)
            return self._hierarchies[name]

    def prepare(self, *names: str) -> None:
        """Строит иерархии AMG заранее (чтобы не учитывать setup во времени решения)."""
        for name in names:
            self.hierarchy(name)

    def solve_mass_pressure(self, r: np.ndarray, rel_tol: Optional[float] = None) -> np.ndarray:
        tol = self.operator_tol if rel_tol is None else rel_tol
        return amg_apply(self.hierarchy("mass_pressure"), r, ToThreshold(tol))[0]

    def augmented_rhs(self, f_mod: np.ndarray, lifted: bool = False) -> np.ndarray:
        """
        F_lambda = F + lambda mu B^T M_Q^{-1} G. lifted=True берёт G = -B g без проекции:
        так слагаемое расширенного лагранжиана учитывает граничные значения
        в задаче только для скорости.
        """
        g = self.divergence_lift if lifted else self.divergence_rhs
        if self.rho == 0.0 or not np.any(g):
            return np.array(f_mod, dtype=float)
        return f_mod + self.rho * (self.divergence.T @ self.solve_mass_pressure(g))

    def incompressibility(self, u: np.ndarray, f_mod: np.ndarray) -> float:
        """||B U - G|| / ||F||."""
        defect = self.constrain_pressure(self.divergence @ u - self.divergence_rhs)
        return float(np.linalg.norm(defect) / max(np.linalg.norm(f_mod), 1e-300))

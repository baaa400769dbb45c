from fem_assembly.assembler import (
    MatrixKind,
    assemble,
    assemble_load,
    assemble_velocity_system,
    lump_velocity_mass,
)
from fem_assembly.basis import LagrangeBasis, lagrange_basis, reference_nodes
from fem_assembly.boundary import (
    BoundaryCondition,
    apply_dirichlet,
    apply_dirichlet_divergence,
    dirichlet_condition,
    interpolate,
)
from fem_assembly.norms import discrete_relative_error, mean_value, relative_l1_error, relative_l2_error
from fem_assembly.quadrature import TriangleRule, subdivided_rule, triangle_rule
from fem_assembly.spaces import CellGeometry, MixedSpace

__all__ = [
    "MatrixKind",
    "assemble",
    "assemble_load",
    "assemble_velocity_system",
    "lump_velocity_mass",
    "LagrangeBasis",
    "lagrange_basis",
    "reference_nodes",
    "BoundaryCondition",
    "apply_dirichlet",
    "apply_dirichlet_divergence",
    "dirichlet_condition",
    "interpolate",
    "discrete_relative_error",
    "mean_value",
    "relative_l1_error",
    "relative_l2_error",
    "TriangleRule",
    "subdivided_rule",
    "triangle_rule",
    "CellGeometry",
    "MixedSpace",
]

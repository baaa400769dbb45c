from mesh_builder.mesh import (
    DIRICHLET_TAG,
    OPEN_TAG,
    Mesh,
    MeshError,
    build_unit_square_mesh,
    read_mesh,
    refine,
    write_mesh,
)
from mesh_builder.dofs import DofMap, UnsupportedDegreeError, lagrange_dof_layout

__all__ = [
    "DIRICHLET_TAG",
    "OPEN_TAG",
    "Mesh",
    "MeshError",
    "build_unit_square_mesh",
    "read_mesh",
    "refine",
    "write_mesh",
    "DofMap",
    "UnsupportedDegreeError",
    "lagrange_dof_layout",
]

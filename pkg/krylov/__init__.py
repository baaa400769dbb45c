from krylov.operators import as_operator, identity_operator, linearity_defect, make_operator
from krylov.solvers import KrylovBreakdown, KrylovReport, cg, gmres

__all__ = [
    "as_operator",
    "identity_operator",
    "linearity_defect",
    "make_operator",
    "KrylovBreakdown",
    "KrylovReport",
    "cg",
    "gmres",
]

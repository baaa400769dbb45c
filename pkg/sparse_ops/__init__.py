from sparse_ops.operations import (
    DENSE_ORACLE_LIMIT,
    AsymmetricMatrixError,
    DimensionMismatchError,
    OracleSizeError,
    SingularMatrixError,
    as_csr,
    dense_eigs_sym,
    dense_generalized_eigs,
    dense_pinv,
    dense_solve,
    densify,
    dump_matrix_coo,
    sparsify,
    spmv,
    spmv_transpose,
)

__all__ = [
    "DENSE_ORACLE_LIMIT",
    "AsymmetricMatrixError",
    "DimensionMismatchError",
    "OracleSizeError",
    "SingularMatrixError",
    "as_csr",
    "dense_eigs_sym",
    "dense_generalized_eigs",
    "dense_pinv",
    "dense_solve",
    "densify",
    "dump_matrix_coo",
    "sparsify",
    "spmv",
    "spmv_transpose",
]

"""Sparse storage, SPD factorisation, dense pencil oracles and Krylov solvers."""
from .sparse import (
    DensePencil,
    SparseMatrix,
    SpdFactorization,
    as_csr,
    dense_fractional_apply,
    dense_sym_gen_eig,
    dump_matrix_market,
    factorize_spd,
    spmv,
)
from .krylov import KrylovStats, as_operator, fgmres, gmres, pcg

__all__ = [
    "DensePencil",
    "KrylovStats",
    "SparseMatrix",
    "SpdFactorization",
    "as_csr",
    "as_operator",
    "dense_fractional_apply",
    "dense_sym_gen_eig",
    "dump_matrix_market",
    "factorize_spd",
    "fgmres",
    "gmres",
    "pcg",
    "spmv",
]

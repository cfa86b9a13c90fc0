"""
Sparse storage, banded SPD factorisation and small dense eigen-solvers.

Subdomain blocks come from a structured grid, so after a reverse
Cuthill-McKee ordering they are narrow-banded; the factorisation stores the
upper band of ``P A Pᵀ`` and costs O(k² n) for bandwidth k.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from ..utils.exceptions import (
    DimensionMismatchError,
    IndefiniteMatrixError,
    NonPositiveSpectrumError,
    ReportingError,
)
from ..utils.logging import get_logger

logger = get_logger(__name__)

SparseMatrix = sp.csr_matrix

SYMMETRY_RTOL = 1e-12
SPECTRUM_RTOL = 1e-13


def as_csr(A: Union[sp.spmatrix, np.ndarray]) -> sp.csr_matrix:
    """Canonical CSR copy: sorted, duplicate-free column indices."""
    matrix = sp.csr_matrix(A, dtype=float)
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def spmv(A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    """
    Sparse matrix-vector product.

    Raises:
        DimensionMismatchError: If ``x`` does not match the column count
    """
    if x.shape[0] != A.shape[1]:
        raise DimensionMismatchError("spmv operand", A.shape[1], x.shape[0])
    return A @ x


def dump_matrix_market(A: sp.spmatrix, path: Path) -> Path:
    """Write a matrix in MatrixMarket coordinate format for debugging."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        scipy.io.mmwrite(str(path), sp.coo_matrix(A))
    except OSError as e:
        raise ReportingError(path, str(e)) from e
    return path


@dataclass(frozen=True)
class SpdFactorization:
    """Banded Cholesky factor ``UᵀU = P A Pᵀ`` of an SPD matrix."""
    n: int
    bandwidth: int
    permutation: np.ndarray
    factor: np.ndarray

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve ``A x = b`` for a vector or a column block."""
        if b.shape[0] != self.n:
            raise DimensionMismatchError("right-hand side", self.n, b.shape[0])
        if self.n == 0:
            return np.zeros(b.shape)
        y = scipy.linalg.cho_solve_banded((self.factor, False), b[self.permutation], check_finite=False)
        x = np.empty_like(y)
        x[self.permutation] = y
        return x


def factorize_spd(A: Union[sp.spmatrix, np.ndarray], check_symmetry: bool = True) -> SpdFactorization:
    """
    Factorise a symmetric positive definite matrix.

    Args:
        A: Square symmetric matrix
        check_symmetry: Reject matrices that are not symmetric to round-off

    Returns:
        SpdFactorization

    Raises:
        IndefiniteMatrixError: If A is not symmetric or a pivot is not positive
    """
    matrix = as_csr(A)
    n = matrix.shape[0]
    if matrix.shape[1] != n:
        raise DimensionMismatchError("square matrix", (n, n), matrix.shape)
    if n == 0:
        return SpdFactorization(n=0, bandwidth=0, permutation=np.zeros(0, dtype=np.int64),
                                factor=np.zeros((1, 0)))

    if check_symmetry:
        scale = abs(matrix).max()
        asymmetry = abs(matrix - matrix.T).max() if matrix.nnz else 0.0
        if asymmetry > SYMMETRY_RTOL * max(scale, 1e-300):
            raise IndefiniteMatrixError(f"Matrix is not symmetric (max |A - Aᵀ| = {asymmetry:.3e})")

    perm = np.asarray(reverse_cuthill_mckee(matrix, symmetric_mode=True), dtype=np.int64)
    permuted = matrix[perm][:, perm].tocoo()
    upper = permuted.row <= permuted.col
    rows, cols, vals = permuted.row[upper], permuted.col[upper], permuted.data[upper]
    bandwidth = int((cols - rows).max()) if rows.size else 0

    band = np.zeros((bandwidth + 1, n))
    np.add.at(band, (bandwidth + rows - cols, cols), vals)

    try:
        factor = scipy.linalg.cholesky_banded(band, lower=False, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise IndefiniteMatrixError(f"Matrix is not positive definite: {e}") from e

    logger.debug(f"Factorised SPD matrix n={n}, bandwidth={bandwidth}")
    return SpdFactorization(n=n, bandwidth=bandwidth, permutation=perm, factor=factor)


def dense_sym_gen_eig(A: np.ndarray, B: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve ``A y = θ B y`` for symmetric A and SPD B.

    Returns:
        (eigenvalues ascending, eigenvectors with ``YᵀBY = I``)

    Raises:
        IndefiniteMatrixError: If B is not positive definite
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError("pencil", A.shape, B.shape)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    try:
        theta, Y = scipy.linalg.eigh(A, B)
    except np.linalg.LinAlgError as e:
        raise IndefiniteMatrixError(f"Right-hand pencil matrix is not positive definite: {e}") from e
    return theta, Y


def fractional_weights(eigenvalues: np.ndarray, theta: float, power_sign: int, variant: str = "reduced") -> np.ndarray:
    """
    Spectral weights of the fractional norm in the pencil eigenbasis.

    ``reduced``: Λ^{±(1-θ)}; ``full``: (1 + Λ^{1-θ})^{±1}.
    """
    powered = eigenvalues ** (1.0 - theta)
    if variant == "full":
        powered = 1.0 + powered
    elif variant != "reduced":
        raise ValueError(f"Unknown norm variant: {variant}")
    return powered if power_sign > 0 else 1.0 / powered


class DensePencil:
    """
    Cached generalised eigendecomposition ``LΦ = MΦΛ``, ``ΦᵀMΦ = I``.

    ``H̃_θ = MΦΛ^{1-θ}ΦᵀM`` and ``H̃_θ⁻¹ = ΦΛ^{θ-1}Φᵀ``.
    """

    def __init__(self, M: np.ndarray, L: np.ndarray):
        M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
        L = L.toarray() if sp.issparse(L) else np.asarray(L, dtype=float)
        self.M = M
        self.eigenvalues, self.eigenvectors = dense_sym_gen_eig(L, M)
        if self.eigenvalues.size:
            smallest = self.eigenvalues[0]
            if smallest <= SPECTRUM_RTOL * max(abs(self.eigenvalues).max(), 1.0):
                raise NonPositiveSpectrumError(float(smallest), "pencil (L, M)")

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    def apply(self, theta: float, v: np.ndarray, power_sign: int = 1, variant: str = "reduced") -> np.ndarray:
        if v.shape[0] != self.size:
            raise DimensionMismatchError("pencil vector", self.size, v.shape[0])
        phi = self.eigenvectors
        weights = fractional_weights(self.eigenvalues, theta, power_sign, variant)
        if power_sign > 0:
            return self.M @ (phi @ (weights * (phi.T @ (self.M @ v))))
        return phi @ (weights * (phi.T @ v))


def dense_fractional_apply(
    M: np.ndarray,
    L: np.ndarray,
    theta: float,
    v: np.ndarray,
    power_sign: int = 1,
    variant: str = "reduced",
) -> np.ndarray:
    """
    Apply ``H̃_θ = M(M⁻¹L)^{1-θ}`` (power_sign=+1) or its inverse (-1) densely.

    Raises:
        NonPositiveSpectrumError: If the pencil (L, M) has a non-positive eigenvalue
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if power_sign not in (1, -1):
        raise ValueError(f"power_sign must be +1 or -1, got {power_sign}")
    return DensePencil(M, L).apply(theta, np.asarray(v, dtype=float), power_sign, variant)

"""Sparse matrix substrate: CSR products, direct factorizations and Matrix Market I/O."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Protocol

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .exceptions import DimensionMismatch, NotPositiveDefinite, SingularMatrix

logger = logging.getLogger(__name__)

FactorKind = Literal["lu", "spd"]

# Significant digits written to .mtx files; 17 round-trips every float64.
MTX_PRECISION = 17


def as_csr(A) -> sp.csr_matrix:
    """Return A as canonical CSR: sorted, duplicate-free column indices, float64 values."""
    A = sp.csr_matrix(A, dtype=np.float64)
    A.sum_duplicates()
    A.sort_indices()
    return A


def matvec(A: sp.csr_matrix, x) -> np.ndarray:
    """Row-major product A @ x."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"matvec: A is {A.shape}, x has shape {x.shape}")
    return A @ x


def matvec_transpose(A: sp.csr_matrix, x) -> np.ndarray:
    """Product A.T @ x without forming the transpose (CSR.T is a CSC view)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"matvec_transpose: A is {A.shape}, x has shape {x.shape}")
    return A.T @ x


class InnerSolver(Protocol):
    """Anything that can apply A^{-1} and A^{-T}; an AMG cycle would fit here."""

    shape: tuple[int, int]

    def solve(self, b: np.ndarray) -> np.ndarray: ...

    def solve_transpose(self, b: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Factorization:
    """Sparse LU (SuperLU) of a square matrix; for ``spd`` it is an LDL^T in disguise."""

    kind: FactorKind
    shape: tuple[int, int]
    lu: object

    def solve(self, b) -> np.ndarray:
        return solve(self, b)

    def solve_transpose(self, b) -> np.ndarray:
        return solve_transpose(self, b)


def factorize(A, kind: FactorKind = "lu") -> Factorization:
    """Factorize a square sparse matrix.

    ``kind="spd"`` uses a symmetric ordering without pivoting and then checks that every
    pivot is positive, which rejects indefinite and nonsymmetric input.
    """
    A = as_csr(A)
    n, m = A.shape
    if n != m:
        raise DimensionMismatch(f"factorize needs a square matrix, got {A.shape}")
    if kind not in ("lu", "spd"):
        raise ValueError(f"unknown factorization kind {kind!r}")

    if kind == "spd":
        asym = abs(A - A.T)
        if asym.nnz and asym.max() > 1e-12 * max(abs(A).max(), 1.0):
            raise NotPositiveDefinite("matrix is not symmetric")
        options = {"SymmetricMode": True}
        try:
            lu = splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options=options)
        except RuntimeError as exc:
            raise NotPositiveDefinite(f"factorization broke down: {exc}") from exc
        # diagonal pivoting keeps the permutation symmetric, so pivot signs give the inertia
        pivots = lu.U.diagonal()
        if np.any(pivots <= 0.0):
            raise NotPositiveDefinite("matrix has a nonpositive pivot")
    else:
        try:
            lu = splu(A.tocsc())
        except RuntimeError as exc:
            raise SingularMatrix(f"matrix is singular: {exc}") from exc
        pivots = lu.U.diagonal()
        if np.any(pivots == 0.0) or not np.all(np.isfinite(pivots)):
            raise SingularMatrix("matrix is singular: zero pivot")

    logger.debug("factorized %s matrix n=%d nnz(L+U)=%d", kind, n, lu.L.nnz + lu.U.nnz)
    return Factorization(kind=kind, shape=(n, n), lu=lu)


def _check_rhs(F: Factorization, b) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != F.shape[0]:
        raise DimensionMismatch(f"solve: factorization is {F.shape}, b has shape {b.shape}")
    return b


def solve(F: Factorization, b) -> np.ndarray:
    """Solve A x = b with a stored factorization."""
    return F.lu.solve(_check_rhs(F, b))


def solve_transpose(F: Factorization, b) -> np.ndarray:
    """Solve A^T x = b with a stored factorization."""
    return F.lu.solve(_check_rhs(F, b), trans="T")


# Matrix Market


def write_mtx(path, A, symmetric: bool = False) -> None:
    """Write a sparse matrix in coordinate format (general, or symmetric lower triangle)."""
    A = as_csr(A)
    scipy.io.mmwrite(
        str(path),
        A.tocoo(),
        field="real",
        symmetry="symmetric" if symmetric else "general",
        precision=MTX_PRECISION,
    )


def read_mtx(path) -> sp.csr_matrix:
    M = scipy.io.mmread(str(path))
    return as_csr(M)


def write_vector_mtx(path, v) -> None:
    """Write a vector as an n x 1 coordinate matrix; zero entries are kept explicit."""
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[0]
    col = sp.coo_matrix((v, (np.arange(n), np.zeros(n, dtype=int))), shape=(n, 1))
    scipy.io.mmwrite(str(path), col, field="real", precision=MTX_PRECISION)


def read_vector_mtx(path) -> np.ndarray:
    M = scipy.io.mmread(str(path))
    if sp.issparse(M):
        M = M.toarray()
    return np.asarray(M, dtype=np.float64).ravel()


def mtx_path(directory, name: str) -> Path:
    return Path(directory) / f"{name}.mtx"

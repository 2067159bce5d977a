"""Dense vector kernels and the sparse operator type used by every solver.

Vectors are one-dimensional float64 numpy arrays throughout.  All kernels
use a fixed, argument-order-independent accumulation so that repeated runs
on the same machine are bitwise reproducible.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

__all__ = [
    "as_vector",
    "dot",
    "norm2",
    "axpy",
    "maxpy",
    "SparseOperator",
]


def as_vector(values) -> np.ndarray:
    """Coerce input to a 1-D float64 array (copying only when needed)."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def _check_same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"vector length mismatch: {a.shape[0]} vs {b.shape[0]}")


def dot(a: np.ndarray, b: np.ndarray) -> float:
    """Inner product sum_k a_k*b_k with a fixed accumulation order.

    The accumulation order does not depend on the argument order, so
    dot(a, b) == dot(b, a) exactly.
    """
    _check_same_length(a, b)
    return float(np.dot(a, b))


def norm2(a: np.ndarray) -> float:
    """Euclidean norm sqrt(<a, a>)."""
    return float(np.sqrt(np.dot(a, a)))


def axpy(y: np.ndarray, alpha: float, x: np.ndarray) -> np.ndarray:
    """Return y + alpha*x as a new vector."""
    _check_same_length(y, x)
    return y + alpha * x


def maxpy(u: np.ndarray, coeffs, vs) -> np.ndarray:
    """Return u + sum_k coeffs[k]*vs[k], accumulated in index order.

    The accumulation is a sequential axpy loop, so the result is
    bit-for-bit identical to repeated axpy calls.
    """
    if len(coeffs) != len(vs):
        raise ValueError(f"coefficient/vector count mismatch: {len(coeffs)} vs {len(vs)}")
    acc = u.copy()
    for c, v in zip(coeffs, vs):
        _check_same_length(acc, v)
        acc += c * v
    return acc


class SparseOperator:
    """Compressed-row sparse operator with an explicit symmetry flag.

    Column indices must be strictly increasing within each row (this also
    forbids duplicate entries).  ``symmetric=True`` is a structural claim
    checked cheaply at build time and exactly testable via ``symmetry_error``.
    """

    def __init__(self, n_rows: int, n_cols: int, indptr, indices, data,
                 symmetric: bool = False):
        if n_rows <= 0 or n_cols <= 0:
            raise ValueError("operator dimensions must be positive")
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        data = np.asarray(data, dtype=np.float64)
        if indptr.shape != (n_rows + 1,) or indptr[0] != 0 or indptr[-1] != len(indices):
            raise ValueError("malformed indptr")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("indptr must be nondecreasing")
        if len(indices) != len(data):
            raise ValueError("indices/data length mismatch")
        if len(indices) and (indices.min() < 0 or indices.max() >= n_cols):
            raise ValueError("column index out of range")
        for row in range(n_rows):
            cols = indices[indptr[row]:indptr[row + 1]]
            if cols.size > 1 and np.any(np.diff(cols) <= 0):
                raise ValueError(f"columns not strictly increasing in row {row}")
        if not np.all(np.isfinite(data)):
            raise ValueError("operator entries must be finite")
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self.symmetric = bool(symmetric)
        self._csr = sp.csr_matrix((data, indices, indptr), shape=(n_rows, n_cols))
        if symmetric:
            if n_rows != n_cols:
                raise ValueError("symmetric flag requires a square operator")
            if self.symmetry_error() != 0.0:
                raise ValueError("operator flagged symmetric is not symmetric")

    @classmethod
    def from_scipy(cls, mat, symmetric: bool = False) -> "SparseOperator":
        """Wrap any scipy sparse matrix (converted to canonical CSR)."""
        csr = sp.csr_matrix(mat)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data,
                   symmetric=symmetric)

    @classmethod
    def from_dense(cls, mat, symmetric: bool = False) -> "SparseOperator":
        """Build from a dense array, dropping exact zeros."""
        return cls.from_scipy(sp.csr_matrix(np.asarray(mat, dtype=np.float64)),
                              symmetric=symmetric)

    @property
    def nnz(self) -> int:
        return len(self.data)

    @property
    def csr(self) -> sp.csr_matrix:
        """Read-only view of the backing CSR matrix."""
        return self._csr

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Matrix-vector product y_i = sum_j A_ij x_j."""
        if x.shape[0] != self.n_cols:
            raise ValueError(f"operator has {self.n_cols} columns, vector has length {x.shape[0]}")
        return self._csr.dot(x)

    def diagonal(self) -> np.ndarray:
        """Main diagonal as a dense vector (absent entries are zero)."""
        return self._csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def symmetry_error(self) -> float:
        """Largest absolute entry of A - A^T (0.0 for an exactly symmetric A)."""
        d = self._csr - self._csr.T
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(self.data * self.data)))

    def __repr__(self) -> str:
        flag = "symmetric" if self.symmetric else "general"
        return f"SparseOperator({self.n_rows}x{self.n_cols}, nnz={self.nnz}, {flag})"

"""Deterministic generators for the benchmark linear systems.

Every generator is a pure function of its arguments (plus an explicit
seed where randomness is involved), so identical calls yield bitwise
identical instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .linalg import SparseOperator
from .rng import SplitMix64

__all__ = [
    "ProblemInstance",
    "make_identity",
    "make_toy_diagonal",
    "make_poisson",
    "make_sinker",
]


@dataclass(frozen=True)
class ProblemInstance:
    A: SparseOperator
    b: np.ndarray
    x_true: Optional[np.ndarray]
    label: str


def make_identity(n: int) -> ProblemInstance:
    """Identity system; every method converges in a single iteration."""
    if n < 1:
        raise ValueError("identity problem needs n >= 1")
    A = SparseOperator.from_scipy(sp.identity(n, format="csr"), symmetric=True)
    b = np.full(n, 1.0 / np.sqrt(n))
    return ProblemInstance(A, b, b.copy(), f"identity(n={n})")


def make_toy_diagonal(n: int, cond: float) -> ProblemInstance:
    """Diagonal system with equally spaced eigenvalues in [1, cond].

    The right-hand side is the normalized all-ones vector, so the exact
    solution is known entrywise.
    """
    if n < 2:
        raise ValueError("toy diagonal problem needs n >= 2")
    if cond <= 1.0:
        raise ValueError("condition number must exceed 1")
    lam = 1.0 + (cond - 1.0) * np.arange(n, dtype=np.float64) / (n - 1)
    A = SparseOperator.from_scipy(sp.diags(lam, format="csr"), symmetric=True)
    b = np.full(n, 1.0 / np.sqrt(n))
    x_true = b / lam
    return ProblemInstance(A, b, x_true, f"toy-diag(n={n},cond={cond:g})")


def _laplacian_1d(n: int) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)],
                    offsets=[-1, 0, 1], format="csr")


def make_poisson(dims: int, n_per_side: int, seed: int = 0) -> ProblemInstance:
    """Finite-difference Laplacian: 5-point stencil in 2-D, 7-point in 3-D.

    Dirichlet boundaries are folded into the matrix.  The manufactured
    solution has seeded uniform entries in [0, 1) and b = A x_true.
    """
    if dims not in (2, 3):
        raise ValueError("dims must be 2 or 3")
    if n_per_side < 2:
        raise ValueError("need at least 2 points per side")
    n = n_per_side
    T = _laplacian_1d(n)
    eye = sp.identity(n, format="csr")
    if dims == 2:
        A = sp.kron(T, eye) + sp.kron(eye, T)
    else:
        A = (sp.kron(sp.kron(T, eye), eye)
             + sp.kron(sp.kron(eye, T), eye)
             + sp.kron(sp.kron(eye, eye), T))
    op = SparseOperator.from_scipy(A, symmetric=True)
    x_true = SplitMix64(seed).uniform01(n ** dims)
    b = op.apply(x_true)
    return ProblemInstance(op, b, x_true,
                           f"poisson{dims}d(n={n},seed={seed})")


def make_sinker(n_per_side: int, contrast: float) -> ProblemInstance:
    """Variable-coefficient diffusion with a high-coefficient inclusion.

    Cell-centered grid on the unit square; the coefficient equals
    ``contrast`` inside a disc of radius 0.25 centered at (0.5, 0.5) and 1
    outside.  Face coefficients are harmonic means of the adjacent cells,
    which keeps the operator symmetric positive definite.  The forcing is
    1 inside the disc and 0 outside; no closed-form solution is attached.
    """
    if n_per_side < 4:
        raise ValueError("sinker problem needs at least 4 cells per side")
    if contrast < 1.0:
        raise ValueError("coefficient contrast must be >= 1")
    n = n_per_side
    h = 1.0 / n
    centers = (np.arange(n) + 0.5) * h
    cx, cy = np.meshgrid(centers, centers, indexing="ij")
    inside = (cx - 0.5) ** 2 + (cy - 0.5) ** 2 <= 0.25 ** 2
    kappa = np.where(inside, float(contrast), 1.0)

    def face(k1: float, k2: float) -> float:
        return 2.0 * k1 * k2 / (k1 + k2)

    idx = lambda i, j: i * n + j
    N = n * n
    rows, cols, vals = [], [], []
    diag = np.zeros(N)
    for i in range(n):
        for j in range(n):
            k = idx(i, j)
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < n and 0 <= jj < n:
                    c = face(kappa[i, j], kappa[ii, jj])
                    diag[k] += c
                    rows.append(k)
                    cols.append(idx(ii, jj))
                    vals.append(-c)
                else:
                    # Dirichlet face: the boundary value is folded in, and
                    # the face coefficient is the cell's own kappa.
                    diag[k] += kappa[i, j]
    rows.extend(range(N))
    cols.extend(range(N))
    vals.extend(diag)
    A = sp.csr_matrix((vals, (rows, cols)), shape=(N, N))
    op = SparseOperator.from_scipy(A, symmetric=True)
    b = inside.astype(np.float64).ravel()
    return ProblemInstance(op, b, None,
                           f"sinker(n={n},contrast={contrast:g})")

"""Benchmark system generators.

Oracles: closed-form eigenvalues of the Dirichlet Laplacian, dense
Cholesky factorizations for definiteness, and entrywise hand values for
the diagonal models.
"""

from __future__ import annotations

import numpy as np
import pytest

from pipekrylov.problems import (
    make_identity,
    make_poisson,
    make_sinker,
    make_toy_diagonal,
)


def _laplacian_eigs_1d(n: int) -> np.ndarray:
    k = np.arange(1, n + 1)
    return 4.0 * np.sin(k * np.pi / (2.0 * (n + 1))) ** 2


def test_identity_problem_is_exactly_the_identity():
    prob = make_identity(5)
    assert np.array_equal(prob.A.to_dense(), np.eye(5))
    assert np.allclose(prob.b, 1.0 / np.sqrt(5.0), rtol=0.0, atol=0.0)
    assert np.array_equal(prob.x_true, prob.b)
    assert prob.label == "identity(n=5)"


def test_identity_problem_rejects_empty():
    with pytest.raises(ValueError, match="n >= 1"):
        make_identity(0)


def test_toy_diagonal_spectrum_is_equally_spaced():
    prob = make_toy_diagonal(5, 5.0)
    assert prob.A.diagonal().tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]
    assert prob.A.symmetric
    b = 1.0 / np.sqrt(5.0)
    assert np.allclose(prob.b, b, rtol=0.0, atol=0.0)
    assert np.array_equal(prob.x_true, prob.b / prob.A.diagonal())


def test_toy_diagonal_validation():
    with pytest.raises(ValueError, match="n >= 2"):
        make_toy_diagonal(1, 5.0)
    with pytest.raises(ValueError, match="exceed 1"):
        make_toy_diagonal(10, 1.0)


def test_poisson2d_matches_analytic_spectrum():
    n = 6
    prob = make_poisson(2, n, seed=0)
    lam1 = _laplacian_eigs_1d(n)
    analytic = np.sort((lam1[:, None] + lam1[None, :]).ravel())
    computed = np.linalg.eigvalsh(prob.A.to_dense())
    assert np.allclose(computed, analytic, rtol=0.0, atol=1e-12)


def test_poisson3d_matches_analytic_spectrum():
    n = 3
    prob = make_poisson(3, n, seed=0)
    lam1 = _laplacian_eigs_1d(n)
    analytic = np.sort(
        (lam1[:, None, None] + lam1[None, :, None] + lam1[None, None, :]).ravel())
    computed = np.linalg.eigvalsh(prob.A.to_dense())
    assert np.allclose(computed, analytic, rtol=0.0, atol=1e-12)


def test_poisson_rhs_is_exact_image_of_manufactured_solution():
    prob = make_poisson(2, 9, seed=3)
    assert np.array_equal(prob.b, prob.A.apply(prob.x_true))
    assert np.all((prob.x_true >= 0.0) & (prob.x_true < 1.0))


def test_poisson_seed_changes_data_not_operator():
    a = make_poisson(2, 5, seed=0)
    b = make_poisson(2, 5, seed=1)
    assert np.array_equal(a.A.to_dense(), b.A.to_dense())
    assert not np.array_equal(a.x_true, b.x_true)


def test_poisson_validation():
    with pytest.raises(ValueError, match="dims"):
        make_poisson(4, 5)
    with pytest.raises(ValueError, match="2 points"):
        make_poisson(2, 1)


def test_sinker_with_unit_contrast_is_the_poisson_operator():
    n = 8
    sink = make_sinker(n, 1.0)
    pois = make_poisson(2, n, seed=0)
    assert np.array_equal(sink.A.to_dense(), pois.A.to_dense())


def test_sinker_is_symmetric_positive_definite():
    prob = make_sinker(8, 100.0)
    assert prob.A.symmetry_error() == 0.0
    # Cholesky succeeds only for a positive definite matrix.
    np.linalg.cholesky(prob.A.to_dense())


def test_sinker_forcing_is_the_inclusion_indicator():
    prob = make_sinker(8, 100.0)
    assert set(prob.b.tolist()) == {0.0, 1.0}
    assert prob.b.sum() > 0
    assert prob.x_true is None


def test_sinker_validation():
    with pytest.raises(ValueError, match="4 cells"):
        make_sinker(3, 10.0)
    with pytest.raises(ValueError, match=">= 1"):
        make_sinker(8, 0.5)

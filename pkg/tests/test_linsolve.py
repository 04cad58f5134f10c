import numpy as np
import pytest
import scipy.sparse as sps

from ltsdd.errors import SingularMatrix
from ltsdd.linsolve import Factorization, as_sparse, gmres, lu_factor, lu_solve


def test_as_sparse_sums_duplicates():
    A = as_sparse([0, 0, 1], [0, 0, 1], [1.0, 2.0, 4.0], (2, 2))
    np.testing.assert_array_equal(A.toarray(), [[3.0, 0.0], [0.0, 4.0]])


def test_lu_roundtrip(rng):
    A = sps.random(30, 30, density=0.2, random_state=1) + 10 * sps.identity(30)
    b = rng.standard_normal(30)
    x = lu_solve(lu_factor(A), b)
    np.testing.assert_allclose(A @ x, b, atol=1e-12)


def test_singular_matrix():
    with pytest.raises(SingularMatrix):
        Factorization(sps.csc_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])))


def test_gmres_identity_one_iteration():
    b = np.array([1.0, -2.0, 3.0])
    x, rep = gmres(lambda v: v, b, tol=1e-12)
    np.testing.assert_allclose(x, b)
    assert rep.iterations == 1 and rep.converged


def test_gmres_zero_rhs():
    x, rep = gmres(lambda v: 2 * v, np.zeros(4))
    assert rep.iterations == 0 and rep.converged
    np.testing.assert_array_equal(x, 0.0)


def test_gmres_exact_in_n_steps(rng):
    A = rng.standard_normal((8, 8)) + 8 * np.eye(8)
    b = rng.standard_normal(8)
    x, rep = gmres(lambda v: A @ v, b, tol=1e-13)
    assert rep.converged and rep.iterations <= 8
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-10)


def test_gmres_distinct_eigenvalues():
    # diagonal matrix with three distinct eigenvalues: minimal polynomial of degree 3
    A = np.diag([1.0, 1.0, 2.0, 2.0, 5.0, 5.0])
    x, rep = gmres(lambda v: A @ v, np.ones(6), tol=1e-12)
    assert rep.iterations == 3
    np.testing.assert_allclose(A @ x, 1.0)


def test_gmres_weighted_and_preconditioned(rng):
    A = rng.standard_normal((12, 12)) + 6 * np.eye(12)
    b = rng.standard_normal(12)
    Minv = np.linalg.inv(A + 0.1 * rng.standard_normal((12, 12)))
    x, rep = gmres(lambda v: A @ v, b, tol=1e-11, precond=lambda v: Minv @ v, weights=rng.uniform(0.5, 2, 12))
    assert rep.converged and rep.iterations < 12
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=1e-8)


def test_gmres_restart_and_limit(rng):
    A = rng.standard_normal((40, 40)) + 12 * np.eye(40)
    b = rng.standard_normal(40)
    x, rep = gmres(lambda v: A @ v, b, tol=1e-10, restart=10, max_iter=400)
    assert rep.converged
    np.testing.assert_allclose(A @ x, b, atol=1e-7)
    _, rep2 = gmres(lambda v: A @ v, b, tol=1e-14, max_iter=3)
    assert not rep2.converged and rep2.iterations == 3


def test_gmres_history_monotone(rng):
    A = rng.standard_normal((20, 20)) + 5 * np.eye(20)
    seen = []
    _, rep = gmres(lambda v: A @ v, rng.standard_normal(20), tol=1e-10, callback=lambda k, r: seen.append(r))
    h = np.array(rep.residual_history)
    assert h[0] == 1.0 and np.all(np.diff(h) <= 1e-14)
    assert seen == rep.residual_history[1:]


def test_gmres_warm_start(rng):
    A = rng.standard_normal((10, 10)) + 5 * np.eye(10)
    b = rng.standard_normal(10)
    xs = np.linalg.solve(A, b)
    _, rep = gmres(lambda v: A @ v, b, x0=xs, tol=1e-8)
    assert rep.converged and rep.iterations == 0

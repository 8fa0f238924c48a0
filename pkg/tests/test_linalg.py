import numpy as np
import pytest
import scipy.sparse as sp

from multideriv.exceptions import GMRESStalled, SingularSystem
from multideriv.linalg import BlockJacobiPreconditioner, DirectSolver, TripletAssembler, gmres, solve_direct


def test_identity_direct():
    b = np.arange(5.0)
    assert np.allclose(solve_direct(sp.identity(5, format="csr"), b), b)


def test_two_by_two():
    A = sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(solve_direct(A, np.array([3.0, 3.0])), [1.0, 1.0], atol=1e-14)


def test_spd_against_dense(rng):
    X = rng.standard_normal((50, 50))
    A = X @ X.T + 50 * np.eye(50)
    b = rng.standard_normal(50)
    assert np.allclose(solve_direct(sp.csr_matrix(A), b), np.linalg.solve(A, b), atol=1e-10)


def test_singular_raises():
    with pytest.raises(SingularSystem):
        solve_direct(sp.csr_matrix(np.zeros((3, 3))), np.ones(3))


def test_assembler_sums_duplicates():
    asm = TripletAssembler((2, 2))
    asm.add([0, 0, 1], [0, 0, 1], [1.0, 2.0, 5.0])
    A = asm.finalize().toarray()
    assert A[0, 0] == 3.0 and A[1, 1] == 5.0


def test_gmres_zero_rhs():
    x, it = gmres(sp.identity(4), np.zeros(4))
    assert it == 0 and not x.any()


def test_gmres_identity_one_iteration():
    x, it = gmres(sp.identity(6), np.ones(6))
    assert it == 1 and np.allclose(x, 1.0)


def _test_matrix(rng, n=120):
    A = sp.random(n, n, density=0.05, random_state=3) + 8 * sp.identity(n)
    return sp.csr_matrix(A), rng.standard_normal(n)


def test_gmres_residuals_monotone_and_accurate(rng):
    A, b = _test_matrix(rng)
    res = []
    x, _ = gmres(A, b, rel_tol=1e-12, restart=200, residuals=res)
    assert np.all(np.diff(res) <= 1e-14)
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-11


def test_preconditioned_agrees_with_plain(rng):
    A, b = _test_matrix(rng)
    x1, _ = gmres(A, b, restart=20)
    x2, _ = gmres(A, b, M=BlockJacobiPreconditioner(A, 10), restart=20)
    assert np.allclose(x1, x2, atol=1e-9)
    assert np.allclose(x1, DirectSolver(A)(b), atol=1e-9)


def test_block_jacobi_inverts_block_diagonal(rng):
    blocks = rng.standard_normal((4, 3, 3)) + 4 * np.eye(3)
    A = sp.block_diag(list(blocks), format="csr")
    M = BlockJacobiPreconditioner(A, 3)
    v = rng.standard_normal(12)
    assert np.allclose(M(A @ v), v, atol=1e-12)


def test_gmres_stall_reports_best_iterate(rng):
    A, b = _test_matrix(rng)
    with pytest.raises(GMRESStalled) as err:
        gmres(A, b, rel_tol=1e-14, restart=2, max_iter=3)
    assert err.value.x is not None and err.value.residual < 1.0

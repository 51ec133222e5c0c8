import numpy as np
import pytest
import scipy.sparse as sp

from polywave.linalg import (BlockDiagSolver, EffectiveSolver, SolveConfig,
                             SolveError, read_matrix_market, solve_spd, spmv,
                             write_matrix_market)


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((n, n))
    return sp.csr_matrix(Q @ Q.T + n * np.eye(n))


class TestSpmv:
    def test_identity(self):
        x = np.arange(5.0)
        assert np.array_equal(spmv(sp.eye(5, format="csr"), x), x)

    def test_zero(self):
        assert not spmv(sp.csr_matrix((4, 4)), np.ones(4)).any()

    def test_against_dense(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((5, 5))
        x = rng.standard_normal(5)
        got = spmv(sp.csr_matrix(A), x)
        assert np.abs(got - A @ x).max() <= 1e-14

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            spmv(sp.eye(3, format="csr"), np.ones(4))


class TestSolve:
    def test_zero_rhs(self):
        assert not solve_spd(random_spd(6, 0), np.zeros(6)).any()

    def test_small_diagonal(self):
        A = sp.csr_matrix(np.diag([2.0, 8.0]))
        x = solve_spd(A, np.array([2.0, 8.0]))
        assert np.allclose(x, [1.0, 1.0], atol=1e-14)

    def test_cg_matches_dense(self):
        A = random_spd(50, 1)
        b = np.random.default_rng(2).standard_normal(50)
        x = solve_spd(A, b, SolveConfig(method="cg", rel_tol=1e-12, precond="none"))
        assert np.abs(x - np.linalg.solve(A.toarray(), b)).max() <= 1e-8

    def test_cg_block_preconditioner(self):
        A = random_spd(40, 4)
        b = np.ones(40)
        blocks = [np.arange(0, 20), np.arange(20, 40)]
        x = solve_spd(A, b, SolveConfig(method="cg"), blocks=blocks)
        assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)

    def test_non_spd_detected(self):
        A = sp.csr_matrix(np.diag([1.0, -1.0]))
        with pytest.raises(SolveError, match="mass"):
            solve_spd(A, np.ones(2), SolveConfig(method="cg"), name="mass block")

    def test_deterministic_repeat(self):
        A = random_spd(30, 5)
        b = np.random.default_rng(6).standard_normal(30)
        cfg = SolveConfig(method="cg")
        assert np.array_equal(solve_spd(A, b, cfg), solve_spd(A, b, cfg))


class TestBlockDiag:
    def test_exact_on_block_matrix(self):
        rng = np.random.default_rng(7)
        B1 = rng.standard_normal((3, 3)) + 4 * np.eye(3)
        B2 = rng.standard_normal((2, 2)) + 4 * np.eye(2)
        A = sp.block_diag([B1, B2], format="csr")
        solver = BlockDiagSolver(A, [np.arange(3), np.arange(3, 5)])
        v = rng.standard_normal(5)
        assert np.abs(A @ solver(v) - v).max() <= 1e-12

    def test_singular_block_rejected(self):
        A = sp.csr_matrix(np.zeros((2, 2)))
        with pytest.raises(SolveError, match="singular"):
            BlockDiagSolver(A, [np.arange(2)], name="mass")


class TestEffectiveSolver:
    def test_fixed_point_matches_direct(self):
        n = 30
        M = random_spd(n, 8)
        D = random_spd(n, 9) * 0.1
        A = random_spd(n, 10)
        msolve = BlockDiagSolver(M, [np.arange(n)])
        eff = EffectiveSolver(M, D, A, 1e-4, 1e-8, msolve, direct_limit=0)
        b = np.random.default_rng(11).standard_normal(n)
        K = (M + 1e-4 * D + 1e-8 * A).toarray()
        assert np.abs(eff.solve(b) - np.linalg.solve(K, b)).max() <= 1e-9

    def test_fallback_to_lu_when_perturbation_large(self):
        n = 20
        M = sp.eye(n, format="csr")
        A = random_spd(n, 12) * 100.0
        msolve = BlockDiagSolver(M, [np.arange(n)])
        eff = EffectiveSolver(M, sp.csr_matrix((n, n)), A, 0.0, 1.0, msolve,
                              direct_limit=0, max_iters=10)
        b = np.ones(n)
        K = (M + A).toarray()
        assert np.abs(eff.solve(b) - np.linalg.solve(K, b)).max() <= 1e-9


def test_matrix_market_roundtrip(tmp_path):
    A = random_spd(7, 13)
    path = tmp_path / "a.mtx"
    write_matrix_market(A, path)
    B = read_matrix_market(path)
    assert np.abs((A - B)).max() <= 1e-12

"""Minimal sparse kernels: matvec, block-diagonal inverses, SPD solves.

Solvers are deterministic for a fixed configuration: CG uses fixed-order
reductions, the mass inverse is an explicit per-element dense inverse, and
the second-order effective solver is a mass-preconditioned fixed-point
iteration with a sparse-LU fallback.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.io import mmread, mmwrite


class SolveError(Exception):
    pass


@dataclass
class SolveConfig:
    method: str = "auto"        # auto | direct | cg
    rel_tol: float = 1e-10
    max_iters: int = 2000
    precond: str = "block"      # block | none
    direct_limit: int = 6000    # "auto" uses a factorization up to this size

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError("rel_tol must lie in (0, 1)")


def spmv(A, x):
    if A.shape[1] != len(x):
        raise ValueError(f"dimension mismatch: {A.shape} @ {len(x)}")
    return A @ x


class BlockDiagSolver:
    """Exact inverse of a matrix that is dense on disjoint index blocks."""

    def __init__(self, A, blocks, name="matrix"):
        A = sp.csc_matrix(A)
        self.blocks = blocks
        self.inv = []
        for ids in blocks:
            sub = A[np.ix_(ids, ids)].toarray()
            try:
                self.inv.append(np.linalg.inv(sub))
            except np.linalg.LinAlgError as err:
                raise SolveError(f"singular diagonal block in {name}") from err

    def apply(self, v):
        out = np.zeros_like(v)
        for ids, inv in zip(self.blocks, self.inv):
            out[ids] = inv @ v[ids]
        return out

    __call__ = apply


def _direct_solver(A, name):
    n = A.shape[0]
    if n <= 400:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        try:
            lu = np.linalg.cholesky(dense) if _is_sym(A) else None
        except np.linalg.LinAlgError as err:
            raise SolveError(f"{name} is not positive definite") from err
        if lu is not None:
            from scipy.linalg import cho_solve
            return lambda b: cho_solve((lu, True), b)
        return lambda b: np.linalg.solve(dense, b)
    lu = spla.splu(sp.csc_matrix(A))
    return lu.solve


def _is_sym(A):
    d = abs(A - A.T)
    scale = max(np.abs(A.data).max() if sp.issparse(A) else np.abs(A).max(), 1e-300)
    return (d.max() if sp.issparse(d) else d.max()) <= 1e-12 * scale


def solve_spd(A, b, cfg=None, blocks=None, name="system"):
    """Solve SPD A x = b with residual ||A x - b|| <= rel_tol ||b||."""
    cfg = cfg or SolveConfig()
    b = np.asarray(b, dtype=float)
    if A.shape[0] != len(b):
        raise ValueError("dimension mismatch")
    if not b.any():
        return np.zeros_like(b)
    method = cfg.method
    if method == "auto":
        method = "direct" if A.shape[0] <= cfg.direct_limit else "cg"
    if method == "direct":
        x = _direct_solver(A, name)(b)
    elif method == "cg":
        pre = BlockDiagSolver(A, blocks, name) if (cfg.precond == "block" and blocks) \
            else (lambda v: v)
        x = _cg(A, b, pre, cfg, name)
    else:
        raise ValueError(f"unknown solve method {cfg.method!r}")
    res = np.linalg.norm(A @ x - b)
    if res > 10.0 * cfg.rel_tol * np.linalg.norm(b):
        raise SolveError(f"solve of {name} missed its residual target ({res:.2e})")
    return x


def _cg(A, b, pre, cfg, name):
    x = np.zeros_like(b)
    r = b.copy()
    z = pre(r)
    p = z.copy()
    rz = r @ z
    bnorm = np.linalg.norm(b)
    for _ in range(cfg.max_iters):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            raise SolveError(f"{name} is not positive definite (CG breakdown)")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= cfg.rel_tol * bnorm:
            return x
        z = pre(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolveError(f"CG on {name} did not converge in {cfg.max_iters} iterations")


class EffectiveSolver:
    """Solves (M + c_d D + c_a A) x = b for the implicit time stepper.

    Uses a block-mass-preconditioned fixed-point iteration (the perturbation
    of M is tiny for small time steps, and D may be non-symmetric), falling
    back to a cached sparse LU when contraction is poor or n is small.
    """

    def __init__(self, m, d, a, c_d, c_a, mass_solver, rel_tol=1e-11,
                 direct_limit=6000, max_iters=60):
        self.m, self.d, self.a = m, d, a
        self.c_d, self.c_a = c_d, c_a
        self.mass_solver = mass_solver
        self.rel_tol = rel_tol
        self.max_iters = max_iters
        self._lu = None
        if m.shape[0] <= direct_limit:
            self._factorize()

    def _effective(self):
        K = self.m + self.c_d * self.d + self.c_a * self.a
        return sp.csc_matrix(K)

    def _factorize(self):
        self._lu = spla.splu(self._effective())

    def _apply(self, x):
        return self.m @ x + self.c_d * (self.d @ x) + self.c_a * (self.a @ x)

    def solve(self, b, x0=None):
        if self._lu is not None:
            return self._lu.solve(b)
        x = np.zeros_like(b) if x0 is None else x0.copy()
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        prev = np.inf
        for _ in range(self.max_iters):
            r = b - self._apply(x)
            rnorm = np.linalg.norm(r)
            if rnorm <= self.rel_tol * bnorm:
                return x
            if rnorm > 0.7 * prev and rnorm > 100 * self.rel_tol * bnorm:
                break  # stagnating: the perturbation is not small
            prev = rnorm
            x += self.mass_solver(r)
        self._factorize()
        return self._lu.solve(b)


def write_matrix_market(A, path):
    mmwrite(str(path), sp.coo_matrix(A))


def read_matrix_market(path):
    return sp.csr_matrix(mmread(str(path)))

"""Sparse storage and solvers for the reduced finite-element systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SparseCsr",
    "SolveStats",
    "LinalgError",
    "SingularMatrixError",
    "BreakdownError",
    "ConvergenceError",
    "matvec",
    "lu_solve_dense",
    "bicgstab",
    "generalized_eig_smallest",
]

BREAKDOWN_TOL = 1e-30


class LinalgError(ArithmeticError):
    pass


class SingularMatrixError(LinalgError):
    pass


class BreakdownError(LinalgError):
    pass


class ConvergenceError(LinalgError):
    pass


@dataclass(frozen=True, eq=False)
class SparseCsr:
    """Compressed sparse row matrix.

    Column indices are strictly increasing within each row. Build instances
    with :meth:`from_triplets` or :meth:`from_dense` rather than by hand.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rp = np.asarray(self.row_ptr, dtype=np.int64)
        ci = np.asarray(self.col_idx, dtype=np.int64)
        va = np.asarray(self.values, dtype=float)
        if rp.shape != (self.n_rows + 1,) or rp[0] != 0:
            raise ValueError("row_ptr must have length n_rows + 1 and start at 0")
        if np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr must be non-decreasing")
        if rp[-1] != len(ci) or len(ci) != len(va):
            raise ValueError("row_ptr[-1], len(col_idx) and len(values) must agree")
        if ci.size and (ci.min() < 0 or ci.max() >= self.n_cols):
            raise ValueError("column index out of range")
        rows = np.repeat(np.arange(self.n_rows), np.diff(rp))
        same_row = rows[1:] == rows[:-1]
        if np.any(same_row & (ci[1:] <= ci[:-1])):
            raise ValueError("column indices must be strictly increasing within a row")
        for name, arr in (("row_ptr", rp), ("col_idx", ci), ("values", va)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_rows", rows)

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape) -> "SparseCsr":
        """Compress (row, col, value) triplets, summing duplicates."""
        n_rows, n_cols = shape
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if not (len(rows) == len(cols) == len(vals)):
            raise ValueError("triplet arrays must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n_rows):
            raise ValueError("row index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            start = np.ones(len(rows), dtype=bool)
            start[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            idx = np.flatnonzero(start)
            # sorted order makes the sum independent of input permutation
            vals = np.add.reduceat(vals, idx)
            rows, cols = rows[idx], cols[idx]
        counts = np.bincount(rows, minlength=n_rows)
        row_ptr = np.concatenate([[0], np.cumsum(counts)])
        return cls(n_rows, n_cols, row_ptr, cols, vals)

    @classmethod
    def from_dense(cls, a) -> "SparseCsr":
        a = np.asarray(a, dtype=float)
        r, c = np.nonzero(a)
        return cls.from_triplets(r, c, a[r, c], a.shape)

    @classmethod
    def identity(cls, n: int) -> "SparseCsr":
        i = np.arange(n)
        return cls.from_triplets(i, i, np.ones(n), (n, n))

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self._rows, self.col_idx), self.values)
        return out

    def transpose(self) -> "SparseCsr":
        return SparseCsr.from_triplets(
            self.col_idx, self._rows, self.values, (self.n_cols, self.n_rows)
        )

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.shape))
        on = self._rows == self.col_idx
        d[self._rows[on]] = self.values[on]
        return d

    def submatrix(self, rows, cols) -> "SparseCsr":
        """Extract ``A[rows][:, cols]`` with rows/cols renumbered in the given order."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        rmap = np.full(self.n_rows, -1, dtype=np.int64)
        rmap[rows] = np.arange(len(rows))
        cmap = np.full(self.n_cols, -1, dtype=np.int64)
        cmap[cols] = np.arange(len(cols))
        r = rmap[self._rows]
        c = cmap[self.col_idx]
        keep = (r >= 0) & (c >= 0)
        return SparseCsr.from_triplets(r[keep], c[keep], self.values[keep], (len(rows), len(cols)))

    def __matmul__(self, x):
        return matvec(self, x)

    def __add__(self, other: "SparseCsr") -> "SparseCsr":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return SparseCsr.from_triplets(
            np.concatenate([self._rows, other._rows]),
            np.concatenate([self.col_idx, other.col_idx]),
            np.concatenate([self.values, other.values]),
            self.shape,
        )


def matvec(a: SparseCsr, x) -> np.ndarray:
    """Sparse matrix-vector product."""
    x = np.asarray(x, dtype=float)
    if x.shape != (a.n_cols,):
        raise ValueError(f"dimension mismatch: matrix {a.shape}, vector {x.shape}")
    return np.bincount(a._rows, weights=a.values * x[a.col_idx], minlength=a.n_rows)


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    relative_residual: float
    converged: bool


def lu_solve_dense(a, b) -> np.ndarray:
    """Solve a dense system by Gaussian elimination with partial pivoting.

    Raises :class:`SingularMatrixError` if a pivot falls below 1e-14 times
    the largest entry of its (original) row.
    """
    lu = np.array(a, dtype=float)
    x = np.array(b, dtype=float)
    n = lu.shape[0]
    if lu.shape != (n, n) or x.shape != (n,):
        raise ValueError(f"dimension mismatch: matrix {lu.shape}, vector {x.shape}")
    scale = np.abs(lu).max(axis=1)
    nb = 64
    # blocked right-looking elimination: panel by rank-1 steps, trailing block by matmul
    for k0 in range(0, n, nb):
        k1 = min(k0 + nb, n)
        for k in range(k0, k1):
            p = k + int(np.argmax(np.abs(lu[k:, k])))
            if p != k:
                lu[[k, p]] = lu[[p, k]]
                x[[k, p]] = x[[p, k]]
                scale[[k, p]] = scale[[p, k]]
            piv = lu[k, k]
            if abs(piv) < 1e-14 * scale[k] or scale[k] == 0:
                raise SingularMatrixError(f"matrix is singular to working precision (pivot {k})")
            lu[k + 1:, k] /= piv
            lu[k + 1:, k + 1:k1] -= np.outer(lu[k + 1:, k], lu[k, k + 1:k1])
        if k1 < n:
            for k in range(k0, k1):
                lu[k + 1:k1, k1:] -= np.outer(lu[k + 1:k1, k], lu[k, k1:])
            lu[k1:, k1:] -= lu[k1:, k0:k1] @ lu[k0:k1, k1:]
    for k in range(n - 1):
        x[k + 1:] -= lu[k + 1:, k] * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - lu[k, k + 1:] @ x[k + 1:]) / lu[k, k]
    return x


def bicgstab(a: SparseCsr, b, tol: float = 1e-10, max_iter: int | None = None,
             preconditioner: str = "jacobi", x0=None):
    """Right-preconditioned BiCGSTAB for non-symmetric systems.

    Convergence is declared on the true residual, ``||b - Ax|| <= tol ||b||``.
    Running out of iterations is reported through the returned
    :class:`SolveStats`; a vanishing ``rho`` or ``omega`` raises
    :class:`BreakdownError`.

    Returns
    -------
    x : ndarray
    stats : SolveStats
    """
    b = np.asarray(b, dtype=float)
    n = a.n_rows
    if a.n_rows != a.n_cols or b.shape != (n,):
        raise ValueError(f"dimension mismatch: matrix {a.shape}, vector {b.shape}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side is not finite")
    if max_iter is None:
        max_iter = 10 * n
    if preconditioner == "jacobi":
        d = a.diagonal()
        if np.any(d == 0):
            raise ValueError("Jacobi preconditioner needs a zero-free diagonal")
        inv_d = 1.0 / d
    elif preconditioner == "none":
        inv_d = np.ones(n)
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return np.zeros(n), SolveStats(0, 0.0, True)
    target = tol * bnorm

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - a @ x
    rnorm = np.linalg.norm(r)
    it = 0
    while it < max_iter and rnorm > target:
        # (re)start: fresh shadow residual from the current true residual
        r_hat = r.copy()
        rho = alpha = omega = 1.0
        v = np.zeros(n)
        p = np.zeros(n)
        while it < max_iter:
            it += 1
            rho_new = r_hat @ r
            # breakdown tests are scale-free: compare against the norms involved
            if abs(rho_new) < BREAKDOWN_TOL * np.linalg.norm(r_hat) * np.linalg.norm(r):
                raise BreakdownError(f"rho vanished at iteration {it}")
            beta = (rho_new / rho) * (alpha / omega)
            rho = rho_new
            p = r + beta * (p - omega * v)
            y = inv_d * p
            v = a @ y
            denom = r_hat @ v
            if abs(denom) < BREAKDOWN_TOL * np.linalg.norm(r_hat) * np.linalg.norm(v):
                raise BreakdownError(f"(r_hat, v) vanished at iteration {it}")
            alpha = rho / denom
            s = r - alpha * v
            if np.linalg.norm(s) <= target:
                x = x + alpha * y
                break
            z = inv_d * s
            t = a @ z
            tt = t @ t
            omega = (t @ s) / tt if tt > 0 else 0.0
            if abs(omega) < BREAKDOWN_TOL:
                raise BreakdownError(f"omega vanished at iteration {it}")
            x = x + alpha * y + omega * z
            r = s - omega * t
            if np.linalg.norm(r) <= target:
                break
        r = b - a @ x
        rnorm = np.linalg.norm(r)
    rel = rnorm / bnorm
    return x, SolveStats(it, float(rel), bool(rel <= tol))


def generalized_eig_smallest(k: SparseCsr, m: SparseCsr, tol: float = 1e-10,
                             max_iter: int = 500, solver: str = "bicgstab"):
    """Smallest eigenpair of ``K v = lambda M v`` by inverse power iteration.

    Both matrices must be symmetric positive definite. The eigenvector is
    normalized to ``v^T M v = 1``; iteration stops once consecutive Rayleigh
    quotients agree to ``tol`` relative.
    """
    n = k.n_rows
    if k.shape != (n, n) or m.shape != (n, n):
        raise ValueError("K and M must be square and of equal size")
    if solver == "dense":
        kd = k.to_dense()

        def solve(rhs):
            return lu_solve_dense(kd, rhs)
    elif solver == "bicgstab":
        inner_tol = min(1e-12, tol * 1e-2)

        def solve(rhs):
            z, stats = bicgstab(k, rhs, tol=inner_tol, max_iter=max(1000, 20 * n))
            if not stats.converged:
                raise ConvergenceError(
                    f"inner solve stalled at residual {stats.relative_residual:.2e}"
                )
            return z
    else:
        raise ValueError(f"unknown solver {solver!r}")

    # a smooth positive start has a non-zero component along the ground state
    v = np.ones(n)
    v /= np.sqrt(v @ (m @ v))
    lam = (v @ (k @ v)) / (v @ (m @ v))
    for _ in range(max_iter):
        z = solve(m @ v)
        z /= np.sqrt(z @ (m @ z))
        lam_new = (z @ (k @ z)) / (z @ (m @ z))
        v = z
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return float(lam_new), v
        lam = lam_new
    raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps")

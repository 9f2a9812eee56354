"""P1 finite elements on triangles.

Matrices follow the convention row = test function, column = trial function,
so for the coefficient field ``c`` the assembled entry is

    A[i, j] = sum_T  int_T  sum_{k,l} c[k][l] * d_k(phi_j) * d_l(phi_i)

and ``A @ xi`` applies the bilinear form to the trial coefficients ``xi``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .linalg import SparseCsr, bicgstab, lu_solve_dense
from .mesh import Mesh, locate_point, triangle_areas

__all__ = [
    "QuadratureRule",
    "CENTROID",
    "EDGE_MIDPOINT",
    "STRANG_FIX_7",
    "CoefficientField",
    "FeSpace",
    "SolutionField",
    "ReducedSystem",
    "FemError",
    "DegenerateTriangleError",
    "EmptySystemError",
    "OutsideDomainError",
    "TraceWarning",
    "build_fespace",
    "assemble_stiffness",
    "assemble_mass",
    "assemble_load",
    "apply_dirichlet",
    "evaluate",
    "interpolate",
    "solve",
]


class FemError(ValueError):
    pass


class DegenerateTriangleError(FemError):
    pass


class EmptySystemError(FemError):
    pass


class OutsideDomainError(FemError):
    pass


class TraceWarning(UserWarning):
    """A field that should vanish on the boundary does not."""


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Triangle quadrature in barycentric coordinates; weights sum to 1."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(pts) != len(w):
            raise ValueError("one weight per point")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def physical_points(self, mesh: Mesh) -> np.ndarray:
        """Quadrature points of every triangle, shape (nt, nq, 2)."""
        verts = mesh.nodes[mesh.triangles]
        return np.einsum("qk,tkd->tqd", self.points, verts)


CENTROID = QuadratureRule([[1 / 3, 1 / 3, 1 / 3]], [1.0], degree=1)
EDGE_MIDPOINT = QuadratureRule(
    [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]], [1 / 3] * 3, degree=2
)


def _strang_fix_7():
    s = math.sqrt(15.0)
    a1, b1 = (9 - 2 * s) / 21, (6 + s) / 21
    a2, b2 = (9 + 2 * s) / 21, (6 - s) / 21
    w1, w2 = (155 + s) / 1200, (155 - s) / 1200
    pts = [[1 / 3, 1 / 3, 1 / 3]]
    wts = [9 / 40]
    for a, b, w in ((a1, b1, w1), (a2, b2, w2)):
        pts += [[a, b, b], [b, a, b], [b, b, a]]
        wts += [w] * 3
    return QuadratureRule(pts, wts, degree=5)


STRANG_FIX_7 = _strang_fix_7()


@dataclass(frozen=True)
class CoefficientField:
    """2x2 matrix of expressions c[k][l] multiplying d_k(u) * d_l(v)."""

    c: tuple

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.c)
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise ValueError("coefficient field must be 2x2")
        object.__setattr__(self, "c", rows)

    @classmethod
    def from_text(cls, entries) -> "CoefficientField":
        return cls(tuple(tuple(ex.parse(e) for e in row) for row in entries))

    @classmethod
    def identity(cls) -> "CoefficientField":
        return cls.from_text([["1", "0"], ["0", "1"]])

    @classmethod
    def model_problem(cls) -> "CoefficientField":
        """u_x v_x + x u_x v_y + u_y v_y."""
        return cls.from_text([["1", "x"], ["0", "1"]])

    def evaluate(self, x, y) -> np.ndarray:
        """Coefficient matrices at the given points, shape ``x.shape + (2, 2)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.empty(np.broadcast(x, y).shape + (2, 2))
        for k in range(2):
            for l in range(2):
                out[..., k, l] = ex.evaluate(self.c[k][l], x, y)
        return out


@dataclass(frozen=True, eq=False)
class FeSpace:
    """Continuous P1 space with homogeneous Dirichlet data on boundary nodes.

    ``grads[t, i]`` is the constant gradient of the hat function of local
    vertex ``i`` on triangle ``t``.
    """

    mesh: Mesh
    free_dofs: np.ndarray
    areas: np.ndarray
    grads: np.ndarray

    @property
    def n_total(self) -> int:
        return self.mesh.n_nodes

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    def field(self, values) -> "SolutionField":
        return SolutionField(self, values)

    def extend(self, free_values) -> "SolutionField":
        """Field with the given interior values and zeros on the boundary."""
        full = np.zeros(self.n_total)
        full[self.free_dofs] = free_values
        return SolutionField(self, full)


def build_fespace(mesh: Mesh) -> FeSpace:
    areas = triangle_areas(mesh)
    bad = np.flatnonzero(np.abs(areas) < 1e-14)
    if bad.size:
        raise DegenerateTriangleError(f"triangle {bad[0]} has area {areas[bad[0]]:.3e}")
    v = mesh.nodes[mesh.triangles]
    x, y = v[..., 0], v[..., 1]
    grads = np.empty((mesh.n_triangles, 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = (y[:, j] - y[:, k]) / (2 * areas)
        grads[:, i, 1] = (x[:, k] - x[:, j]) / (2 * areas)
    free = np.flatnonzero(~mesh.node_is_boundary)
    for arr in (areas, grads, free):
        arr.setflags(write=False)
    return FeSpace(mesh, free, np.abs(areas), grads)


def _scatter(space: FeSpace, local: np.ndarray) -> SparseCsr:
    tri = space.mesh.triangles
    rows = np.repeat(tri[:, :, None], 3, axis=2)
    cols = np.repeat(tri[:, None, :], 3, axis=1)
    n = space.n_total
    return SparseCsr.from_triplets(rows.ravel(), cols.ravel(), local.ravel(), (n, n))


def element_stiffness(space: FeSpace, coeff: CoefficientField, quad: QuadratureRule = CENTROID):
    """Local matrices, shape (nt, 3, 3), indexed [triangle, test, trial]."""
    xq = quad.physical_points(space.mesh)
    c = coeff.evaluate(xq[..., 0], xq[..., 1])
    g = space.grads
    local = np.einsum("q,tqkl,tjk,til->tij", quad.weights, c, g, g)
    return local * space.areas[:, None, None]


def assemble_stiffness(space: FeSpace, coeff: CoefficientField,
                       quad: QuadratureRule = CENTROID) -> SparseCsr:
    return _scatter(space, element_stiffness(space, coeff, quad))


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def element_mass(space: FeSpace) -> np.ndarray:
    return space.areas[:, None, None] * _MASS_REF


def assemble_mass(space: FeSpace) -> SparseCsr:
    return _scatter(space, element_mass(space))


def assemble_load(space: FeSpace, f1: ex.ExprAst,
                  quad: QuadratureRule = EDGE_MIDPOINT) -> np.ndarray:
    xq = quad.physical_points(space.mesh)
    fq = ex.evaluate(f1, xq[..., 0], xq[..., 1])
    local = np.einsum("q,tq,qi->ti", quad.weights, fq, quad.points)
    local *= space.areas[:, None]
    return np.bincount(
        space.mesh.triangles.ravel(), weights=local.ravel(), minlength=space.n_total
    )


@dataclass(frozen=True, eq=False)
class ReducedSystem:
    """System restricted to the free (interior) dofs."""

    matrix: SparseCsr
    rhs: np.ndarray
    free_dofs: np.ndarray


def apply_dirichlet(a: SparseCsr, b, space: FeSpace) -> ReducedSystem:
    """Eliminate boundary rows and columns; boundary data is zero."""
    free = space.free_dofs
    if len(free) == 0:
        raise EmptySystemError("mesh has no interior nodes")
    b = np.asarray(b, dtype=float)
    return ReducedSystem(a.submatrix(free, free), b[free].copy(), free)


@dataclass(frozen=True, eq=False)
class SolutionField:
    """Nodal values of a P1 function over a space."""

    space: FeSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.space.n_total,):
            raise ValueError(
                f"expected {self.space.n_total} nodal values, got shape {v.shape}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def gradients(self) -> np.ndarray:
        """Constant gradient per triangle, shape (nt, 2)."""
        xi = self.values[self.space.mesh.triangles]
        return np.einsum("ti,tid->td", xi, self.space.grads)

    def at_quadrature(self, quad: QuadratureRule) -> np.ndarray:
        xi = self.values[self.space.mesh.triangles]
        return xi @ quad.points.T

    def free_values(self) -> np.ndarray:
        return self.values[self.space.free_dofs]


def evaluate(u: SolutionField, p) -> float:
    """Value of the P1 field at point ``p`` by barycentric interpolation."""
    hit = locate_point(u.space.mesh, p)
    if hit is None:
        raise OutsideDomainError(f"point {tuple(p)} lies outside the mesh")
    t, lam = hit
    return float(lam @ u.values[u.space.mesh.triangles[t]])


def interpolate(e: ex.ExprAst, space: FeSpace) -> SolutionField:
    """Nodal interpolant of ``e`` with a zero trace.

    Boundary values larger than 1e-10 in magnitude are replaced by zero and a
    :class:`TraceWarning` is issued.
    """
    nodes = space.mesh.nodes
    vals = np.asarray(ex.evaluate(e, nodes[:, 0], nodes[:, 1]), dtype=float)
    bnd = space.mesh.node_is_boundary
    off = bnd & (np.abs(vals) > 1e-10)
    if np.any(off):
        worst = float(np.abs(vals[off]).max())
        warnings.warn(
            f"{int(off.sum())} boundary values clamped to zero (max |value| {worst:.3e})",
            TraceWarning,
            stacklevel=2,
        )
        vals = np.where(off, 0.0, vals)
    return SolutionField(space, vals)


def solve(space: FeSpace, coeff: CoefficientField, f1: ex.ExprAst, *,
          solver: str = "bicgstab", tol: float = 1e-10, max_iter: int | None = None,
          preconditioner: str = "jacobi", load_quad: QuadratureRule = EDGE_MIDPOINT):
    """Assemble, eliminate the boundary and solve ``B[u, v] = (f1, v)``.

    Returns the solution field, the solver stats (``None`` for LU) and the
    reduced system.
    """
    a = assemble_stiffness(space, coeff)
    b = assemble_load(space, f1, load_quad)
    system = apply_dirichlet(a, b, space)
    if solver == "lu":
        xi = lu_solve_dense(system.matrix.to_dense(), system.rhs)
        stats = None
    elif solver == "bicgstab":
        xi, stats = bicgstab(system.matrix, system.rhs, tol=tol, max_iter=max_iter,
                             preconditioner=preconditioner)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return space.extend(xi), stats, system

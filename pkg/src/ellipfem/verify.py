"""Manufactured-solution error measurement and convergence studies."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .fem import (
    STRANG_FIX_7,
    CoefficientField,
    QuadratureRule,
    SolutionField,
    apply_dirichlet,
    assemble_load,
    assemble_stiffness,
    build_fespace,
    solve,
)
from .linalg import bicgstab, lu_solve_dense
from .mesh import Mesh, build_disc_mesh, mesh_size

__all__ = [
    "ConvergenceRow",
    "ConvergenceTable",
    "StudyError",
    "mms_source",
    "l2_error",
    "h1_semi_error",
    "convergence_study",
    "oracle_compare",
    "trace_violation",
    "L2_RATE_WINDOW",
    "H1_RATE_WINDOW",
]

L2_RATE_WINDOW = (1.8, 2.2)
H1_RATE_WINDOW = (0.85, 1.15)


class StudyError(RuntimeError):
    pass


def mms_source(u_exact: ex.ExprAst) -> ex.ExprAst:
    """Weak-form source ``f1 = -(u_xx + x u_xy + u_yy)`` for a chosen solution."""
    ux = ex.differentiate(u_exact, "x")
    uxx = ex.differentiate(ux, "x")
    uxy = ex.differentiate(ux, "y")
    uyy = ex.differentiate(ex.differentiate(u_exact, "y"), "y")
    lu = ex.make_add(ex.make_add(uxx, ex.make_mul(ex.X, uxy)), uyy)
    return ex.make_neg(lu)


def l2_error(u: SolutionField, u_exact: ex.ExprAst, quad: QuadratureRule = STRANG_FIX_7) -> float:
    mesh = u.space.mesh
    xq = quad.physical_points(mesh)
    diff = u.at_quadrature(quad) - ex.evaluate(u_exact, xq[..., 0], xq[..., 1])
    return math.sqrt(float(np.einsum("q,tq,t->", quad.weights, diff**2, u.space.areas)))


def h1_semi_error(u: SolutionField, u_exact_dx: ex.ExprAst, u_exact_dy: ex.ExprAst,
                  quad: QuadratureRule = STRANG_FIX_7) -> float:
    mesh = u.space.mesh
    xq = quad.physical_points(mesh)
    g = u.gradients()
    ex_dx = ex.evaluate(u_exact_dx, xq[..., 0], xq[..., 1])
    ex_dy = ex.evaluate(u_exact_dy, xq[..., 0], xq[..., 1])
    sq = (g[:, None, 0] - ex_dx) ** 2 + (g[:, None, 1] - ex_dy) ** 2
    return math.sqrt(float(np.einsum("q,tq,t->", quad.weights, sq, u.space.areas)))


def trace_violation(u_exact: ex.ExprAst, mesh: Mesh) -> float:
    """Largest |u_exact| over the boundary nodes."""
    b = mesh.nodes[mesh.node_is_boundary]
    if len(b) == 0:
        return 0.0
    return float(np.abs(ex.evaluate(u_exact, b[:, 0], b[:, 1])).max())


@dataclass
class ConvergenceRow:
    n_boundary: int
    h: float
    n_nodes: int
    error_l2: float
    error_h1_semi: float
    rate_l2: float | None = None
    rate_h1: float | None = None
    iterations: int = 0


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)
    trace_violation: float = 0.0

    @property
    def sound(self) -> bool:
        return self.trace_violation <= 1e-10

    def final_rates(self):
        if len(self.rows) < 2:
            return None, None
        last = self.rows[-1]
        return last.rate_l2, last.rate_h1

    def rates_in_window(self) -> bool:
        r2, r1 = self.final_rates()
        if r2 is None or r1 is None:
            return False
        return (L2_RATE_WINDOW[0] <= r2 <= L2_RATE_WINDOW[1]
                and H1_RATE_WINDOW[0] <= r1 <= H1_RATE_WINDOW[1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "n_nodes", "e_l2", "e_h1", "rate_l2", "rate_h1"])
        for r in self.rows:
            w.writerow([
                repr(r.h), r.n_nodes, repr(r.error_l2), repr(r.error_h1_semi),
                "" if r.rate_l2 is None else repr(r.rate_l2),
                "" if r.rate_h1 is None else repr(r.rate_h1),
            ])
        return buf.getvalue()

    def to_text(self) -> str:
        def fmt(v):
            return "      -" if v is None else f"{v:7.3f}"

        out = [f"{'n':>5} {'h':>10} {'nodes':>7} {'L2 error':>11} {'H1 error':>11} {'rate L2':>7} {'rate H1':>7}"]
        for r in self.rows:
            out.append(
                f"{r.n_boundary:5d} {r.h:10.4e} {r.n_nodes:7d} {r.error_l2:11.4e} "
                f"{r.error_h1_semi:11.4e} {fmt(r.rate_l2)} {fmt(r.rate_h1)}"
            )
        return "\n".join(out) + "\n"


def _rate(e_prev, e, h_prev, h):
    if e_prev <= 0 or e <= 0 or h_prev == h:
        return None
    return math.log(e_prev / e) / math.log(h_prev / h)


def convergence_study(boundary_counts, u_exact: ex.ExprAst,
                      coeff: CoefficientField | None = None,
                      tol: float = 1e-12) -> ConvergenceTable:
    """Solve the manufactured problem on a sequence of disc meshes.

    Rates use the maximum edge length as ``h``. A solve that fails to reach
    ``tol`` aborts the study with :class:`StudyError`.
    """
    counts = [int(n) for n in boundary_counts]
    if any(b <= a for a, b in zip(counts, counts[1:])):
        raise ValueError("boundary counts must be strictly increasing")
    coeff = coeff or CoefficientField.model_problem()
    f1 = mms_source(u_exact)
    dx = ex.differentiate(u_exact, "x")
    dy = ex.differentiate(u_exact, "y")
    table = ConvergenceTable()
    for n in counts:
        mesh = build_disc_mesh(n)
        table.trace_violation = max(table.trace_violation, trace_violation(u_exact, mesh))
        space = build_fespace(mesh)
        u, stats, _ = solve(space, coeff, f1, tol=tol)
        if not stats.converged:
            raise StudyError(
                f"n={n}: solver stopped after {stats.iterations} iterations at "
                f"relative residual {stats.relative_residual:.3e}"
            )
        row = ConvergenceRow(
            n_boundary=n,
            h=mesh_size(mesh),
            n_nodes=mesh.n_nodes,
            error_l2=l2_error(u, u_exact),
            error_h1_semi=h1_semi_error(u, dx, dy),
            iterations=stats.iterations,
        )
        if table.rows:
            prev = table.rows[-1]
            row.rate_l2 = _rate(prev.error_l2, row.error_l2, prev.h, row.h)
            row.rate_h1 = _rate(prev.error_h1_semi, row.error_h1_semi, prev.h, row.h)
        table.rows.append(row)
    return table


def oracle_compare(mesh: Mesh, f1: ex.ExprAst, coeff: CoefficientField | None = None,
                   tol: float = 1e-12) -> float:
    """Max-norm relative gap between dense LU and BiCGSTAB on one reduced system."""
    coeff = coeff or CoefficientField.model_problem()
    space = build_fespace(mesh)
    system = apply_dirichlet(assemble_stiffness(space, coeff), assemble_load(space, f1), space)
    x_lu = lu_solve_dense(system.matrix.to_dense(), system.rhs)
    x_it, stats = bicgstab(system.matrix, system.rhs, tol=tol)
    if not stats.converged:
        raise StudyError(f"BiCGSTAB did not converge: {stats}")
    scale = np.abs(x_lu).max()
    if scale == 0:
        return float(np.abs(x_it).max())
    return float(np.abs(x_it - x_lu).max() / scale)

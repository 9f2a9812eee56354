"""Numerical well-posedness constants for the weak problem.

Everything here is computed on a concrete mesh: the ellipticity constant is
sampled at nodes and triangle centroids, the Poincare constant is the
discrete one from the smallest Dirichlet Laplacian eigenvalue, and the
coercivity/continuity inequalities are checked on discrete fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .fem import (
    STRANG_FIX_7,
    CoefficientField,
    EmptySystemError,
    SolutionField,
    apply_dirichlet,
    assemble_mass,
    assemble_stiffness,
    build_fespace,
    solve,
)
from .linalg import SparseCsr, generalized_eig_smallest
from .mesh import Mesh

__all__ = [
    "WellPosednessReport",
    "BoundsReport",
    "StabilityResult",
    "discriminants",
    "ellipticity_theta",
    "poincare_constant",
    "coercivity_beta",
    "check_bilinear_bounds",
    "evaluate_bounds",
    "stability_check",
    "l2_norm",
    "wellposedness_report",
]

CONTINUITY_C = 2.0


def _symmetric_part(c: np.ndarray) -> np.ndarray:
    return 0.5 * (c + np.swapaxes(c, -1, -2))


def discriminants(coeff: CoefficientField, x, y):
    """Leading minors (d1, d2) of the symmetric part of the coefficients at (x, y)."""
    s = _symmetric_part(coeff.evaluate(x, y))
    d1 = s[..., 0, 0]
    d2 = s[..., 0, 0] * s[..., 1, 1] - s[..., 0, 1] * s[..., 1, 0]
    if np.ndim(d1) == 0:
        return float(d1), float(d2)
    return d1, d2


def sample_points(mesh: Mesh) -> np.ndarray:
    """Nodes followed by triangle centroids."""
    centroids = mesh.nodes[mesh.triangles].mean(axis=1)
    return np.concatenate([mesh.nodes, centroids])


def smallest_symmetric_eigenvalue(coeff: CoefficientField, x, y):
    s = _symmetric_part(coeff.evaluate(x, y))
    a, b, c = s[..., 0, 0], s[..., 0, 1], s[..., 1, 1]
    half_tr = 0.5 * (a + c)
    return half_tr - np.sqrt((0.5 * (a - c)) ** 2 + b * b)


def ellipticity_theta(coeff: CoefficientField, mesh: Mesh) -> float:
    """Minimum over nodes and centroids of the smaller eigenvalue of sym(c).

    A value <= 0 is a non-elliptic verdict, returned rather than raised.
    """
    pts = sample_points(mesh)
    return float(np.min(smallest_symmetric_eigenvalue(coeff, pts[:, 0], pts[:, 1])))


def laplace_and_mass(mesh: Mesh, reduced: bool = True):
    space = build_fespace(mesh)
    k = assemble_stiffness(space, CoefficientField.identity())
    m = assemble_mass(space)
    if reduced:
        free = space.free_dofs
        if len(free) == 0:
            raise EmptySystemError("mesh has no interior nodes")
        k = k.submatrix(free, free)
        m = m.submatrix(free, free)
    return space, k, m


def poincare_constant(mesh: Mesh, tol: float = 1e-10, solver: str = "bicgstab") -> float:
    """Discrete Poincare constant ``1 / lambda_min`` of the Dirichlet Laplacian."""
    _, k, m = laplace_and_mass(mesh)
    lam, _ = generalized_eig_smallest(k, m, tol=tol, solver=solver)
    return 1.0 / lam


def coercivity_beta(theta: float, c_p: float) -> float:
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    if not c_p >= 0:
        raise ValueError(f"Poincare constant must be non-negative, got {c_p}")
    return theta / (c_p + 1.0)


@dataclass
class BoundsReport:
    coercive_ok: bool
    continuity_ok: bool
    min_coercive_ratio: float
    max_continuity_ratio: float
    trials: int
    seed: int
    coercive_failures: int = 0
    continuity_failures: int = 0


def evaluate_bounds(a_b: SparseCsr, h: SparseCsr, u, v, beta: float, continuity_c: float):
    """Check one pair of coefficient vectors.

    ``h`` is the H1 Gram matrix ``K + M``. Returns ``(coercive_ok,
    continuity_ok, coercive_ratio, continuity_ratio)``; ratios are nan for
    zero fields.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    buu = u @ (a_b @ u)
    bvu = v @ (a_b @ u)
    nu2 = u @ (h @ u)
    nv2 = v @ (h @ v)
    nu, nv = math.sqrt(max(nu2, 0.0)), math.sqrt(max(nv2, 0.0))
    coercive_ok = buu >= beta * nu2 - 1e-12 * nu2
    continuity_ok = abs(bvu) <= continuity_c * nu * nv + 1e-12 * max(nu * nv, 1.0)
    r_coer = buu / nu2 if nu2 > 0 else math.nan
    r_cont = abs(bvu) / (nu * nv) if nu * nv > 0 else math.nan
    return bool(coercive_ok), bool(continuity_ok), float(r_coer), float(r_cont)


def check_bilinear_bounds(a_b: SparseCsr, k_lap: SparseCsr, m: SparseCsr, beta: float,
                          continuity_c: float = CONTINUITY_C, trials: int = 100,
                          seed: int = 0) -> BoundsReport:
    """Sample random discrete fields and test coercivity and continuity.

    All matrices must live on the same (reduced) dof set. Each trial draws
    from its own PCG64 stream spawned from ``seed``.
    """
    n = a_b.n_rows
    if a_b.shape != (n, n) or k_lap.shape != (n, n) or m.shape != (n, n):
        raise ValueError("dimension mismatch between A_B, K and M")
    h = k_lap + m
    streams = np.random.SeedSequence(seed).spawn(trials)
    coer_fail = cont_fail = 0
    rmin, rmax = math.inf, 0.0
    for ss in streams:
        rng = np.random.default_rng(ss)
        u = rng.standard_normal(n)
        v = rng.standard_normal(n)
        c_ok, k_ok, r_coer, r_cont = evaluate_bounds(a_b, h, u, v, beta, continuity_c)
        coer_fail += not c_ok
        cont_fail += not k_ok
        if not math.isnan(r_coer):
            rmin = min(rmin, r_coer)
        if not math.isnan(r_cont):
            rmax = max(rmax, r_cont)
    return BoundsReport(
        coercive_ok=coer_fail == 0,
        continuity_ok=cont_fail == 0,
        min_coercive_ratio=rmin,
        max_continuity_ratio=rmax,
        trials=trials,
        seed=seed,
        coercive_failures=coer_fail,
        continuity_failures=cont_fail,
    )


def l2_norm(f: ex.ExprAst, mesh: Mesh, quad=STRANG_FIX_7) -> float:
    """L2 norm of an expression over the mesh by quadrature."""
    space = build_fespace(mesh)
    xq = quad.physical_points(mesh)
    fq = ex.evaluate(f, xq[..., 0], xq[..., 1])
    return math.sqrt(float(np.einsum("q,tq,t->", quad.weights, fq**2, space.areas)))


@dataclass
class StabilityResult:
    bound_ok: bool
    lhs: float
    rhs: float
    rigorous_rhs: float
    rigorous_ok: bool
    seminorm: float


def stability_check(u: SolutionField, f1: ex.ExprAst, c_p: float, beta: float,
                    k_lap: SparseCsr, m: SparseCsr) -> StabilityResult:
    """Compare ``||u||_H1`` with ``(C_p / beta) ||f1||_L2``.

    The bound with ``sqrt(C_p)`` in place of ``C_p`` (what Cauchy-Schwarz
    plus Poincare actually give) is reported alongside as ``rigorous_rhs``.
    ``k_lap`` and ``m`` may be full or reduced to the free dofs.
    """
    space = u.space
    if k_lap.n_rows == space.n_total:
        xi = u.values
    elif k_lap.n_rows == space.n_free:
        xi = u.free_values()
    else:
        raise ValueError("K and M do not match the solution's mesh")
    if m.shape != k_lap.shape:
        raise ValueError("K and M do not match the solution's mesh")
    semi2 = xi @ (k_lap @ xi)
    lhs = math.sqrt(max(semi2 + xi @ (m @ xi), 0.0))
    fnorm = l2_norm(f1, space.mesh)
    rhs = c_p / beta * fnorm
    rig = math.sqrt(c_p) / beta * fnorm
    return StabilityResult(
        bound_ok=lhs <= rhs * (1 + 1e-10),
        lhs=lhs,
        rhs=rhs,
        rigorous_rhs=rig,
        rigorous_ok=lhs <= rig * (1 + 1e-10),
        seminorm=math.sqrt(max(semi2, 0.0)),
    )


@dataclass
class WellPosednessReport:
    theta: float
    c_p: float
    beta: float
    continuity_c: float
    elliptic: bool
    coercive_check_passed: bool
    continuity_check_passed: bool
    d2_min: float = math.nan
    d2_max: float = math.nan
    stability_check_passed: bool = False
    extras: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return (
            self.elliptic
            and self.coercive_check_passed
            and self.continuity_check_passed
            and self.stability_check_passed
        )

    def items(self):
        yield "theta", self.theta
        yield "d2_min", self.d2_min
        yield "d2_max", self.d2_max
        yield "c_p", self.c_p
        yield "beta", self.beta
        yield "continuity_c", self.continuity_c
        yield "elliptic", self.elliptic
        yield "coercive_check_passed", self.coercive_check_passed
        yield "continuity_check_passed", self.continuity_check_passed
        yield "stability_check_passed", self.stability_check_passed
        yield from self.extras.items()

    def to_keyvalue(self) -> str:
        lines = []
        for k, v in self.items():
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = f"{v:.10g}"
            lines.append(f"{k}={v}")
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        ok = lambda flag: "pass" if flag else "FAIL"  # noqa: E731
        return (
            f"ellipticity theta      {self.theta:.10g}  ({'elliptic' if self.elliptic else 'NOT elliptic'})\n"
            f"discriminant D2 range  [{self.d2_min:.6g}, {self.d2_max:.6g}]\n"
            f"Poincare C_p           {self.c_p:.10g}\n"
            f"coercivity beta        {self.beta:.10g}\n"
            f"continuity C           {self.continuity_c:g}\n"
            f"coercivity check       {ok(self.coercive_check_passed)}\n"
            f"continuity check       {ok(self.continuity_check_passed)}\n"
            f"stability check        {ok(self.stability_check_passed)}\n"
        )


def wellposedness_report(mesh: Mesh, coeff: CoefficientField | None = None,
                         f1: ex.ExprAst | None = None, *, trials: int = 100, seed: int = 0,
                         continuity_c: float = CONTINUITY_C) -> WellPosednessReport:
    """Run every check on one mesh and collect the results."""
    coeff = coeff or CoefficientField.model_problem()
    f1 = f1 if f1 is not None else ex.parse("x*y")
    pts = sample_points(mesh)
    _, d2 = discriminants(coeff, pts[:, 0], pts[:, 1])
    theta = ellipticity_theta(coeff, mesh)
    space, k, m = laplace_and_mass(mesh)
    lam, _ = generalized_eig_smallest(k, m)
    c_p = 1.0 / lam
    elliptic = theta > 0
    extras = {"seed": seed, "trials": trials}
    if not elliptic:
        return WellPosednessReport(
            theta=theta, c_p=c_p, beta=math.nan, continuity_c=continuity_c,
            elliptic=False, coercive_check_passed=False, continuity_check_passed=False,
            d2_min=float(d2.min()), d2_max=float(d2.max()), extras=extras,
        )
    beta = coercivity_beta(theta, c_p)
    a_full = assemble_stiffness(space, coeff)
    a_b = apply_dirichlet(a_full, np.zeros(space.n_total), space).matrix
    bounds = check_bilinear_bounds(a_b, k, m, beta, continuity_c, trials, seed)
    u, _, _ = solve(space, coeff, f1)
    stab = stability_check(u, f1, c_p, beta, k, m)
    extras.update(
        min_coercive_ratio=bounds.min_coercive_ratio,
        max_continuity_ratio=bounds.max_continuity_ratio,
        stability_lhs=stab.lhs,
        stability_rhs=stab.rhs,
        stability_rhs_sqrt_cp=stab.rigorous_rhs,
        stability_sqrt_cp_ok=stab.rigorous_ok,
        h1_seminorm=stab.seminorm,
    )
    return WellPosednessReport(
        theta=theta, c_p=c_p, beta=beta, continuity_c=continuity_c, elliptic=True,
        coercive_check_passed=bounds.coercive_ok,
        continuity_check_passed=bounds.continuity_ok,
        d2_min=float(d2.min()), d2_max=float(d2.max()),
        stability_check_passed=stab.bound_ok, extras=extras,
    )

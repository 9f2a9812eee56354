"""Command-line entry point: ``ellipfem {mesh,solve,check,converge}``.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 failed check.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from pathlib import Path

from . import expr as ex
from . import io as fio
from .fem import CoefficientField, FemError, build_fespace, evaluate, solve
from .linalg import LinalgError
from .mesh import MeshError, build_disc_mesh, mesh_size
from .verify import H1_RATE_WINDOW, L2_RATE_WINDOW, StudyError, convergence_study
from .wellposed import CONTINUITY_C, laplace_and_mass, wellposedness_report

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3
DEFAULT_LEVELS = "25,50,100,200"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 3:
        raise argparse.ArgumentTypeError(f"need at least 3 boundary points, got {v}")
    return v


def _levels(text):
    try:
        vals = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers: {text!r}") from None
    if len(vals) < 2 or any(v < 3 for v in vals) or any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("levels must be >= 2 strictly increasing integers >= 3")
    return vals


def _add_mesh_source(p):
    p.add_argument("--boundary-points", type=_positive_int, default=50, metavar="N",
                   help="points on the unit circle (default 50)")
    p.add_argument("--mesh", type=Path, help="load a .msh file instead of generating a disc")


def _add_source(p, required):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--f", dest="f", metavar="EXPR",
                   help="right-hand side f of u_xx + x u_xy + u_yy = f")
    g.add_argument("--f1", dest="f1", metavar="EXPR", help="weak-form source f1 = -f")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ellipfem", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path,
                        help="key=value file whose entries are applied as flags")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mesh", help="triangulate the unit disc and save it as .msh")
    p.add_argument("--boundary-points", type=_positive_int, default=50, metavar="N")
    p.add_argument("--out", type=Path, help="output .msh path")

    p = sub.add_parser("solve", help="solve the Dirichlet problem on the disc")
    _add_mesh_source(p)
    _add_source(p, required=True)
    p.add_argument("--solver", choices=("bicgstab", "lu"), default="bicgstab")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--preconditioner", choices=("jacobi", "none"), default="jacobi")
    p.add_argument("--out", type=Path, help="VTK output path")
    p.add_argument("--csv", type=Path, help="CSV output path (x,y,u per node)")
    p.add_argument("--msh", type=Path, help="also save the mesh")
    p.add_argument("--name", default="uh", help="scalar field name in the VTK file")

    p = sub.add_parser("check", help="report well-posedness constants and checks")
    _add_mesh_source(p)
    _add_source(p, required=False)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--continuity", type=float, default=CONTINUITY_C)

    p = sub.add_parser("converge", help="manufactured-solution convergence study")
    p.add_argument("--exact", required=True, metavar="EXPR", help="manufactured solution")
    p.add_argument("--levels", type=_levels, default=_levels(DEFAULT_LEVELS))
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--csv", type=Path, help="write the table as CSV")
    return parser


def _expand_config(argv):
    """Splice ``--config FILE`` entries into argv right after the subcommand."""
    argv = list(argv)
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
            del argv[i:i + 2]
            break
        if a.startswith("--config="):
            path = a.split("=", 1)[1]
            del argv[i]
            break
    if path is None:
        return argv
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise UsageError(f"cannot read config {path}: {err}") from None
    extra = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        value = " ".join(shlex.split(value)) if value else value
        extra.append(f"{flag}={value}")
    cmd_at = next((i for i, a in enumerate(argv) if not a.startswith("-")), len(argv))
    return argv[:cmd_at + 1] + extra + argv[cmd_at + 1:]


def _err(msg):
    print(f"ellipfem: {msg}", file=sys.stderr)


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as err:
        raise UsageError(f"cannot write {path}: {err}") from None


def _load_mesh(args):
    if getattr(args, "mesh", None) is not None:
        try:
            text = args.mesh.read_text()
        except OSError as err:
            raise UsageError(f"cannot read {args.mesh}: {err}") from None
        return fio.read_msh(text)
    return build_disc_mesh(args.boundary_points)


def _source(args):
    """Weak-form source f1; ``--f`` is negated."""
    if args.f is not None:
        return ex.make_neg(ex.parse(args.f))
    if args.f1 is not None:
        return ex.parse(args.f1)
    return ex.parse("x*y")


def _kv(**items):
    for k, v in items.items():
        if isinstance(v, float):
            v = format(v, ".10g")
        elif isinstance(v, bool):
            v = str(v).lower()
        print(f"{k}={v}")


def cmd_mesh(args) -> int:
    m = build_disc_mesh(args.boundary_points)
    if args.out is not None:
        _write(args.out, fio.write_msh(m))
    _kv(nv=m.n_nodes, nt=m.n_triangles, ne=len(m.boundary_edges), h=mesh_size(m), area=m.area())
    return EXIT_OK


def cmd_solve(args) -> int:
    f1 = _source(args)
    mesh = _load_mesh(args)
    space = build_fespace(mesh)
    u, stats, _ = solve(space, CoefficientField.model_problem(), f1, solver=args.solver, tol=args.tol,
                        max_iter=args.max_iter, preconditioner=args.preconditioner)
    if stats is not None and not stats.converged:
        _err(f"solver did not converge: {stats.iterations} iterations, "
             f"relative residual {stats.relative_residual:.3e}")
        return EXIT_NUMERIC
    _, k, m = laplace_and_mass(mesh, reduced=False)
    h1 = float(u.values @ (k @ u.values) + u.values @ (m @ u.values)) ** 0.5
    if args.out is not None:
        _write(args.out, fio.write_vtk(mesh, u, args.name))
    if args.csv is not None:
        _write(args.csv, fio.write_csv(mesh, u))
    if args.msh is not None:
        _write(args.msh, fio.write_msh(mesh))
    info = dict(nv=mesh.n_nodes, n_free=space.n_free, solver=args.solver)
    if stats is not None:
        info.update(converged=stats.converged, iterations=stats.iterations,
                    relative_residual=stats.relative_residual)
    info.update(h1_norm=h1)
    try:
        info.update(u_origin=evaluate(u, (0.0, 0.0)))
    except FemError:
        pass
    _kv(**info)
    return EXIT_OK


def cmd_check(args) -> int:
    f1 = _source(args)
    mesh = _load_mesh(args)
    report = wellposedness_report(mesh, CoefficientField.model_problem(), f1, trials=args.trials,
                                  seed=args.seed, continuity_c=args.continuity)
    sys.stdout.write(report.to_text())
    sys.stdout.write("\n")
    sys.stdout.write(report.to_keyvalue())
    if not report.elliptic:
        _err(f"operator is not uniformly elliptic on this mesh (theta = {report.theta:.6g})")
    return EXIT_OK if report.all_passed else EXIT_CHECK


def cmd_converge(args) -> int:
    u_exact = ex.parse(args.exact)
    table = convergence_study(args.levels, u_exact, tol=args.tol)
    if not table.sound:
        _err(f"warning: manufactured solution violates u = 0 on the boundary "
             f"(max |u| = {table.trace_violation:.3e}); run marked unsound")
    sys.stdout.write(table.to_text())
    if args.csv is not None:
        _write(args.csv, table.to_csv())
    r2, r1 = table.final_rates()
    ok = table.sound and table.rates_in_window()
    if not ok and table.sound:
        _err(f"final rates L2={r2}, H1={r1} outside windows "
             f"{L2_RATE_WINDOW} / {H1_RATE_WINDOW}")
    _kv(sound=table.sound, rates_ok=ok)
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {"mesh": cmd_mesh, "solve": cmd_solve, "check": cmd_check, "converge": cmd_converge}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        argv = _expand_config(argv)
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, ex.ExprSyntaxError, ex.UnknownIdentifierError, fio.MshParseError,
            MeshError) as err:
        _err(str(err))
        return EXIT_USAGE
    except (ex.ExprError, LinalgError, FemError, StudyError) as err:
        _err(str(err))
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

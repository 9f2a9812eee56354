"""Text formats: FreeFEM ``.msh``, legacy ASCII VTK and CSV point clouds.

``.msh`` layout (indices 1-based on disk)::

    nv nt ne
    x y label            (nv lines; label 1 on boundary nodes, else 0)
    i j k region         (nt lines)
    i j label            (ne lines, boundary edges)
"""

from __future__ import annotations

import warnings

import numpy as np

from .fem import SolutionField
from .mesh import Mesh, MeshError, triangle_areas, validate_mesh

__all__ = [
    "MshParseError",
    "OrientationWarning",
    "write_msh",
    "read_msh",
    "write_vtk",
    "write_csv",
    "check_vtk_structure",
]


class MshParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class OrientationWarning(UserWarning):
    """Clockwise triangles were flipped while loading a mesh."""


def _num(v: float) -> str:
    return format(float(v), ".17g")


def write_msh(mesh: Mesh) -> str:
    out = [f"{mesh.n_nodes} {mesh.n_triangles} {len(mesh.boundary_edges)}"]
    for (x, y), b in zip(mesh.nodes, mesh.node_is_boundary):
        out.append(f"{_num(x)} {_num(y)} {1 if b else 0}")
    for (i, j, k), r in zip(mesh.triangles + 1, mesh.triangle_labels):
        out.append(f"{i} {j} {k} {r}")
    for (i, j), lab in zip(mesh.boundary_edges + 1, mesh.edge_labels):
        out.append(f"{i} {j} {lab}")
    return "\n".join(out) + "\n"


def _parse_rows(lines, start, count, width, kinds, section):
    rows = []
    for r in range(count):
        idx = start + r
        if idx >= len(lines):
            raise MshParseError(
                f"truncated {section} section: expected {count} lines, found {r}",
                idx + 1,
            )
        parts = lines[idx].split()
        if len(parts) != width:
            raise MshParseError(
                f"{section} entry needs {width} fields, got {len(parts)}", idx + 1
            )
        try:
            rows.append([k(p) for k, p in zip(kinds, parts)])
        except ValueError as err:
            raise MshParseError(f"bad number in {section} entry: {err}", idx + 1) from None
    return rows


def read_msh(text: str) -> Mesh:
    """Parse a ``.msh`` document.

    Clockwise triangles are flipped to counter-clockwise with an
    :class:`OrientationWarning`. Structural problems (dangling indices,
    zero-area triangles, inconsistent boundary) raise :class:`MeshError`.
    """
    lines = text.splitlines()
    # blank lines are tolerated only at the end
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MshParseError("empty document: missing header", 1)
    head = lines[0].split()
    if len(head) != 3:
        raise MshParseError(f"header must be 'nv nt ne', got {lines[0]!r}", 1)
    try:
        nv, nt, ne = (int(h) for h in head)
    except ValueError:
        raise MshParseError(f"header must hold three integers, got {lines[0]!r}", 1) from None
    if min(nv, nt, ne) < 0:
        raise MshParseError("negative count in header", 1)
    pos = 1
    nodes = _parse_rows(lines, pos, nv, 3, (float, float, int), "vertices")
    pos += nv
    tris = _parse_rows(lines, pos, nt, 4, (int,) * 4, "triangles")
    pos += nt
    edges = _parse_rows(lines, pos, ne, 3, (int,) * 3, "boundary edges")
    pos += ne
    if pos < len(lines):
        raise MshParseError(f"unexpected trailing content {lines[pos]!r}", pos + 1)

    node_arr = np.array(nodes, dtype=float).reshape(-1, 3)
    tri_arr = np.array(tris, dtype=np.int64).reshape(-1, 4)
    edge_arr = np.array(edges, dtype=np.int64).reshape(-1, 3)
    for name, arr, first_line in (
        ("triangle", tri_arr[:, :3], 2 + nv),
        ("boundary edge", edge_arr[:, :2], 2 + nv + nt),
    ):
        bad = np.flatnonzero(np.any((arr < 1) | (arr > nv), axis=1))
        if bad.size:
            raise MeshError(
                f"line {first_line + bad[0]}: {name} references a node outside 1..{nv}"
            )
    tri_idx = tri_arr[:, :3] - 1
    flags = node_arr[:, 2].astype(np.int64) != 0
    flags[edge_arr[:, :2].ravel() - 1] = True
    mesh = Mesh(
        nodes=node_arr[:, :2],
        triangles=tri_idx,
        triangle_labels=tri_arr[:, 3],
        boundary_edges=edge_arr[:, :2] - 1,
        edge_labels=edge_arr[:, 2],
        node_is_boundary=flags,
    )
    areas = triangle_areas(mesh)
    cw = areas < 0
    if np.any(cw):
        warnings.warn(
            f"{int(cw.sum())} clockwise triangle(s) re-oriented counter-clockwise",
            OrientationWarning,
            stacklevel=2,
        )
        tri_idx = tri_idx.copy()
        tri_idx[cw] = tri_idx[cw][:, [0, 2, 1]]
        mesh = Mesh(
            nodes=mesh.nodes,
            triangles=tri_idx,
            triangle_labels=mesh.triangle_labels,
            boundary_edges=mesh.boundary_edges,
            edge_labels=mesh.edge_labels,
            node_is_boundary=mesh.node_is_boundary,
        )
    validate_mesh(mesh)
    return mesh


def write_vtk(mesh: Mesh, field: SolutionField | np.ndarray, name: str = "u") -> str:
    values = field.values if isinstance(field, SolutionField) else np.asarray(field, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError(f"field has {values.size} values for {mesh.n_nodes} nodes")
    if not name or any(c.isspace() for c in name):
        raise ValueError("scalar name must be a non-empty word")
    nv, nt = mesh.n_nodes, mesh.n_triangles
    out = [
        "# vtk DataFile Version 2.0",
        f"{name} on P1 triangle mesh",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    out += [f"{_num(x)} {_num(y)} 0" for x, y in mesh.nodes]
    out.append(f"CELLS {nt} {4 * nt}")
    out += [f"3 {i} {j} {k}" for i, j, k in mesh.triangles]
    out.append(f"CELL_TYPES {nt}")
    out += ["5"] * nt
    out.append(f"POINT_DATA {nv}")
    out.append(f"SCALARS {name} double 1")
    out.append("LOOKUP_TABLE default")
    out += [_num(v) for v in values]
    return "\n".join(out) + "\n"


def write_csv(mesh: Mesh, field: SolutionField | np.ndarray) -> str:
    """One ``x,y,u`` row per node after a header."""
    values = field.values if isinstance(field, SolutionField) else np.asarray(field, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise ValueError(f"field has {values.size} values for {mesh.n_nodes} nodes")
    out = ["x,y,u"]
    out += [f"{_num(x)},{_num(y)},{_num(v)}" for (x, y), v in zip(mesh.nodes, values)]
    return "\n".join(out) + "\n"


def check_vtk_structure(text: str) -> dict:
    """Minimal structural validation of a legacy ASCII unstructured grid.

    Checks section order and counts; returns the parsed counts. Raises
    ``ValueError`` describing the first problem found.
    """
    lines = text.splitlines()
    if len(lines) < 4:
        raise ValueError("document too short")
    if lines[0] != "# vtk DataFile Version 2.0":
        raise ValueError("first line must be '# vtk DataFile Version 2.0'")
    if lines[2].strip() != "ASCII":
        raise ValueError("third line must be 'ASCII'")
    if lines[3].strip() != "DATASET UNSTRUCTURED_GRID":
        raise ValueError("fourth line must be 'DATASET UNSTRUCTURED_GRID'")
    pos = 4

    def header(keyword, n_fields):
        nonlocal pos
        if pos >= len(lines):
            raise ValueError(f"missing {keyword} section")
        parts = lines[pos].split()
        if not parts or parts[0] != keyword or len(parts) != n_fields:
            raise ValueError(f"expected {keyword} header at line {pos + 1}, got {lines[pos]!r}")
        pos += 1
        return parts

    def block(count, width, what):
        nonlocal pos
        rows = lines[pos:pos + count]
        if len(rows) != count:
            raise ValueError(f"{what}: expected {count} lines")
        for r, ln in enumerate(rows):
            parts = ln.split()
            if width is not None and len(parts) != width:
                raise ValueError(f"{what}: line {pos + r + 1} has {len(parts)} fields")
            [float(p) for p in parts]
        pos += count
        return rows

    nv = int(header("POINTS", 3)[1])
    block(nv, 3, "POINTS")
    _, nc, size = header("CELLS", 3)
    nc, size = int(nc), int(size)
    cells = block(nc, None, "CELLS")
    total = 0
    for ln in cells:
        ids = [int(p) for p in ln.split()]
        if ids[0] != len(ids) - 1:
            raise ValueError("cell vertex count does not match its entry")
        if any(i < 0 or i >= nv for i in ids[1:]):
            raise ValueError("cell references a missing point")
        total += len(ids)
    if total != size:
        raise ValueError(f"CELLS size {size} does not match {total} listed integers")
    nct = int(header("CELL_TYPES", 2)[1])
    if nct != nc:
        raise ValueError("CELL_TYPES count differs from CELLS count")
    types = block(nct, 1, "CELL_TYPES")
    npd = int(header("POINT_DATA", 2)[1])
    if npd != nv:
        raise ValueError("POINT_DATA count differs from POINTS count")
    scal = header("SCALARS", 4)
    if lines[pos].split() != ["LOOKUP_TABLE", "default"]:
        raise ValueError("expected 'LOOKUP_TABLE default'")
    pos += 1
    block(npd, 1, "SCALARS")
    if any(ln.strip() for ln in lines[pos:]):
        raise ValueError("unexpected trailing content")
    return {
        "points": nv,
        "cells": nc,
        "cell_types": sorted({int(t) for t in types}),
        "scalars": npd,
        "name": scal[1],
    }

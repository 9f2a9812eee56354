"""Triangulations of the unit disc.

The disc generator places nodes on concentric rings and connects them with an
incremental Delaunay triangulation. The triangulator keeps the convex hull
closed with "ghost" triangles that share a symbolic vertex at infinity, so no
finite super-triangle is needed and hull edges never go missing.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh",
    "MeshError",
    "DegenerateInputError",
    "build_disc_mesh",
    "delaunay",
    "mesh_size",
    "locate_point",
    "triangle_areas",
    "edges",
    "validate_mesh",
]

PREDICATE_TOL = 1e-12
GHOST = -1


class MeshError(ValueError):
    pass


class DegenerateInputError(MeshError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh.

    Attributes
    ----------
    nodes : (nv, 2) float array
    triangles : (nt, 3) int array, counter-clockwise, 0-based
    triangle_labels : (nt,) int array, region labels
    boundary_edges : (ne, 2) int array, oriented with the mesh interior on the left
    edge_labels : (ne,) int array
    node_is_boundary : (nv,) bool array
    """

    nodes: np.ndarray
    triangles: np.ndarray
    triangle_labels: np.ndarray
    boundary_edges: np.ndarray
    edge_labels: np.ndarray
    node_is_boundary: np.ndarray = field(default=None)

    def __post_init__(self):
        conv = {
            "nodes": (float, (-1, 2)),
            "triangles": (np.int64, (-1, 3)),
            "triangle_labels": (np.int64, (-1,)),
            "boundary_edges": (np.int64, (-1, 2)),
            "edge_labels": (np.int64, (-1,)),
        }
        for name, (dtype, shape) in conv.items():
            arr = np.array(getattr(self, name), dtype=dtype).reshape(shape)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        flags = self.node_is_boundary
        if flags is None:
            flags = np.zeros(len(self.nodes), dtype=bool)
            flags[self.boundary_edges.ravel()] = True
        flags = np.array(flags, dtype=bool)
        flags.setflags(write=False)
        object.__setattr__(self, "node_is_boundary", flags)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def area(self) -> float:
        return float(triangle_areas(self).sum())

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in (
                "nodes",
                "triangles",
                "triangle_labels",
                "boundary_edges",
                "edge_labels",
                "node_is_boundary",
            )
        )

    __hash__ = None


def triangle_areas(mesh: Mesh) -> np.ndarray:
    """Signed areas, positive for counter-clockwise triangles."""
    p = mesh.nodes[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def edges(mesh: Mesh) -> np.ndarray:
    """Unique undirected edges as sorted index pairs."""
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0)


def validate_mesh(mesh: Mesh) -> None:
    """Raise :class:`MeshError` unless every structural invariant holds."""
    nv = mesh.n_nodes
    if not np.all(np.isfinite(mesh.nodes)):
        raise MeshError("non-finite node coordinates")
    for name in ("triangles", "boundary_edges"):
        idx = getattr(mesh, name)
        if idx.size and (idx.min() < 0 or idx.max() >= nv):
            raise MeshError(f"{name} reference a node index outside 0..{nv - 1}")
    if len(mesh.triangle_labels) != mesh.n_triangles:
        raise MeshError("one region label per triangle required")
    if len(mesh.edge_labels) != len(mesh.boundary_edges):
        raise MeshError("one label per boundary edge required")
    areas = triangle_areas(mesh)
    if np.any(areas <= 0):
        bad = int(np.argmax(areas <= 0))
        raise MeshError(f"triangle {bad} has non-positive signed area {areas[bad]:.3e}")
    t = mesh.triangles
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("an edge is shared by more than two triangles")
    hull = {tuple(row) for row in uniq[counts == 1]}
    be = np.sort(mesh.boundary_edges, axis=1)
    marked = {tuple(row) for row in be}
    if len(marked) != len(be):
        raise MeshError("duplicate boundary edge")
    if marked != hull:
        raise MeshError(
            "boundary edges must be exactly the edges used by one triangle "
            f"({len(marked)} marked, {len(hull)} found)"
        )


# ---------------------------------------------------------------------------
# Delaunay


def _orient(pts, a, b, c):
    """Twice the signed area of (a, b, c), zeroed when below tolerance."""
    ax, ay = pts[a]
    bx, by = pts[b]
    cx, cy = pts[c]
    d = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    scale = abs(bx - ax) * abs(cy - ay) + abs(by - ay) * abs(cx - ax)
    if abs(d) <= PREDICATE_TOL * scale:
        return 0.0
    return d


def _incircle(pts, a, b, c, p):
    """Positive when p is strictly inside the circumcircle of ccw (a, b, c)."""
    px, py = pts[p]
    adx, ady = pts[a][0] - px, pts[a][1] - py
    bdx, bdy = pts[b][0] - px, pts[b][1] - py
    cdx, cdy = pts[c][0] - px, pts[c][1] - py
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    d = (
        alift * (bdx * cdy - cdx * bdy)
        + blift * (cdx * ady - adx * cdy)
        + clift * (adx * bdy - bdx * ady)
    )
    perm = (
        alift * (abs(bdx * cdy) + abs(cdx * bdy))
        + blift * (abs(cdx * ady) + abs(adx * cdy))
        + clift * (abs(adx * bdy) + abs(bdx * ady))
    )
    return d > PREDICATE_TOL * perm


class _Triangulation:
    """Mutable working state: triangles keyed by id, directed edge -> id."""

    def __init__(self, pts):
        self.pts = pts
        self.tris = {}
        self.edge = {}
        self.next_id = 0
        self.last = None

    def add(self, a, b, c):
        tid = self.next_id
        self.next_id += 1
        self.tris[tid] = (a, b, c)
        self.edge[(a, b)] = tid
        self.edge[(b, c)] = tid
        self.edge[(c, a)] = tid
        if GHOST not in (a, b, c):
            self.last = tid
        return tid

    def remove(self, tid):
        a, b, c = self.tris.pop(tid)
        for e in ((a, b), (b, c), (c, a)):
            if self.edge.get(e) == tid:
                del self.edge[e]

    def conflicts(self, tid, p):
        a, b, c = self.tris[tid]
        pts = self.pts
        if GHOST in (a, b, c):
            # rotate so the ghost is last; (u, v) is the hull edge seen from outside
            while c != GHOST:
                a, b, c = b, c, a
            o = _orient(pts, a, b, p)
            if o > 0:
                return True
            if o == 0:
                # on the hull line: conflicts only inside the open segment
                ax, ay = pts[a]
                bx, by = pts[b]
                px, py = pts[p]
                t = (px - ax) * (bx - ax) + (py - ay) * (by - ay)
                return 0 < t < (bx - ax) ** 2 + (by - ay) ** 2
            return False
        return _incircle(pts, a, b, c, p)

    def locate(self, p):
        """Visibility walk to a triangle in conflict with p."""
        pts = self.pts
        tid = self.last
        for _ in range(4 * len(self.tris) + 10):
            a, b, c = self.tris[tid]
            moved = False
            for u, v in ((a, b), (b, c), (c, a)):
                if _orient(pts, u, v, p) < 0:
                    nxt = self.edge[(v, u)]
                    if GHOST in self.tris[nxt]:
                        return nxt
                    tid = nxt
                    moved = True
                    break
            if not moved:
                return tid
        raise MeshError("point location failed to terminate")

    def insert(self, p):
        start = self.locate(p)
        if not self.conflicts(start, p):
            # p lies on a vertex or the walk stopped at a non-conflicting hull ghost
            tri = self.tris[start]
            for v in tri:
                if v != GHOST and np.hypot(*(self.pts[v] - self.pts[p])) <= PREDICATE_TOL:
                    raise DegenerateInputError(f"duplicate point {p} coincides with {v}")
            raise MeshError(f"no conflicting triangle found for point {p}")
        cavity = {start}
        stack = [start]
        while stack:
            tid = stack.pop()
            a, b, c = self.tris[tid]
            for u, v in ((a, b), (b, c), (c, a)):
                nb = self.edge.get((v, u))
                if nb is not None and nb not in cavity and self.conflicts(nb, p):
                    cavity.add(nb)
                    stack.append(nb)
        # grow the cavity until every new real triangle is counter-clockwise
        while True:
            boundary = self._cavity_boundary(cavity)
            bad = [
                (u, v)
                for u, v in boundary
                if GHOST not in (u, v) and _orient(self.pts, u, v, p) <= 0
            ]
            if not bad:
                break
            for u, v in bad:
                nb = self.edge.get((v, u))
                if nb is None:
                    raise MeshError("cavity repair reached the outside")
                cavity.add(nb)
        for tid in cavity:
            self.remove(tid)
        for u, v in boundary:
            self.add(u, v, p)

    def _cavity_boundary(self, cavity):
        out = []
        for tid in cavity:
            a, b, c = self.tris[tid]
            for u, v in ((a, b), (b, c), (c, a)):
                if self.edge.get((v, u)) not in cavity:
                    out.append((u, v))
        return out


def delaunay(points) -> np.ndarray:
    """Delaunay triangulation of a point set.

    Points are inserted in the given order. Returns an ``(nt, 3)`` array of
    counter-clockwise index triples tiling the convex hull.

    Raises
    ------
    DegenerateInputError
        Fewer than three points, all points collinear, or two points closer
        than 1e-12.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 3:
        raise DegenerateInputError("at least three points are required")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInputError("non-finite coordinates")
    _check_distinct(pts)
    # seed with the first non-collinear triple in insertion order
    k = None
    for j in range(2, n):
        if _orient(pts, 0, 1, j) != 0:
            k = j
            break
    if k is None:
        raise DegenerateInputError("all points are collinear")
    a, b = 0, 1
    if _orient(pts, a, b, k) < 0:
        a, b = b, a
    tri = _Triangulation(pts)
    tri.add(a, b, k)
    tri.add(b, a, GHOST)
    tri.add(k, b, GHOST)
    tri.add(a, k, GHOST)
    for p in range(2, n):
        if p != k:
            tri.insert(p)
    out = [t for t in tri.tris.values() if GHOST not in t]
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def _check_distinct(pts):
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    s = pts[order]
    # near-duplicates can be separated in lexicographic order; check a window
    for shift in range(1, min(len(s), 8)):
        d = np.hypot(*(s[shift:] - s[:-shift]).T)
        if np.any(d <= PREDICATE_TOL):
            raise DegenerateInputError("duplicate points (separation <= 1e-12)")


# ---------------------------------------------------------------------------
# disc generator


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def disc_points(n_boundary: int):
    """Node layout for :func:`build_disc_mesh`, in insertion order.

    Returns the coordinates and the number of trailing boundary nodes.
    """
    n = n_boundary
    rings = max(1, _round_half_up(n / (2 * math.pi)))
    pts = [(0.0, 0.0)]
    for k in range(1, rings):
        m = _round_half_up(n * k / rings)
        r = k / rings
        shift = 0.5 if k % 2 == 1 else 0.0
        for j in range(m):
            t = 2 * math.pi * (j + shift) / m
            pts.append((r * math.cos(t), r * math.sin(t)))
    for j in range(n):
        t = 2 * math.pi * j / n
        pts.append((math.cos(t), math.sin(t)))
    return np.array(pts), n


@functools.lru_cache(maxsize=16)
def build_disc_mesh(n_boundary: int) -> Mesh:
    """Triangulate the unit disc with ``n_boundary`` equally spaced boundary nodes.

    Interior nodes sit on ``R - 1`` rings of radius ``k/R`` with
    ``R = max(1, round(n/2pi))``, alternate rings rotated by half a spacing,
    plus the origin. Boundary edges carry label 1, triangles region 0.
    """
    if isinstance(n_boundary, bool) or int(n_boundary) != n_boundary or n_boundary < 3:
        raise ValueError(f"n_boundary must be an integer >= 3, got {n_boundary!r}")
    n_boundary = int(n_boundary)
    pts, nb = disc_points(n_boundary)
    tris = delaunay(pts)
    nv = len(pts)
    is_bnd = np.zeros(nv, dtype=bool)
    is_bnd[nv - nb:] = True
    bedges = _hull_edges(tris)
    return Mesh(
        nodes=pts,
        triangles=tris,
        triangle_labels=np.zeros(len(tris), dtype=np.int64),
        boundary_edges=bedges,
        edge_labels=np.ones(len(bedges), dtype=np.int64),
        node_is_boundary=is_bnd,
    )


def _hull_edges(tris):
    directed = set()
    for a, b, c in tris:
        directed.update(((a, b), (b, c), (c, a)))
    out = sorted(e for e in directed if (e[1], e[0]) not in directed)
    return np.array(out, dtype=np.int64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# queries


def mesh_size(mesh: Mesh) -> float:
    """Largest edge length over all triangles."""
    e = edges(mesh)
    d = mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]]
    return float(np.sqrt((d**2).sum(axis=1)).max())


def barycentric(mesh: Mesh, p) -> np.ndarray:
    """Barycentric coordinates of p with respect to every triangle, shape (nt, 3)."""
    p = np.asarray(p, dtype=float)
    v = mesh.nodes[mesh.triangles]
    x0, y0 = v[:, 0, 0], v[:, 0, 1]
    x1, y1 = v[:, 1, 0], v[:, 1, 1]
    x2, y2 = v[:, 2, 0], v[:, 2, 1]
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    l1 = ((p[0] - x0) * (y2 - y0) - (x2 - x0) * (p[1] - y0)) / det
    l2 = ((x1 - x0) * (p[1] - y0) - (p[0] - x0) * (y1 - y0)) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=1)


def locate_point(mesh: Mesh, p):
    """Find a triangle containing ``p``.

    Returns ``(triangle_index, barycentric_coords)``, or ``None`` when ``p``
    lies outside the mesh. Ties go to the lowest triangle index.
    """
    lam = barycentric(mesh, p)
    inside = np.all(lam >= -PREDICATE_TOL, axis=1)
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        return None
    t = int(hits[0])
    return t, lam[t]


def min_angle_degrees(mesh: Mesh) -> float:
    p = mesh.nodes[mesh.triangles]
    worst = np.inf
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cos = (a * b).sum(1) / np.linalg.norm(a, axis=1) / np.linalg.norm(b, axis=1)
        worst = min(worst, float(np.degrees(np.arccos(np.clip(cos, -1, 1))).min()))
    return worst

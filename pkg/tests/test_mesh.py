import math

import numpy as np
import pytest

from ellipfem.mesh import (
    DegenerateInputError,
    MeshError,
    barycentric,
    build_disc_mesh,
    delaunay,
    disc_points,
    edges,
    locate_point,
    mesh_size,
    min_angle_degrees,
    triangle_areas,
    validate_mesh,
)

from conftest import make_mesh

DISC_COUNTS = [6, 12, 25, 50, 100, 200]


def random_disc_points(seed, k=100):
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.random(k))
    t = 2 * np.pi * rng.random(k)
    return np.column_stack([r * np.cos(t), r * np.sin(t)])


def circumcircle_violations(points, tris, tol=1e-10):
    """Brute force over every (triangle, point) pair."""
    bad = []
    for t, (a, b, c) in enumerate(tris):
        (ax, ay), (bx, by), (cx, cy) = points[a], points[b], points[c]
        d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
        ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
        uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
        r2 = (ax - ux) ** 2 + (ay - uy) ** 2
        dist2 = (points[:, 0] - ux) ** 2 + (points[:, 1] - uy) ** 2
        inside = np.flatnonzero(dist2 < r2 * (1 - tol))
        bad += [(t, int(p)) for p in inside if p not in (a, b, c)]
    return bad


def signed_areas(points, tris):
    p = points[tris]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def convex_hull_area(points):
    # monotone chain, independent of the triangulation
    pts = sorted(map(tuple, points))

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and ((out[-1][0] - out[-2][0]) * (p[1] - out[-2][1])
                                     - (out[-1][1] - out[-2][1]) * (p[0] - out[-2][0])) <= 0:
                out.pop()
            out.append(p)
        return out

    hull = half(pts)[:-1] + half(pts[::-1])[:-1]
    x, y = np.array(hull).T
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


# ---------------------------------------------------------------- delaunay

def test_unit_square():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    tris = delaunay(pts)
    assert tris.shape == (2, 3)
    assert signed_areas(pts, tris).sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(signed_areas(pts, tris) > 0)


def test_three_points():
    pts = np.array([[0, 0], [2, 0], [0, 1]], dtype=float)
    tris = delaunay(pts)
    assert tris.shape == (1, 3)
    assert signed_areas(pts, tris)[0] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_points_empty_circumcircle(seed):
    pts = random_disc_points(seed)
    tris = delaunay(pts)
    assert np.all(signed_areas(pts, tris) > 0)
    assert circumcircle_violations(pts, tris) == []
    assert sorted(set(tris.ravel())) == list(range(len(pts)))
    assert signed_areas(pts, tris).sum() == pytest.approx(convex_hull_area(pts), abs=1e-12)


def test_random_points_match_scipy():
    spatial = pytest.importorskip("scipy.spatial")
    pts = random_disc_points(5)
    ours = {tuple(sorted(t)) for t in delaunay(pts)}
    ref = {tuple(sorted(t)) for t in spatial.Delaunay(pts).simplices}
    assert ours == ref


def test_grid_with_cocircular_quads_is_valid():
    g = np.linspace(0, 1, 6)
    pts = np.array([[x, y] for x in g for y in g])
    tris = delaunay(pts)
    assert len(tris) == 2 * 25
    assert np.all(signed_areas(pts, tris) > 0)
    assert circumcircle_violations(pts, tris) == []


@pytest.mark.parametrize("pts", [
    [[0, 0], [1, 1], [2, 2]],
    [[0, 0], [1, 0], [2, 0], [3, 0]],
    [[0, 0], [1, 0]],
    [[0, 0], [1, 0], [0, 1], [1, 0]],
])
def test_degenerate_inputs(pts):
    with pytest.raises(DegenerateInputError):
        delaunay(np.array(pts, dtype=float))


def test_insertion_is_deterministic():
    pts = random_disc_points(3)
    assert np.array_equal(delaunay(pts), delaunay(pts))


# ---------------------------------------------------------------- disc meshes

def test_hexagon_fan():
    m = build_disc_mesh(6)
    assert (m.n_nodes, m.n_triangles, len(m.boundary_edges)) == (7, 6, 6)
    assert m.area() == pytest.approx(3 * math.sqrt(3) / 2, abs=1e-14)
    assert np.flatnonzero(~m.node_is_boundary).tolist() == [0]


def test_disc_50_boundary_on_circle():
    m = build_disc_mesh(50)
    b = m.nodes[m.node_is_boundary]
    assert len(b) == 50
    assert np.abs(np.hypot(b[:, 0], b[:, 1]) - 1).max() <= 1e-12
    assert len(m.boundary_edges) == 50


def test_disc_has_node_at_one_zero():
    for n in DISC_COUNTS:
        m = build_disc_mesh(n)
        assert np.any(np.all(m.nodes == [1.0, 0.0], axis=1))


@pytest.mark.parametrize("n", DISC_COUNTS)
def test_disc_invariants(n):
    m = build_disc_mesh(n)
    validate_mesh(m)
    assert m.n_nodes - len(edges(m)) + m.n_triangles == 1
    expected = n / 2 * math.sin(2 * math.pi / n)
    assert abs(m.area() - expected) <= 1e-10
    b = m.boundary_edges
    x, y = m.nodes[b[:, 0]].T
    x2, y2 = m.nodes[b[:, 1]].T
    assert 0.5 * np.sum(x * y2 - x2 * y) == pytest.approx(m.area(), abs=1e-10)
    assert np.all(triangle_areas(m) > 0)


def test_disc_200_area():
    m = build_disc_mesh(200)
    assert abs(m.area() - math.pi) == pytest.approx(5.2e-4, rel=0.01)


@pytest.mark.parametrize("n", [25, 50, 100, 200])
def test_min_angle_floor(n):
    assert min_angle_degrees(build_disc_mesh(n)) >= 15.0


@pytest.mark.parametrize("n", [25, 50, 100, 200])
def test_disc_is_delaunay(n):
    m = build_disc_mesh(n)
    assert circumcircle_violations(m.nodes, m.triangles) == []


@pytest.mark.parametrize("n", [2, 0, -5, 6.5, True])
def test_disc_rejects_bad_counts(n):
    with pytest.raises(ValueError):
        build_disc_mesh(n)


def test_disc_points_insertion_order():
    pts, nb = disc_points(50)
    assert nb == 50
    assert np.array_equal(pts[0], [0.0, 0.0])
    radii = np.hypot(pts[:, 0], pts[:, 1])
    assert np.all(np.diff(radii) >= -1e-15)


def test_mesh_is_read_only():
    m = build_disc_mesh(12)
    with pytest.raises(ValueError):
        m.nodes[0, 0] = 5.0


# ---------------------------------------------------------------- size and location

def test_mesh_size_unit_triangle(unit_triangle):
    assert mesh_size(unit_triangle) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_mesh_size_hexagon():
    assert mesh_size(build_disc_mesh(6)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [25, 50, 100])
def test_mesh_size_halves(n):
    ratio = mesh_size(build_disc_mesh(n)) / mesh_size(build_disc_mesh(2 * n))
    assert 1.7 <= ratio <= 2.3


def test_locate_origin_in_hexagon():
    m = build_disc_mesh(6)
    t, lam = locate_point(m, (0.0, 0.0))
    center_local = list(m.triangles[t]).index(0)
    assert lam[center_local] == pytest.approx(1.0, abs=1e-15)
    assert t == 0  # lowest index wins among the six fan triangles


def test_locate_outside():
    assert locate_point(build_disc_mesh(6), (2.0, 0.0)) is None


def test_locate_centroid():
    m = build_disc_mesh(25)
    c = m.nodes[m.triangles[0]].mean(axis=0)
    t, lam = locate_point(m, c)
    assert t == 0
    assert np.allclose(lam, 1 / 3, atol=1e-12)


def test_barycentric_reconstructs_point(rng):
    m = build_disc_mesh(25)
    lam = barycentric(m, (0.1, 0.2))
    assert lam.shape == (m.n_triangles, 3)
    assert np.allclose(lam.sum(axis=1), 1.0)
    xy = np.einsum("ti,tik->tk", lam, m.nodes[m.triangles])
    assert np.allclose(xy, [0.1, 0.2])


# ---------------------------------------------------------------- validation

def test_validate_rejects_bad_index():
    m = make_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 3]], [[0, 1], [1, 2], [2, 0]])
    with pytest.raises(MeshError):
        validate_mesh(m)


def test_validate_rejects_clockwise():
    m = make_mesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]], [[0, 1], [1, 2], [2, 0]])
    with pytest.raises(MeshError):
        validate_mesh(m)


def test_validate_rejects_missing_boundary_edge():
    m = make_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]], [[0, 1], [1, 2]])
    with pytest.raises(MeshError):
        validate_mesh(m)


def test_mesh_equality():
    assert build_disc_mesh(12) == build_disc_mesh(12)
    assert build_disc_mesh(12) != build_disc_mesh(13)

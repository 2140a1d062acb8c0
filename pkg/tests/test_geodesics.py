import math

import numpy as np
import pytest

from gcvt import shapes
from gcvt.geodesics import (BoundaryHit, build_steiner_graph, distance_field, exp_map,
                            extract_isocontours, log_map, move_along, parallel_transport,
                            path_points, trace_geodesic, write_polylines_obj)
from gcvt.mesh import SurfacePoint, TangentVector, TriMesh


def _corner(m, which):
    v = m.vertices
    target = v.min(0) if which == "lo" else v.max(0)
    return SurfacePoint.at_vertex(m, int(np.argmin(np.linalg.norm(v - target, axis=1))))


@pytest.mark.parametrize("level", [8, 10])
def test_cube_opposite_corners(level):
    m = shapes.cube_surface(3)
    g = build_steiner_graph(m, level)
    d = distance_field(g, [_corner(m, "lo")]).distance(_corner(m, "hi"))
    assert d == pytest.approx(math.sqrt(5), rel=0.02)
    assert d >= math.sqrt(5) - 1e-9


def test_error_shrinks_with_level():
    m = shapes.cube_surface(2)
    errs = []
    for level in (1, 4, 12):
        g = build_steiner_graph(m, level)
        errs.append(distance_field(g, [_corner(m, "lo")]).distance(_corner(m, "hi")) - math.sqrt(5))
    assert errs[0] > errs[1] > errs[2] > 0


@pytest.mark.parametrize("n", [6, 12])
def test_flat_vertex_distances_are_euclidean(n):
    m = shapes.grid_mesh(n, n)
    g = build_steiner_graph(m, 4)
    rng = np.random.default_rng(n)
    for v in rng.choice(m.n_vertices, 5, replace=False):
        f = distance_field(g, [SurfacePoint.at_vertex(m, int(v))])
        e = np.linalg.norm(m.vertices - m.vertices[v], axis=1)
        ok = e > 0
        assert np.all(np.abs(f.dist[:m.n_vertices][ok] / e[ok] - 1) <= 0.02)


def test_flat_point_pairs_via_log_map():
    m = shapes.grid_mesh(10, 10)
    g = build_steiner_graph(m, 4)
    rng = np.random.default_rng(1)
    for _ in range(30):
        a, b = rng.random(2), rng.random(2)
        pa = m.nearest_surface_point([*a, 0.0])
        pb = m.nearest_surface_point([*b, 0.0])
        assert log_map(pa, pb, g).magnitude == pytest.approx(np.linalg.norm(a - b), rel=1e-9)


def test_multi_source_labels_follow_nearest():
    m = shapes.grid_mesh(8, 8)
    g = build_steiner_graph(m, 3)
    s = [m.nearest_surface_point([0.1, 0.5, 0]), m.nearest_surface_point([0.9, 0.5, 0])]
    f = distance_field(g, s)
    left = g.positions[:, 0] < 0.45
    right = g.positions[:, 0] > 0.55
    assert (f.label[left] == 0).all() and (f.label[right] == 1).all()


def test_isocontours_on_plane(tmp_path):
    m = shapes.grid_mesh(16, 16)
    g = build_steiner_graph(m, 4)
    f = distance_field(g, [m.nearest_surface_point([0.5, 0.5, 0])])
    cs = extract_isocontours(f, 0.3)
    total = sum(c.length for c in cs)
    assert total == pytest.approx(2 * math.pi * 0.3, rel=0.03)
    write_polylines_obj(tmp_path / "iso.obj", cs)
    assert (tmp_path / "iso.obj").read_text().count("\nl ") + 1 >= 1


def test_exp_log_roundtrip_on_plane():
    m = shapes.grid_mesh(8, 8)
    g = build_steiner_graph(m, 4)
    x = m.nearest_surface_point([0.2, 0.3, 0])
    y = m.nearest_surface_point([0.7, 0.8, 0])
    v = log_map(x, y, g)
    assert v.magnitude == pytest.approx(math.hypot(0.5, 0.5), rel=1e-6)
    z = exp_map(x, v, m)
    assert np.allclose(z.position(m), y.position(m), atol=1e-9)
    mid = move_along(x, y, 0.5, g)
    assert np.allclose(mid.position(m), [0.45, 0.55, 0], atol=1e-9)


def test_trace_wraps_around_cube():
    m = shapes.cube_surface(2)
    x = m.nearest_surface_point([0.3, 0.4, 0.0])
    p = x.position(m)
    d = np.diff(m.to_face_plane(x.face, [p, p + [1.0, 0.0, 0.0]]), axis=0)[0]
    # a straight path of length 4 around the cube returns to its start
    end, poly = trace_geodesic(m, x, d, 4.0)
    assert np.allclose(end.position(m), p, atol=1e-9)
    assert len(poly) > 4


def test_trace_stops_at_boundary():
    m = shapes.grid_mesh(4, 4)
    x = m.nearest_surface_point([0.5, 0.5, 0])
    with pytest.raises(BoundaryHit):
        exp_map(x, TangentVector.from_planar(x, (2.0, 0.0)), m)


def test_steiner_graph_counts():
    g = build_steiner_graph(shapes.tetrahedron(), 0)
    assert (g.n_nodes, g.n_arcs) == (4, 6)
    tri = shapes.grid_mesh(1, 1)
    one = TriMesh(tri.vertices[:3].copy(), np.array([[0, 1, 2]]))
    g = build_steiner_graph(one, 1)
    # 3 corners + 3 edge midpoints, all pairs inside the face
    assert (g.n_nodes, g.n_arcs) == (6, 15)


def test_coincident_sources_match_single_source():
    m = shapes.icosphere(2)
    g = build_steiner_graph(m, 3)
    p = SurfacePoint.at_vertex(m, 3)
    a = distance_field(g, [p])
    b = distance_field(g, [p, p])
    assert np.array_equal(a.dist, b.dist)
    assert (b.label == 0).all()


def test_vertex_distances_symmetric():
    m = shapes.icosphere(2)
    g = build_steiner_graph(m, 3)
    a, b = SurfacePoint.at_vertex(m, 3), SurfacePoint.at_vertex(m, 77)
    assert distance_field(g, [a]).distance(b) == pytest.approx(
        distance_field(g, [b]).distance(a), abs=1e-12)


def test_log_and_exp_at_zero():
    m = shapes.icosphere(2)
    g = build_steiner_graph(m, 3)
    x = SurfacePoint.at_vertex(m, 5)
    assert log_map(x, x, g).magnitude == 0.0
    assert exp_map(x, TangentVector(x), m) == x


def test_isocontour_above_range_is_empty():
    m = shapes.grid_mesh(6, 6)
    f = distance_field(build_steiner_graph(m, 3), [m.nearest_surface_point([0.5, 0.5, 0])])
    assert extract_isocontours(f, 10.0) == []


def test_disk_isocontour_is_one_circle():
    d = shapes.disk_mesh(1.0, 20)
    f = distance_field(build_steiner_graph(d, 4), [d.nearest_surface_point([0, 0, 0])])
    cs = extract_isocontours(f, 0.5)
    assert len(cs) == 1
    assert cs[0].length == pytest.approx(math.pi, rel=0.02)


def test_bump_splits_isocontour():
    m = shapes.bumped_sphere()
    f = distance_field(build_steiner_graph(m, 3), [m.nearest_surface_point([0, 1, 0])])
    counts = [len(extract_isocontours(f, v)) for v in np.linspace(0.5, f.dist.max(), 40)]
    assert max(counts) >= 2


def _dir3(m, v):
    _, axes = m.frames
    return np.asarray(v.direction) @ axes[v.base.face]


def test_transport_on_plane_is_identity():
    m = shapes.grid_mesh(4, 4)
    g = build_steiner_graph(m, 4)
    a = m.nearest_surface_point([0.2, 0.2, 0])
    b = m.nearest_surface_point([0.8, 0.7, 0])
    v = TangentVector(a, (0.3, 0.4), 1.0)
    w = parallel_transport(v, path_points(distance_field(g, [a]), b), m)
    assert np.allclose(_dir3(m, v), _dir3(m, w), atol=1e-12)
    assert w.magnitude == pytest.approx(v.magnitude)


def test_zero_vector_stays_zero():
    m = shapes.cube_surface(2)
    x = m.nearest_surface_point([0.3, 0.2, 0])
    path = [m.nearest_surface_point([0.3, 0, 0.2])]
    assert parallel_transport(TangentVector(x), path, m).magnitude == 0.0


def test_holonomy_around_cube_corner():
    m = shapes.cube_surface(2)
    pts = [m.nearest_surface_point(p) for p in
           ([0.3, 0.2, 0], [0.3, 0, 0.2], [0, 0.3, 0.2], [0.2, 0.3, 0], [0.3, 0.2, 0])]
    v = TangentVector.from_planar(pts[0], (1.0, 0.0))
    w = parallel_transport(v, pts[1:], m)
    # the loop encloses one corner with angle defect pi/2
    (a0, a1), (b0, b1) = v.direction, w.direction
    ang = math.atan2(a0 * b1 - a1 * b0, a0 * b0 + a1 * b1)
    assert abs(ang) == pytest.approx(math.pi / 2, abs=1e-9)


def test_trace_on_cone_matches_unrolled_sector():
    total = 1.5 * math.pi
    m, _ = shapes.cone_mesh(total, sectors=24, rings=16)
    apex = m.vertices[0]
    radial = m.vertices[1 + 24 * 7] - apex
    radial /= np.linalg.norm(radial)
    x = m.nearest_surface_point(apex + 0.5 * radial)
    p = x.position(m)
    r0 = np.linalg.norm(p - apex)
    t = np.cross([0.0, 0.0, 1.0], p - apex)
    t /= np.linalg.norm(t)
    d = np.diff(m.to_face_plane(x.face, [p, p + t]), axis=0)[0]
    L = 0.6
    end, _ = trace_geodesic(m, x, d, L)
    e = end.position(m)
    # unrolled, the path is a straight segment perpendicular to the radius
    assert np.linalg.norm(e - apex) == pytest.approx(math.hypot(r0, L), rel=1e-4)
    turn = (math.atan2(e[1], e[0]) - math.atan2(p[1], p[0])) % (2 * math.pi)
    assert turn == pytest.approx(math.atan(L / r0) * 2 * math.pi / total, rel=1e-4)

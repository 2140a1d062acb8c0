import json
import math

import numpy as np
import pytest

from gcvt import shapes
from gcvt.geodesics import build_steiner_graph
from gcvt.mesh import SurfacePoint, TriMesh, load_mesh, random_surface_points
from gcvt.tessellation import (build_gvt, cell_energies, combinatorial_stats, dual_idt,
                               gcvt_energy, stats_dict, validate_cells, write_boundary_obj,
                               write_cells_obj, write_dual_obj, write_stats_json)


def _second_moment_rect(w, h, cx, cy):
    """Integral of |x - c|^2 over [0, w] x [0, h] (independent oracle)."""
    ix = (w ** 3 / 3 - cx * w ** 2 + cx ** 2 * w) * h
    iy = (h ** 3 / 3 - cy * h ** 2 + cy ** 2 * h) * w
    return ix + iy


def test_single_generator_energy_on_square():
    m = shapes.grid_mesh(8, 8)
    t = build_gvt(m, [m.nearest_surface_point([0.5, 0.5, 0])])
    assert gcvt_energy(t) == pytest.approx(1 / 6, rel=1e-9)
    off = build_gvt(m, [m.nearest_surface_point([0.2, 0.7, 0])])
    assert gcvt_energy(off) == pytest.approx(_second_moment_rect(1, 1, 0.2, 0.7), rel=1e-9)


def test_two_generators_split_square():
    m = shapes.grid_mesh(7, 7)
    t = build_gvt(m, [m.nearest_surface_point([0.25, 0.5, 0]),
                      m.nearest_surface_point([0.75, 0.5, 0])])
    assert np.allclose(t.cell_areas, 0.5)
    e = 2 * _second_moment_rect(0.5, 1.0, 0.25, 0.5)
    assert gcvt_energy(t) == pytest.approx(e, rel=1e-9)
    assert cell_energies(t).sum() == pytest.approx(gcvt_energy(t))


def test_density_weights_energy():
    m = shapes.grid_mesh(6, 6)
    m2 = TriMesh(m.vertices, m.faces, np.full(m.n_vertices, 3.0))
    g = [m.nearest_surface_point([0.4, 0.4, 0])]
    assert gcvt_energy(build_gvt(m2, g)) == pytest.approx(3 * gcvt_energy(build_gvt(m, g)))


@pytest.mark.parametrize("mesh, g", [
    (shapes.icosphere(3), 0),
    (shapes.torus(24, 12), 1),
    (shapes.genus2_block(2, 10), 2),
])
def test_cells_partition_and_connect(mesh, g):
    graph = build_steiner_graph(mesh, 3)
    rng = np.random.default_rng(5)
    for m in (3, 17, 40):
        t = build_gvt(mesh, random_surface_points(mesh, m, rng), graph=graph)
        assert validate_cells(t).all_connected
        assert t.cell_areas.sum() == pytest.approx(mesh.area, rel=1e-9)
        s = combinatorial_stats(t)
        assert s.genus == g
        if s.closed_ball:
            assert (s.n_branch, s.n_edges) == s.expected_counts()


def test_sphere_closed_ball_and_dual(tmp_path):
    m = shapes.icosphere(3)
    t = build_gvt(m, random_surface_points(m, 12, np.random.default_rng(0)))
    s = combinatorial_stats(t)
    assert s.closed_ball
    assert (s.n_branch, s.n_edges) == (20, 30)
    d = dual_idt(t)
    assert d.valid and d.euler_characteristic == 2
    write_dual_obj(d, tmp_path / "dual.obj")
    dual = load_mesh(tmp_path / "dual.obj")
    assert dual.n_faces == 20 and dual.is_closed


def test_duplicate_generators_rejected():
    m = shapes.grid_mesh(4, 4)
    p = SurfacePoint(0, (0.2, 0.3, 0.5))
    with pytest.raises(ValueError, match="duplicate"):
        build_gvt(m, [p, p])


def test_exports(tmp_path):
    m = shapes.icosphere(2)
    t = build_gvt(m, random_surface_points(m, 6, np.random.default_rng(1)))
    write_cells_obj(t, tmp_path / "cells.obj")
    write_boundary_obj(t, tmp_path / "boundary.obj")
    d = write_stats_json(t, tmp_path / "stats.json")
    assert (tmp_path / "cells.mtl").read_text().count("newmtl") == 6
    text = (tmp_path / "cells.obj").read_text()
    assert text.count("usemtl") == 6
    assert "\nl " in (tmp_path / "boundary.obj").read_text()
    loaded = json.loads((tmp_path / "stats.json").read_text())
    assert set(loaded) == {"m", "genus", "n_branch", "n_edges", "closed_ball", "energy"}
    assert loaded == d == stats_dict(t)


def test_single_generator_covers_sphere():
    m = shapes.icosphere(2)
    t = build_gvt(m, [SurfacePoint.at_vertex(m, 0)])
    assert t.cells == [(1, 0, 2)]
    s = combinatorial_stats(t)
    assert (s.n_branch, s.n_edges) == (0, 0)
    assert len(t.boundary_polylines()) == 0


def test_torus_cells_are_annuli():
    m = shapes.torus(32, 12)
    t = build_gvt(m, [m.nearest_surface_point([1.4, 0, 0]), m.nearest_surface_point([-1.4, 0, 0])])
    rep = validate_cells(t)
    assert rep.all_connected
    assert rep.n_loops == [2, 2]
    assert not any(rep.simply_connected)
    assert not combinatorial_stats(t).closed_ball


def test_two_generators_on_sphere():
    m = shapes.icosphere(3)
    t = build_gvt(m, [SurfacePoint.at_vertex(m, 0), m.nearest_surface_point(-m.vertices[0])])
    s = combinatorial_stats(t)
    assert (s.n_branch, s.n_edges) == (0, 1)
    assert len(t.voronoi_edges) == 1 and t.voronoi_edges[0][2]
    d = dual_idt(t)
    assert not d.valid and d.reason == "no branch points"


def test_disk_energy_closed_form():
    # second moment of the unit disk about its center is pi / 2
    d = shapes.disk_mesh(1.0, 20)
    t = build_gvt(d, [d.nearest_surface_point([0, 0, 0])])
    assert gcvt_energy(t) == pytest.approx(math.pi / 2, rel=0.01)


def test_energy_decreases_with_nested_generators():
    m = shapes.grid_mesh(12, 12)
    g = build_steiner_graph(m, 3)
    order = np.random.default_rng(0).permutation(m.n_vertices)
    energies = [gcvt_energy(build_gvt(m, [SurfacePoint.at_vertex(m, int(v)) for v in order[:n]],
                                      graph=g)) for n in (1, 4, 16, 64, 169)]
    assert all(b < a for a, b in zip(energies, energies[1:]))


def test_tetrahedral_generators_dual():
    m = shapes.icosphere(2)
    pts = [m.nearest_surface_point(p / np.linalg.norm(p)) for p in
           np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)]
    d = dual_idt(build_gvt(m, pts))
    assert d.valid
    assert (len(d.vertices), len(d.edges), len(d.triangles)) == (4, 6, 4)


def test_genus_two_few_generators_not_closed_ball():
    m = shapes.genus2_block(1, 0)
    t = build_gvt(m, random_surface_points(m, 3, np.random.default_rng(2)))
    assert not combinatorial_stats(t).closed_ball
    assert not dual_idt(t).valid

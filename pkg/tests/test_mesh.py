import numpy as np
import pytest

from gcvt import shapes
from gcvt.mesh import (MeshError, SurfacePoint, TangentVector, TriMesh, genus, integrate_density,
                       flat_vertices, load_mesh, random_surface_points, saddle_vertices,
                       write_obj)

TETRA_OBJ = b"""# tetrahedron
v 0 0 0
v 1 0 0
v 0 1 0
v 0 0 1
f 1 3 2
f 1 2 4
f 1 4 3
f 2 3 4
"""


def test_load_obj_and_off_agree(tmp_path):
    m = load_mesh(TETRA_OBJ)
    off = tmp_path / "t.off"
    lines = ["OFF", "4 4 0"] + [" ".join(map(str, v)) for v in m.vertices]
    lines += ["3 " + " ".join(map(str, f)) for f in m.faces]
    off.write_text("\n".join(lines) + "\n")
    m2 = load_mesh(off)
    assert np.allclose(m.vertices, m2.vertices)
    assert np.array_equal(m.faces, m2.faces)
    assert m.is_closed and genus(m) == 0
    assert m.n_edges == 6 and m.euler_characteristic == 2


def test_obj_roundtrip(tmp_path):
    m = shapes.torus(8, 6)
    p = tmp_path / "torus.obj"
    write_obj(p, m.vertices, m.faces)
    m2 = load_mesh(p)
    assert np.allclose(m.vertices, m2.vertices)
    assert genus(m2) == 1


@pytest.mark.parametrize("text, line", [
    (b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n", 4),
    (b"v 0 0 0\nv 1 x 0\n", 2),
    (b"v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n", 5),
])
def test_bad_obj_reports_line(tmp_path, text, line):
    p = tmp_path / "bad.obj"
    p.write_bytes(text)
    with pytest.raises(MeshError) as exc:
        load_mesh(p)
    assert exc.value.line == line
    assert f"bad.obj:{line}:" in str(exc.value)


def test_bad_off_reports_line(tmp_path):
    p = tmp_path / "bad.off"
    p.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n")
    with pytest.raises(MeshError) as exc:
        load_mesh(p)
    assert exc.value.line == 6


def test_degenerate_face_rejected():
    with pytest.raises(MeshError):
        TriMesh(np.eye(3), np.array([[0, 1, 1]]))


def test_genus_of_blocks():
    assert genus(shapes.icosphere(1)) == 0
    assert genus(shapes.torus_block(1, 0)) == 1
    assert genus(shapes.genus2_block(1, 0)) == 2


def test_surface_point_validation():
    with pytest.raises(ValueError):
        SurfacePoint(0, (0.5, 0.6, 0.1))
    p = SurfacePoint(0, (1.0, 0.0, 0.0))
    m = load_mesh(TETRA_OBJ)
    assert np.allclose(p.position(m), m.vertices[m.faces[0, 0]])


def test_tangent_vector_scaling():
    v = TangentVector(SurfacePoint(0, (1 / 3, 1 / 3, 1 / 3)), (3.0, 4.0), 2.0)
    assert np.allclose(v.direction, (0.6, 0.8))
    w = v.scaled(-0.5)
    assert w.magnitude == pytest.approx(1.0)
    assert np.allclose(w.direction, (-0.6, -0.8))


def test_random_points_are_area_uniform():
    m = shapes.grid_mesh(8, 8)
    pts = random_surface_points(m, 4000, np.random.default_rng(3))
    xy = np.array([p.position(m)[:2] for p in pts])
    assert abs(xy[:, 0].mean() - 0.5) < 0.02
    assert abs((xy[:, 0] < 0.25).mean() - 0.25) < 0.03


def test_density_integral_and_centroid():
    m = shapes.grid_mesh(4, 4)
    mass, c = integrate_density(m)
    assert mass == pytest.approx(1.0)
    assert np.allclose(c[:2], 0.5)
    rho = m.vertices[:, 0] + 1.0
    m2 = TriMesh(m.vertices, m.faces, rho)
    mass2, c2 = integrate_density(m2)
    # integral of (x + 1) over the unit square and its first moment
    assert mass2 == pytest.approx(1.5)
    assert c2[0] == pytest.approx((1 / 3 + 1 / 2) / 1.5)


def test_single_triangle_counts():
    m = TriMesh(np.eye(3), np.array([[0, 1, 2]]))
    assert (m.n_vertices, m.n_edges, m.n_faces) == (3, 3, 1)
    assert not m.is_closed and m.n_boundary_loops == 1


def test_coarse_torus_counts():
    m = shapes.torus(4, 4)
    assert (m.n_vertices, m.n_edges, m.n_faces) == (16, 48, 32)
    assert m.euler_characteristic == 0 and genus(m) == 1


def test_non_manifold_edge_rejected():
    v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]], float)
    with pytest.raises(MeshError):
        TriMesh(v, np.array([[0, 1, 2], [1, 0, 3], [0, 1, 4]]))


def test_saddle_and_flat_vertices():
    assert len(saddle_vertices(shapes.cube_surface(2))) == 0
    m = shapes.grid_mesh(4, 4)
    assert len(flat_vertices(m)) == 9
    assert len(saddle_vertices(m)) == 0


def test_linear_density_on_unit_square():
    m = shapes.grid_mesh(3, 3)
    mass, c = integrate_density(TriMesh(m.vertices, m.faces, m.vertices[:, 0].copy()))
    assert mass == pytest.approx(0.5)
    assert c[0] == pytest.approx(2 / 3)

"""Procedural test meshes: grids, spheres, tori, a genus-2 block, cones."""
import math

import numpy as np
from scipy.spatial import ConvexHull

from .mesh import TriMesh


def grid_mesh(nx, ny, size=(1.0, 1.0), pattern="alternate"):
    """Flat rectangular grid in the z=0 plane.

    ``pattern`` chooses the diagonal of each quad: "alternate" flips it in a
    checkerboard so the mesh has the square's reflection symmetries.
    """
    xs = np.linspace(0.0, size[0], nx + 1)
    ys = np.linspace(0.0, size[1], ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b, c, d = a + 1, a + nx + 2, a + nx + 1
            flip = pattern == "alternate" and (i + j) % 2 == 1
            if flip:
                faces += [(a, b, d), (b, c, d)]
            else:
                faces += [(a, b, c), (a, c, d)]
    return TriMesh(verts, np.array(faces))


def disk_mesh(radius=1.0, rings=20, segments=None):
    """Flat disk with a center vertex and concentric rings."""
    verts = [(0.0, 0.0, 0.0)]
    faces = []
    prev = [0]
    for r in range(1, rings + 1):
        n = segments or 6 * r
        ring_start = len(verts)
        rad = radius * r / rings
        for k in range(n):
            t = 2 * math.pi * k / n
            verts.append((rad * math.cos(t), rad * math.sin(t), 0.0))
        cur = list(range(ring_start, ring_start + n))
        if len(prev) == 1:
            for k in range(n):
                faces.append((prev[0], cur[k], cur[(k + 1) % n]))
        else:
            # zip two rings by angle
            i = j = 0
            m = len(prev)
            while i < m or j < n:
                ai = (i + 0.5) / m if i < m else 2.0
                aj = (j + 0.5) / n if j < n else 2.0
                if aj <= ai:
                    faces.append((prev[i % m], cur[j % n], cur[(j + 1) % n]))
                    j += 1
                else:
                    faces.append((prev[i % m], cur[j % n], prev[(i + 1) % m]))
                    i += 1
        prev = cur
    return TriMesh(np.array(verts), np.array(faces))


def _oriented_hull(points):
    hull = ConvexHull(points)
    faces = hull.simplices.copy()
    c = points.mean(0)
    p = points[faces]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    flip = ((p[:, 0] - c) * n).sum(1) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def fibonacci_sphere(n_vertices, radii=(1.0, 1.0, 1.0)):
    """Closed genus-0 mesh on n points; has exactly 2n - 4 faces."""
    i = np.arange(n_vertices) + 0.5
    phi = np.arccos(1 - 2 * i / n_vertices)
    theta = math.pi * (1 + 5 ** 0.5) * i
    pts = np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi),
                           np.cos(phi)])
    faces = _oriented_hull(pts)
    return TriMesh(pts * np.asarray(radii), faces)


def icosphere(subdivisions=2, radius=1.0):
    t = (1 + 5 ** 0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9),
             (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2),
             (3, 2, 6), (3, 6, 8), (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10),
             (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriMesh(np.array(verts) * radius, np.array(faces))


def tetrahedron():
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return TriMesh(v, f)


def torus(n_major=4, n_minor=4, R=1.0, r=0.4):
    """Parametric torus; the 4x4 case has V=16, E=48, F=32."""
    verts = []
    for i in range(n_major):
        u = 2 * math.pi * i / n_major
        for j in range(n_minor):
            w = 2 * math.pi * j / n_minor
            verts.append(((R + r * math.cos(w)) * math.cos(u),
                          (R + r * math.cos(w)) * math.sin(u), r * math.sin(w)))
    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a = i * n_minor + j
            b = ((i + 1) % n_major) * n_minor + j
            c = ((i + 1) % n_major) * n_minor + (j + 1) % n_minor
            d = i * n_minor + (j + 1) % n_minor
            faces += [(a, b, c), (a, c, d)]
    return TriMesh(np.array(verts), np.array(faces))


def cube_surface(n=4, size=1.0):
    """Surface of the cube [0, size]^3 with an n x n grid per side."""
    verts = {}
    vlist = []

    def vid(p):
        key = tuple(int(round(x)) for x in p)
        if key not in verts:
            verts[key] = len(vlist)
            vlist.append(key)
        return verts[key]

    faces = []
    # each side: fixed axis, value, and two in-plane axes ordered for outward normal
    sides = [(0, 0, (2, 1)), (0, n, (1, 2)), (1, 0, (0, 2)), (1, n, (2, 0)),
             (2, 0, (1, 0)), (2, n, (0, 1))]
    for axis, val, (ua, va) in sides:
        for i in range(n):
            for j in range(n):
                quad = []
                for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
                    p = [0, 0, 0]
                    p[axis] = val
                    p[ua] = i + di
                    p[va] = j + dj
                    quad.append(vid(p))
                a, b, c, d = quad
                if (i + j) % 2:
                    faces += [(a, b, c), (a, c, d)]
                else:
                    faces += [(a, b, d), (b, c, d)]
    return TriMesh(np.array(vlist, dtype=float) * (size / n), np.array(faces))


def _box_surface_from_voxels(solid, n_sub=1):
    """Boundary surface of a union of unit voxels, each face split n_sub x n_sub."""
    nx, ny, nz = solid.shape
    verts = {}
    vlist = []

    def vid(p):
        key = tuple(p)
        if key not in verts:
            verts[key] = len(vlist)
            vlist.append(key)
        return verts[key]

    def filled(i, j, k):
        if 0 <= i < nx and 0 <= j < ny and 0 <= k < nz:
            return solid[i, j, k]
        return False

    faces = []
    dirs = [((1, 0, 0), 0, (1, 2)), ((-1, 0, 0), 0, (2, 1)), ((0, 1, 0), 1, (2, 0)),
            ((0, -1, 0), 1, (0, 2)), ((0, 0, 1), 2, (0, 1)), ((0, 0, -1), 2, (1, 0))]
    s = n_sub
    for i, j, k in zip(*np.nonzero(solid)):
        for (dx, dy, dz), axis, (ua, va) in dirs:
            if filled(i + dx, j + dy, k + dz):
                continue
            base = [i * s, j * s, k * s]
            if (dx, dy, dz)[axis] > 0:
                base[axis] += s
            for a in range(s):
                for b in range(s):
                    quad = []
                    for da, db in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        p = list(base)
                        p[ua] += a + da
                        p[va] += b + db
                        quad.append(vid(p))
                    q0, q1, q2, q3 = quad
                    if (a + b) % 2:
                        faces += [(q0, q1, q2), (q0, q2, q3)]
                    else:
                        faces += [(q0, q1, q3), (q1, q2, q3)]
    return np.array(vlist, dtype=float) / s, np.array(faces)


def _smooth(verts, faces, iterations, weight=0.5):
    nv = len(verts)
    e = np.vstack([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e = np.unique(np.sort(e, axis=1), axis=0)
    deg = np.bincount(e.ravel(), minlength=nv).astype(float)
    v = verts.copy()
    for _ in range(iterations):
        acc = np.zeros_like(v)
        np.add.at(acc, e[:, 0], v[e[:, 1]])
        np.add.at(acc, e[:, 1], v[e[:, 0]])
        v = (1 - weight) * v + weight * acc / deg[:, None]
    return v


def genus2_block(n_sub=2, smooth=10):
    """Closed genus-2 surface: a slab with two square holes, lightly smoothed."""
    solid = np.ones((5, 3, 1), dtype=bool)
    solid[1, 1, 0] = False
    solid[3, 1, 0] = False
    v, f = _box_surface_from_voxels(solid, n_sub)
    if smooth:
        v = _smooth(v, f, smooth)
    return TriMesh(v, f)


def torus_block(n_sub=2, smooth=10):
    """Closed genus-1 surface: a square ring of voxels, lightly smoothed."""
    solid = np.ones((3, 3, 1), dtype=bool)
    solid[1, 1, 0] = False
    v, f = _box_surface_from_voxels(solid, n_sub)
    if smooth:
        v = _smooth(v, f, smooth)
    return TriMesh(v, f)


def cone_mesh(total_angle=1.5 * math.pi, sectors=12, rings=8, radius=1.0):
    """Open cone whose apex has the given total incident angle.

    Every other vertex is intrinsically flat, so the surface develops
    isometrically onto a planar polygonal sector.  Returns the mesh and the
    per-sector apex angle.
    """
    alpha = total_angle / sectors
    rho = math.sin(alpha / 2) / math.sin(math.pi / sectors)
    if rho >= 1:
        raise ValueError("total angle must be below 2*pi")
    h = math.sqrt(1 - rho * rho)
    verts = [(0.0, 0.0, h * radius)]
    for r in range(1, rings + 1):
        s = radius * r / rings
        for k in range(sectors):
            t = 2 * math.pi * k / sectors
            verts.append((s * rho * math.cos(t), s * rho * math.sin(t), h * radius * (1 - r / rings)))
    faces = []

    def vid(r, k):
        return 1 + (r - 1) * sectors + (k % sectors)

    for k in range(sectors):
        faces.append((0, vid(1, k), vid(1, k + 1)))
    for r in range(1, rings):
        for k in range(sectors):
            a, b = vid(r, k), vid(r, k + 1)
            c, d = vid(r + 1, k + 1), vid(r + 1, k)
            faces += [(a, d, c), (a, c, b)]
    return TriMesh(np.array(verts), np.array(faces)), alpha


def bumped_sphere(n_vertices=3000, height=1.5, width=0.25, direction=(1.0, 0.0, 0.0)):
    """Unit sphere with a tall narrow mountain pushed out along ``direction``."""
    m = fibonacci_sphere(n_vertices)
    v = np.array(m.vertices)
    d = np.asarray(direction, dtype=float)
    d /= np.linalg.norm(d)
    ang = np.arccos(np.clip(v @ d, -1, 1))
    bump = height * np.exp(-(ang / width) ** 2)
    v *= (1 + bump)[:, None]
    return TriMesh(v, m.faces)

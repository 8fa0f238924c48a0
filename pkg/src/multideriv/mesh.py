"""Periodic meshes: uniform 1D intervals and structured 2D triangulations."""
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh1D:
    a: float
    b: float
    n_elements: int

    @property
    def h(self):
        return (self.b - self.a) / self.n_elements

    @property
    def nodes(self):
        return self.a + self.h * np.arange(self.n_elements + 1)

    @property
    def centers(self):
        return self.a + self.h * (np.arange(self.n_elements) + 0.5)

    @property
    def widths(self):
        return np.full(self.n_elements, self.h)

    def right_neighbor(self, k):
        return (k + 1) % self.n_elements

    def left_neighbor(self, k):
        return (k - 1) % self.n_elements

    def to_physical(self, k, xi):
        return self.a + self.h * (k + 0.5 * (np.asarray(xi) + 1.0))

    def locate(self, x):
        """Element index and reference coordinate for physical points."""
        x = np.asarray(x, dtype=float)
        s = (x - self.a) / self.h
        k = np.clip(np.floor(s).astype(int), 0, self.n_elements - 1)
        return k, 2.0 * (s - k) - 1.0


def build_mesh_1d(a, b, n_elements):
    if n_elements < 1:
        raise ValueError(f"need at least one element, got {n_elements}")
    if not b > a:
        raise ValueError(f"empty domain [{a}, {b}]")
    return Mesh1D(float(a), float(b), int(n_elements))


# vertex pairs forming local face f of a triangle (v0, v1, v2)
FACE_VERTICES = ((0, 1), (1, 2), (2, 0))
REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class TriMesh2D:
    """Fully periodic triangulation of [0, L]^2.

    Each edge has a "minus" triangle (the lower index) and a "plus" triangle;
    ``edge_normals`` is the outward normal of the minus side.  Face f of a
    triangle runs from vertex f to vertex (f+1) % 3, counterclockwise.
    """

    L: float
    h: float
    vertices: np.ndarray  # (Nv, 2)
    triangles: np.ndarray  # (Ne, 3), counterclockwise
    edge_elements: np.ndarray = field(repr=False)  # (Nf, 2) minus, plus
    edge_faces: np.ndarray = field(repr=False)  # (Nf, 2) local face in minus, plus
    element_edges: np.ndarray = field(repr=False)  # (Ne, 3)
    face_is_minus: np.ndarray = field(repr=False)  # (Ne, 3) bool

    @property
    def n_elements(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edge_elements)

    @property
    def corners(self):
        """Vertex coordinates per triangle, shape (Ne, 3, 2)."""
        return self.vertices[self.triangles]

    @property
    def jacobians(self):
        """Affine map derivative J with x = v0 + J @ xi, shape (Ne, 2, 2)."""
        c = self.corners
        return np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]], axis=-1)

    @property
    def areas(self):
        J = self.jacobians
        return 0.5 * (J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0])

    def face_normals(self):
        """Outward unit normals and lengths of every local face, (Ne, 3, 2) and (Ne, 3)."""
        c = self.corners
        normals = np.empty((self.n_elements, 3, 2))
        lengths = np.empty((self.n_elements, 3))
        for f, (i, j) in enumerate(FACE_VERTICES):
            t = c[:, j] - c[:, i]
            ln = np.hypot(t[:, 0], t[:, 1])
            normals[:, f, 0] = t[:, 1] / ln
            normals[:, f, 1] = -t[:, 0] / ln
            lengths[:, f] = ln
        return normals, lengths

    @property
    def edge_normals(self):
        normals, _ = self.face_normals()
        return normals[self.edge_elements[:, 0], self.edge_faces[:, 0]]

    def to_physical(self, k, xi, eta):
        J = self.jacobians[k]
        v0 = self.corners[k, 0]
        ref = np.stack(np.broadcast_arrays(xi, eta), axis=-1)
        return v0 + np.einsum("...ij,...j->...i", J, ref)


def _periodic_key(point, L, tol):
    n = int(round(L / tol))
    return tuple(int(round(c / tol)) % n for c in point)


def _connect(vertices, triangles, L, h):
    tol = 1e-10 * L
    c = vertices[triangles]
    edge_of = {}
    edge_elements = []
    edge_faces = []
    element_edges = np.empty((len(triangles), 3), dtype=int)
    face_is_minus = np.zeros((len(triangles), 3), dtype=bool)
    for k in range(len(triangles)):
        for f, (i, j) in enumerate(FACE_VERTICES):
            key = _periodic_key(0.5 * (c[k, i] + c[k, j]), L, tol)
            e = edge_of.get(key)
            if e is None:
                e = len(edge_elements)
                edge_of[key] = e
                edge_elements.append([k, -1])
                edge_faces.append([f, -1])
                face_is_minus[k, f] = True
            else:
                if edge_elements[e][1] != -1:
                    raise ValueError("edge shared by more than two triangles")
                edge_elements[e][1] = k
                edge_faces[e][1] = f
            element_edges[k, f] = e
    edge_elements = np.array(edge_elements, dtype=int)
    if (edge_elements[:, 1] < 0).any():
        raise ValueError("mesh is not closed under periodic identification")
    return TriMesh2D(
        L=float(L),
        h=float(h),
        vertices=vertices,
        triangles=triangles,
        edge_elements=edge_elements,
        edge_faces=np.array(edge_faces, dtype=int),
        element_edges=element_edges,
        face_is_minus=face_is_minus,
    )


def build_tri_mesh(L, n):
    """[0, L]^2 cut into n x n squares, each split along its rising diagonal."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    g = np.linspace(0.0, L, n + 1)
    X, Y = np.meshgrid(g, g, indexing="ij")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (n + 1) + j

    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append([a, b, c])
            tris.append([a, c, d])
    return _connect(vertices, np.array(tris, dtype=int), L, L / n)


def refine(mesh):
    """Uniform red refinement: every triangle splits into four."""
    verts = [tuple(v) for v in mesh.vertices]
    index = {v: i for i, v in enumerate(verts)}

    def vertex(p):
        key = (float(p[0]), float(p[1]))
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    tris = []
    for a, b, c in mesh.triangles:
        pa, pb, pc = mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]
        ab = vertex(0.5 * (pa + pb))
        bc = vertex(0.5 * (pb + pc))
        ca = vertex(0.5 * (pc + pa))
        tris += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
    return _connect(np.array(verts), np.array(tris, dtype=int), mesh.L, 0.5 * mesh.h)


def export_mesh(mesh, vertices_path, triangles_path):
    """Write whitespace-separated vertex and triangle lists, one per line."""
    np.savetxt(vertices_path, mesh.vertices, fmt="%.17g")
    np.savetxt(triangles_path, mesh.triangles, fmt="%d")

"""Conforming triangulations of the unit square and their refinements.

Triangles are stored counterclockwise. Local edge ``i`` of a triangle is
the edge opposite local vertex ``i``. Every edge carries a fixed global
orientation: the tangent points from the lower to the higher vertex index
and the normal is the tangent rotated by +90 degrees.
"""
from dataclasses import dataclass

import numpy as np


class MeshError(ValueError):
    """Raised for invalid meshes or invalid refinement requests."""


class Triangulation:
    """Conforming simplicial mesh with precomputed topology and geometry.

    Parameters
    ----------
    vertices : array_like, shape (nv, 2)
    triangles : array_like, shape (nt, 3)
        Counterclockwise vertex indices.
    refedge : array_like of int, shape (nt,), optional
        Local index of the refinement edge of each triangle, used by
        newest vertex bisection.
    parent : array_like of int, shape (nt,), optional
        Index of the parent triangle in the mesh this one was refined from.
    """

    def __init__(self, vertices, triangles, refedge=None, parent=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise MeshError("triangles must have shape (nt, 3)")
        if not np.all(np.isfinite(self.vertices)):
            raise MeshError("vertex coordinates must be finite")
        if self.triangles.size and (self.triangles.min() < 0
                                    or self.triangles.max() >= len(self.vertices)):
            raise MeshError("triangle vertex index out of range")
        self.refedge = None if refedge is None else np.asarray(refedge, dtype=np.int64)
        self.parent = None if parent is None else np.asarray(parent, dtype=np.int64)

        self._build_geometry()
        self._build_topology()
        for arr in vars(self).values():
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)

    # -- construction helpers -------------------------------------------------

    def _build_geometry(self):
        v = self.vertices[self.triangles]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        area = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(area <= 0.0):
            raise MeshError("triangles must be counterclockwise with positive area")
        self.areas = area
        self.barycentres = v.mean(axis=1)
        # local edge i runs from vertex i+1 to vertex i+2
        d = v[:, [2, 0, 1]] - v[:, [1, 2, 0]]
        lengths = np.linalg.norm(d, axis=2)
        self.local_edge_lengths = lengths
        self.diameters = lengths.max(axis=1)
        self.outward_normals = np.stack([d[..., 1], -d[..., 0]], axis=2) / lengths[..., None]
        # barycentric gradients: grad lambda_i = -|F_i| n_i / (2 |K|)
        self.grad_lambda = -lengths[..., None] * self.outward_normals / (2.0 * area[:, None, None])

    def _build_topology(self):
        t = self.triangles
        nt = len(t)
        local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
        key = np.sort(local, axis=1)
        edges, inverse = np.unique(key, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        self.edges = edges
        self.tri_edges = inverse.reshape(nt, 3)

        ne = len(edges)
        tri_of = np.repeat(np.arange(nt), 3)
        loc_of = np.tile(np.arange(3), nt)
        order = np.lexsort((tri_of, inverse))
        counts = np.bincount(inverse, minlength=ne)
        if np.any(counts > 2):
            raise MeshError("an edge is shared by more than two triangles")
        start = np.concatenate([[0], np.cumsum(counts)[:-1]])
        edge_tris = -np.ones((ne, 2), dtype=np.int64)
        edge_loc = -np.ones((ne, 2), dtype=np.int64)
        first = order[start]
        edge_tris[:, 0] = tri_of[first]
        edge_loc[:, 0] = loc_of[first]
        two = counts == 2
        second = order[start[two] + 1]
        edge_tris[two, 1] = tri_of[second]
        edge_loc[two, 1] = loc_of[second]
        self.edge_tris = edge_tris
        self.edge_local = edge_loc
        self.boundary_edges = ~two
        self.interior_edges = np.flatnonzero(two)

        pts = self.vertices[edges]
        tangent = pts[:, 1] - pts[:, 0]
        self.edge_lengths = np.linalg.norm(tangent, axis=1)
        self.edge_tangents = tangent / self.edge_lengths[:, None]
        self.edge_normals = np.column_stack([-self.edge_tangents[:, 1], self.edge_tangents[:, 0]])
        self.edge_midpoints = pts.mean(axis=1)

        bnd = np.zeros(len(self.vertices), dtype=bool)
        bnd[edges[self.boundary_edges].ravel()] = True
        self.boundary_vertices = bnd
        self.interior_vertices = np.flatnonzero(~bnd)

    # -- convenience ------------------------------------------------------------

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    def edge_sign(self):
        """Return n_F . n_K for every (triangle, local edge) pair, shape (nt, 3)."""
        nf = self.edge_normals[self.tri_edges]
        return np.rint(np.einsum("tij,tij->ti", nf, self.outward_normals)).astype(np.int64)

    def vertex_triangles(self):
        """CSR-style map vertex -> adjacent triangles, as (offsets, indices).

        Triangles adjacent to a vertex are listed in increasing index order.
        """
        t = self.triangles.ravel()
        tri = np.repeat(np.arange(self.n_triangles), 3)
        order = np.lexsort((tri, t))
        counts = np.bincount(t, minlength=self.n_vertices)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return offsets, tri[order]

    def contains(self, k, points, tol=1e-12):
        """True where ``points`` lie in triangle ``k`` (up to ``tol``)."""
        lam = self.barycentric(k, points)
        return np.all(lam >= -tol, axis=-1)

    def barycentric(self, k, points):
        """Barycentric coordinates of ``points`` (shape (..., 2)) in triangle ``k``."""
        points = np.asarray(points, dtype=float)
        g = self.grad_lambda[k]
        a = self.vertices[self.triangles[k]]
        lam = (points[..., None, :] - a[None, :, :].reshape((1,) * (points.ndim - 1) + (3, 2)))
        # lambda_i(x) = 1 + grad lambda_i . (x - a_i)
        return 1.0 + np.einsum("...ij,ij->...i", lam, g)


@dataclass(frozen=True)
class BarycentricMesh:
    """Barycentric (Alfeld) refinement of a triangulation.

    Sub-triangle ``3*K + i`` of ``fine`` is ``(a_{i+1}, a_{i+2}, b_K)``,
    where ``a_j`` are the vertices of macro triangle ``K`` and ``b_K`` its
    barycentre. It contains macro edge ``i`` of ``K``.
    """

    coarse: Triangulation
    fine: Triangulation
    barycentre_vertex: np.ndarray  # (nt,) vertex index of b_K in fine
    macro_of_micro: np.ndarray      # (3 nt,)

    @property
    def micro_of_macro(self):
        return np.arange(3 * self.coarse.n_triangles).reshape(-1, 3)


@dataclass(frozen=True)
class MeshStats:
    n_triangles: int
    n_interior_edges: int
    n_boundary_edges: int
    h_max: float
    shape_parameter: float


def build_uniform_mesh(n):
    """Unit square split into 2^n x 2^n squares, each cut along x1 = x2."""
    if n < 0:
        raise MeshError("n must be nonnegative")
    return _structured(2 ** n, 2 ** n)


def build_anisotropic_mesh(n, m):
    """Unit square split into (m 2^n) x 2^n rectangles, cut parallel to x2 = m x1."""
    if n < 0 or m < 1:
        raise MeshError("need n >= 0 and m >= 1")
    return _structured(m * 2 ** n, 2 ** n)


def _structured(nx, ny):
    x = np.arange(nx + 1) / nx
    y = np.arange(ny + 1) / ny
    X, Y = np.meshgrid(x, y)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i = i.ravel()
    j = j.ravel()
    ll = j * (nx + 1) + i
    lr = ll + 1
    ul = ll + nx + 1
    ur = ul + 1
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    # upper first: the smallest-index neighbour of an interior vertex is then
    # the upper triangle of the cell to its lower left, whose angle at the
    # vertex is not the small one on stretched cells
    triangles = np.stack([upper, lower], axis=1).reshape(-1, 3)
    return Triangulation(vertices, triangles)


def build_crossed_initial():
    """Four triangles from the diagonals of the unit square.

    The centre is the newest vertex of every triangle, so all refinement
    edges lie on the boundary.
    """
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]])
    triangles = np.array([[4, 0, 1], [4, 1, 2], [4, 2, 3], [4, 3, 0]])
    return Triangulation(vertices, triangles, refedge=np.zeros(4, dtype=np.int64))


def _bisect_once(T):
    t = T.triangles
    nt = len(t)
    r = T.refedge
    rows = np.arange(nt)[:, None]
    perm = (r[:, None] + np.arange(3)[None, :]) % 3
    tr = t[rows, perm]
    ref = T.tri_edges[np.arange(nt), r]

    # a refinement edge must be the refinement edge of both neighbours
    hits = np.bincount(ref, minlength=T.n_edges)
    interior = ~T.boundary_edges[ref]
    if np.any(hits[ref][interior] != 2):
        raise MeshError("refinement edges are not compatible; global bisection would leave hanging nodes")

    uniq, new_id = np.unique(ref, return_inverse=True)
    mids = T.edge_midpoints[uniq]
    m = T.n_vertices + new_id.ravel()
    c1 = np.column_stack([m, tr[:, 0], tr[:, 1]])
    c2 = np.column_stack([m, tr[:, 2], tr[:, 0]])
    children = np.stack([c1, c2], axis=1).reshape(-1, 3)
    vertices = np.vstack([T.vertices, mids])
    parent = np.repeat(np.arange(nt), 2)
    return Triangulation(vertices, children, refedge=np.zeros(2 * nt, dtype=np.int64), parent=parent)


def refine_nvb_global(T, rounds=1):
    """Bisect every triangle ``rounds`` times by newest vertex bisection.

    The returned mesh records in ``parent`` the index of the ancestor
    triangle in ``T``.
    """
    if T.refedge is None:
        raise MeshError("mesh carries no refinement-edge markers")
    if rounds < 1:
        raise MeshError("rounds must be positive")
    parent = None
    cur = T
    for _ in range(rounds):
        cur = _bisect_once(cur)
        parent = cur.parent if parent is None else parent[cur.parent]
    return Triangulation(cur.vertices, cur.triangles, refedge=cur.refedge, parent=parent)


def barycentric_refine(T):
    """Split each triangle into three by joining its vertices to its barycentre."""
    nt = T.n_triangles
    nv = T.n_vertices
    b = nv + np.arange(nt)
    t = T.triangles
    subs = np.stack([np.column_stack([t[:, (i + 1) % 3], t[:, (i + 2) % 3], b]) for i in range(3)],
                    axis=1).reshape(-1, 3)
    vertices = np.vstack([T.vertices, T.barycentres])
    macro = np.repeat(np.arange(nt), 3)
    fine = Triangulation(vertices, subs, parent=macro)
    return BarycentricMesh(T, fine, b, macro)


def mesh_stats(T):
    """Element and edge counts, maximal diameter and shape parameter."""
    perimeter = T.local_edge_lengths.sum(axis=1)
    inradius = 2.0 * T.areas / perimeter
    nb = int(T.boundary_edges.sum())
    return MeshStats(
        n_triangles=T.n_triangles,
        n_interior_edges=T.n_edges - nb,
        n_boundary_edges=nb,
        h_max=float(T.diameters.max()),
        shape_parameter=float(np.max(T.diameters / inradius)),
    )


def save_mesh(T, path):
    """Write ``T`` in the plain-text mesh format."""
    with open(path, "w") as fh:
        fh.write(f"vertices {T.n_vertices} triangles {T.n_triangles}\n")
        for x1, x2 in T.vertices:
            fh.write(f"{x1:.17g} {x2:.17g}\n")
        for k, (i, j, l) in enumerate(T.triangles):
            if T.refedge is None:
                fh.write(f"{i} {j} {l}\n")
            else:
                fh.write(f"{i} {j} {l} {T.refedge[k]}\n")


def load_mesh(path):
    """Read a mesh written by :func:`save_mesh`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "vertices" or header[2] != "triangles":
            raise MeshError("malformed mesh header")
        nv, nt = int(header[1]), int(header[3])
        vertices = np.array([[float(s) for s in fh.readline().split()] for _ in range(nv)])
        rows = [[int(s) for s in fh.readline().split()] for _ in range(nt)]
    lengths = {len(r) for r in rows}
    if lengths == {3}:
        return Triangulation(vertices, np.array(rows))
    if lengths == {4}:
        rows = np.array(rows)
        return Triangulation(vertices, rows[:, :3], refedge=rows[:, 3])
    raise MeshError("triangle lines must all have 3 or all have 4 entries")

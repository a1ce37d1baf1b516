"""Smoothing operator mapping Crouzeix-Raviart fields to H^1_0 fields.

The operator is ``E v = C v - sum_K S_K(div C v - div_T v)`` with

* ``A``: simplified averaging onto continuous affine fields, taking at each
  interior vertex ``z`` the value of ``v`` from a fixed element ``K_z``;
* ``B``: edge bubbles weighted by the face moments;
* ``C v = A v + B(v - A v)``, which preserves all face moments;
* ``S_K``: the velocity of a local Scott-Vogelius Stokes problem on the
  barycentric refinement of ``K``, a right inverse of the divergence with
  zero trace on the boundary of ``K``.

``A``, ``B`` and ``C`` are sparse matrices acting componentwise; the
divergences and the local solves are applied element by element, and the
full sparse matrix of ``E`` is built only on request.
"""
import numpy as np
import scipy.sparse as sp

from .fespace import (MACRO_INTERIOR_NODES, MACRO_NODE_LAMBDA, SUB_NODES, CrSpace, P2Space,
                      p2_shape, p2_shape_grad)
from .mesh import barycentric_refine
from .quadrature import quad_rule

SK_REALIZATIONS = ("direct", "piola")
# gradients of the quadratic shape functions at the vertices:
# grad phi_n(vertex j) = sum_l _VERTEX_GRAD[j, n, l] grad lambda_l
_VERTEX_GRAD = p2_shape_grad(np.eye(3), np.eye(3))
_CHUNK = 20000


class LocalSolveError(ValueError):
    """Raised for inadmissible data of a local Stokes problem."""


# ---------------------------------------------------------------------------
# local Scott-Vogelius problems on the barycentric refinement of a triangle


def _sub_geometry(corners):
    """Corners (n, 3, 3, 2) of the three sub-triangles of each macro triangle."""
    b = corners.mean(axis=1)
    subs = np.stack([np.stack([corners[:, (i + 1) % 3], corners[:, (i + 2) % 3], b], axis=1)
                     for i in range(3)], axis=1)
    return subs


def _barycentric_gradients(tri):
    """Barycentric gradients and areas of triangles with corners (..., 3, 2)."""
    d = tri[..., [2, 0, 1], :] - tri[..., [1, 2, 0], :]
    area = 0.5 * (d[..., 2, 0] * -d[..., 1, 1] + d[..., 2, 1] * d[..., 1, 0])
    # grad lambda_i = rot(edge opposite i) / (2 |K|), edge taken counterclockwise
    g = np.stack([-d[..., 1], d[..., 0]], axis=-1) / (2.0 * area[..., None, None])
    return g, area


def local_stokes_blocks(corners):
    """Matrices of the local Stokes problems on triangles ``corners`` (n, 3, 2).

    Velocity unknowns are the values at the four interior nodes (macro nodes
    3, 7, 8, 9), interleaved by component. Pressures are piecewise affine on
    the three sub-triangles, given by their values at the sub-triangle
    vertices (index ``3 i + m`` for vertex ``m`` of sub-triangle ``i``).

    Returns
    -------
    lap : (n, 8, 8) vector Laplacian
    div : (n, 9, 8) ``int q_a div(phi_j)``
    mass : (n, 9, 9) pressure mass matrix
    mean : (n, 9) ``int q_a``
    """
    corners = np.asarray(corners, dtype=float)
    n = len(corners)
    subs = _sub_geometry(corners)
    glam, area = _barycentric_gradients(subs)  # (n, 3, 3, 2), (n, 3)
    if np.any(area <= 0):
        raise LocalSolveError("degenerate or clockwise macro triangle")
    rule = quad_rule("triangle", 2)
    xh = rule.points
    lam = np.column_stack([1.0 - xh.sum(axis=1), xh])  # (q, 3)
    w = rule.weights * 2.0  # weights for unit-area reference, scaled by area below
    dphi = p2_shape_grad(lam[None, None], glam)  # (n, 3, q, 6, 2)

    # local sub-node -> interior velocity node number (0..3) or -1
    pos = {3: 0, 7: 1, 8: 2, 9: 3}
    vel_index = np.array([[pos.get(int(m), -1) for m in row] for row in SUB_NODES])

    lap_s = np.zeros((n, 4, 4))
    div = np.zeros((n, 9, 8))
    for i in range(3):
        sel = np.flatnonzero(vel_index[i] >= 0)
        vi = vel_index[i, sel]
        dp = dphi[:, i][:, :, sel, :]  # (n, q, s, 2)
        wa = area[:, i, None] * w[None]  # (n, q)
        k = np.einsum("nq,nqaj,nqbj->nab", wa, dp, dp)
        lap_s[:, vi[:, None], vi[None, :]] += k
        # int lambda_m d_c phi_b
        d = np.einsum("nq,qm,nqbc->nmbc", wa, lam, dp)  # (n, 3, s, 2)
        for bi, v in enumerate(vi):
            for c in range(2):
                div[:, 3 * i:3 * i + 3, 2 * v + c] += d[:, :, bi, c]
    lap = np.zeros((n, 8, 8))
    lap[:, 0::2, 0::2] = lap_s
    lap[:, 1::2, 1::2] = lap_s
    mass = np.zeros((n, 9, 9))
    local_mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
    for i in range(3):
        mass[:, 3 * i:3 * i + 3, 3 * i:3 * i + 3] = area[:, i, None, None] * local_mass
    mean = np.repeat(area / 3.0, 3, axis=1)
    return lap, div, mass, mean


def _saddle(lap, div, mass, mean):
    n = len(lap)
    K = np.zeros((n, 18, 18))
    K[:, :8, :8] = lap
    K[:, :8, 8:17] = -np.swapaxes(div, 1, 2)
    K[:, 8:17, :8] = -div
    K[:, 8:17, 17] = -mean
    K[:, 17, 8:17] = -mean
    rhs = np.zeros((n, 18, 9))
    rhs[:, 8:17, :] = -mass
    return K, rhs


def local_solution_matrices(corners, realization="direct"):
    """Linear maps ``r -> S_K r`` for triangles ``corners`` (n, 3, 2), shape (n, 8, 9).

    ``"direct"`` solves the local saddle-point problem on every triangle;
    ``"piola"`` solves it once on the reference triangle and pushes the
    result forward with the contravariant Piola map.
    """
    corners = np.asarray(corners, dtype=float)
    if realization == "piola":
        return _piola(corners)
    if realization != "direct":
        raise ValueError(f"unknown S_K realization {realization!r}")
    out = np.empty((len(corners), 8, 9))
    for s in range(0, len(corners), _CHUNK):
        c = corners[s:s + _CHUNK]
        K, rhs = _saddle(*local_stokes_blocks(c))
        out[s:s + _CHUNK] = np.linalg.solve(K, rhs)[:, :8, :]
    return out


REFERENCE_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


class LocalSolveCache:
    """Reference solutions of the local Stokes problem for a basis of loads."""

    def __init__(self):
        K, rhs = _saddle(*local_stokes_blocks(REFERENCE_TRIANGLE[None]))
        sol = np.linalg.solve(K[0], rhs[0])
        self.reference = sol[:8]
        self.reference.setflags(write=False)

    def push_forward(self, corners):
        """Apply the contravariant Piola map to the reference solutions."""
        J = np.stack([corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0]], axis=2)
        # rhat = det J * (r o F); u = J uhat o F^{-1} / det J, so det J cancels
        ref = self.reference.reshape(4, 2, 9)
        return np.einsum("ncd,jdr->njcr", J, ref).reshape(len(corners), 8, 9)


_CACHE = None


def _piola(corners):
    global _CACHE
    if _CACHE is None:
        _CACHE = LocalSolveCache()
    return _CACHE.push_forward(corners)


def local_stokes_solve(corners, r, realization="direct", rtol=1e-10):
    """Solve the local Stokes problem on one triangle.

    Parameters
    ----------
    corners : (3, 2) counterclockwise vertices of ``K``
    r : (9,) values of a mean-zero piecewise affine function on the
        barycentric refinement of ``K`` (``3 i + m`` = vertex ``m`` of
        sub-triangle ``i``)

    Returns
    -------
    (8,) velocity values at the interior nodes (barycentre, then the
    midpoints of the segments from vertex 0, 1, 2 to the barycentre),
    interleaved by component.
    """
    corners = np.asarray(corners, dtype=float)[None]
    r = np.asarray(r, dtype=float)
    _, _, mass, mean = local_stokes_blocks(corners)
    area = mean[0].sum()
    norm = np.sqrt(r @ mass[0] @ r)
    # |int r| <= ||r|| |K|^(1/2)
    if abs(mean[0] @ r) > rtol * norm * np.sqrt(area):
        raise LocalSolveError("local load must have zero mean")
    return local_solution_matrices(corners, realization)[0] @ r


def local_divergence(corners):
    """Map from interior-node velocities (8,) to the divergence values (9,)."""
    corners = np.asarray(corners, dtype=float)
    subs = _sub_geometry(corners)
    glam, _ = _barycentric_gradients(subs)
    dphi = p2_shape_grad(np.eye(3)[None, None], glam)  # (n, 3, 3, 6, 2)
    pos = {3: 0, 7: 1, 8: 2, 9: 3}
    out = np.zeros((len(corners), 9, 8))
    for i in range(3):
        for ln, m in enumerate(SUB_NODES[i]):
            v = pos.get(int(m))
            if v is None:
                continue
            for c in range(2):
                out[:, 3 * i:3 * i + 3, 2 * v + c] += dphi[:, i, :, ln, c]
    return out


def sk_stability_constant(corners, realization="direct"):
    """Best constant ``c`` in ``||grad S_K r|| <= c ||r||`` over mean-zero ``r``."""
    corners = np.asarray(corners, dtype=float)[None]
    lap, _, mass, mean = local_stokes_blocks(corners)
    S = local_solution_matrices(corners, realization)[0]
    # orthonormal basis of the mean-zero loads
    Q = np.linalg.svd(mean[0][None, :])[2][1:].T
    H = Q.T @ S.T @ lap[0] @ S @ Q
    Mq = Q.T @ mass[0] @ Q
    L = np.linalg.cholesky(Mq)
    Li = np.linalg.inv(L)
    return float(np.sqrt(np.linalg.eigvalsh(Li @ H @ Li.T).max()))


# ---------------------------------------------------------------------------
# global operators


def _owner(macro_nodes):
    """For every node, the first (element, local node) pair that refers to it."""
    flat = macro_nodes.ravel()
    nodes, first = np.unique(flat, return_index=True)
    return nodes, first // macro_nodes.shape[1], first % macro_nodes.shape[1]


def choose_vertex_elements(mesh):
    """For each vertex, the adjacent triangle of smallest index."""
    offsets, tris = mesh.vertex_triangles()
    return tris[offsets[:-1]]


class Smoother:
    """Sparse realization of the smoothing operator ``E`` and its parts.

    Parameters
    ----------
    mesh : Triangulation
    realization : {"direct", "piola"}
        How the local Stokes solves are computed.
    vertex_elements : ndarray, optional
        The element ``K_z`` for every vertex; defaults to the adjacent
        triangle of smallest index.
    """

    def __init__(self, mesh, realization="direct", vertex_elements=None, bary=None,
                 cr=None, p2=None):
        if realization not in SK_REALIZATIONS:
            raise ValueError(f"unknown S_K realization {realization!r}")
        self.mesh = mesh
        self.realization = realization
        self.bary = bary if bary is not None else barycentric_refine(mesh)
        self.cr = cr if cr is not None else CrSpace(mesh)
        self.p2 = p2 if p2 is not None else P2Space(self.bary)
        if vertex_elements is None:
            vertex_elements = choose_vertex_elements(mesh)
        self.vertex_elements = np.asarray(vertex_elements)
        self._build()
        self._matrix = None

    def _build(self):
        mesh, cr, p2 = self.mesh, self.cr, self.p2
        nt = mesh.n_triangles
        nv = mesh.n_vertices
        nf = cr.n_edges
        nn = p2.n_nodes

        # A: CR coefficients -> values at the interior coarse vertices
        z = mesh.interior_vertices
        Kz = self.vertex_elements[z]
        if not np.all(np.any(mesh.triangles[Kz] == z[:, None], axis=1)):
            raise ValueError("K_z must contain z")
        j = np.argmax(mesh.triangles[Kz] == z[:, None], axis=1)
        rows, cols, vals = [], [], []
        for i in range(3):
            f = cr.local_index[Kz, i]
            ok = f >= 0
            s = np.where(j == i, -1.0, 1.0) / mesh.local_edge_lengths[Kz, i]
            rows.append(z[ok])
            cols.append(f[ok])
            vals.append(s[ok])
        self.A_vertex = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                      shape=(nv, nf))

        # affine interpolation from coarse vertex values to all quadratic nodes
        nodes, own_K, own_l = _owner(p2.macro_nodes)
        rows = np.repeat(nodes, 3)
        cols = mesh.triangles[own_K].ravel()
        vals = MACRO_NODE_LAMBDA[own_l].ravel()
        keep = vals != 0
        P1 = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(nn, nv))

        # edge bubbles at the quadratic nodes
        owner_elem = np.full(nn, -1)
        owner_elem[nodes] = own_K
        rows, cols, vals = [], [], []
        for i in range(3):
            f = cr.local_index[:, i]
            a, b = (i + 1) % 3, (i + 2) % 3
            psi = 6.0 * MACRO_NODE_LAMBDA[:, a] * MACRO_NODE_LAMBDA[:, b]  # (10,)
            for l in np.flatnonzero(psi):
                g = p2.macro_nodes[:, l]
                ok = (f >= 0) & (owner_elem[g] == np.arange(nt))
                rows.append(g[ok])
                cols.append(f[ok])
                vals.append(psi[l] / mesh.local_edge_lengths[ok, i])
        Psi = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(nn, nf))

        # face moments of continuous affine fields from their vertex values
        e = mesh.edges[cr.edges]
        half = 0.5 * mesh.edge_lengths[cr.edges]
        Mom = sp.csr_matrix((np.concatenate([half, half]),
                             (np.tile(np.arange(nf), 2), np.concatenate([e[:, 0], e[:, 1]]))),
                            shape=(nf, nv))

        self.P1 = P1.tocsr()
        self.Psi = Psi
        self.Mom = Mom
        A = P1 @ self.A_vertex
        C = A + Psi @ (sp.identity(nf, format="csr") - Mom @ self.A_vertex)
        self.A_scalar = A.tocsr()
        self.C_scalar = C.tocsr()

        self.local = local_solution_matrices(mesh.vertices[mesh.triangles], self.realization)
        vel_nodes = p2.macro_nodes[:, MACRO_INTERIOR_NODES]  # (nt, 4)
        self._vel_dofs = (2 * vel_nodes[:, :, None] + np.arange(2)).reshape(nt, 8)
        self._interior_dofs = (2 * p2.interior_nodes[:, None] + np.arange(2)).ravel()

    # -- elementwise pieces ---------------------------------------------------

    def _div_micro(self, full):
        """Divergence of a quadratic field (nn, 2) at the 9 slots of each element."""
        glam = self.bary.fine.grad_lambda  # (3nt, 3, 2)
        vals = full[self.p2.micro_nodes]  # (3nt, 6, 2)
        w = np.einsum("tlc,tnc->tln", glam, vals)
        return np.einsum("jnl,tln->tj", _VERTEX_GRAD, w).reshape(-1, 9)

    def _div_micro_T(self, y):
        """Transpose of :meth:`_div_micro`, returns (nn, 2)."""
        glam = self.bary.fine.grad_lambda
        z = np.einsum("tj,jnl->tnl", y.reshape(-1, 3), _VERTEX_GRAD)
        contrib = np.einsum("tnl,tlc->tnc", z, glam)
        idx = self.p2.micro_nodes.ravel()
        nn = self.p2.n_nodes
        return np.column_stack([np.bincount(idx, weights=contrib[..., c].ravel(), minlength=nn)
                                for c in range(2)])

    def _div_cr(self, v):
        """Elementwise divergence of a CR field, shape (nt,)."""
        cr = self.cr
        vv = np.asarray(v, dtype=float).reshape(-1, 2)
        idx = cr.local_index
        vals = np.where((idx >= 0)[..., None], vv[np.maximum(idx, 0)], 0.0)
        return np.einsum("tic,tic->t", cr.local_grads, vals)

    def _div_cr_T(self, s):
        cr = self.cr
        contrib = cr.local_grads * np.asarray(s)[:, None, None]
        idx = cr.local_index
        ok = idx >= 0
        return np.column_stack([np.bincount(idx[ok], weights=contrib[..., c][ok], minlength=cr.n_edges)
                                for c in range(2)]).ravel()

    def _C_full(self, v):
        v = np.asarray(v, dtype=float).reshape(-1, 2)
        return np.column_stack([self.C_scalar @ v[:, 0], self.C_scalar @ v[:, 1]])

    def _C_full_T(self, full):
        return np.column_stack([self.C_scalar.T @ full[:, 0], self.C_scalar.T @ full[:, 1]]).ravel()

    # -- application ----------------------------------------------------------

    def _to_coeffs(self, full):
        return np.asarray(full).ravel()[self._interior_dofs]

    def averaging_apply(self, v):
        """Coefficients of ``A v`` in the quadratic space."""
        return self._to_coeffs(_vec(self.A_scalar, v))

    def bubble_apply(self, v):
        """Coefficients of ``B v`` (face moments of ``v`` are its coefficients)."""
        return self._to_coeffs(_vec(self.Psi, v))

    def C_apply(self, v):
        return self._to_coeffs(self._C_full(v))

    def correction_load(self, v):
        """Local loads ``div C v - div_T v`` at the 9 slots of each element, shape (nt, 9)."""
        return self._div_micro(self._C_full(v)) - self._div_cr(v)[:, None]

    def apply_nodal(self, v):
        """Nodal values (n_nodes, 2) of ``E v``, boundary nodes included."""
        full = self._C_full(v)
        r = self._div_micro(full) - self._div_cr(v)[:, None]
        full = full.ravel()
        # interior nodes of distinct elements are distinct, so plain indexing is safe
        full[self._vel_dofs] -= np.einsum("tar,tr->ta", self.local, r)
        return full.reshape(-1, 2)

    def apply(self, v):
        """Coefficients of ``E v`` in the quadratic space."""
        return self._to_coeffs(self.apply_nodal(v))

    def load(self, fvec):
        """``int f . E v^i`` for all CR dofs from the quadratic load vector ``fvec``."""
        full = np.zeros(2 * self.p2.n_nodes)
        full[self._interior_dofs] = fvec
        y = np.einsum("tar,ta->tr", self.local, full[self._vel_dofs])
        corr = self._div_micro_T(y)
        return self._C_full_T(full.reshape(-1, 2) - corr) + self._div_cr_T(y.sum(axis=1))

    # -- explicit sparse matrices -------------------------------------------

    @property
    def C(self):
        return sp.kron(self.C_scalar, sp.identity(2), format="csr")

    def _Dm(self):
        fine = self.bary.fine
        nt = self.mesh.n_triangles
        dphi = np.einsum("jnl,tlc->tjnc", _VERTEX_GRAD, fine.grad_lambda)
        micro = np.arange(3 * nt)
        rows = np.broadcast_to((3 * micro)[:, None, None, None] + np.arange(3)[None, :, None, None],
                               dphi.shape)
        cols = 2 * self.p2.micro_nodes[:, None, :, None] + np.arange(2)[None, None, None, :]
        cols = np.broadcast_to(cols, dphi.shape)
        return sp.csr_matrix((dphi.ravel(), (rows.ravel(), cols.ravel())),
                             shape=(9 * nt, 2 * self.p2.n_nodes))

    def _Dt(self):
        cr = self.cr
        nt = self.mesh.n_triangles
        rows, cols, vals = [], [], []
        for i in range(3):
            f = cr.local_index[:, i]
            ok = np.flatnonzero(f >= 0)
            for c in range(2):
                for s in range(9):
                    rows.append(9 * ok + s)
                    cols.append(2 * f[ok] + c)
                    vals.append(cr.local_grads[ok, i, c])
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(9 * nt, cr.dim))

    def _S(self):
        nt = self.mesh.n_triangles
        rows = np.broadcast_to(self._vel_dofs[:, :, None], (nt, 8, 9))
        cols = np.broadcast_to((9 * np.arange(nt))[:, None, None] + np.arange(9), (nt, 8, 9))
        return sp.csr_matrix((self.local.ravel(), (rows.ravel(), cols.ravel())),
                             shape=(2 * self.p2.n_nodes, 9 * nt))

    def operator(self):
        """Sparse map CR coefficients -> quadratic coefficients (interior dofs)."""
        C = self.C
        E = C - self._S() @ (self._Dm() @ C - self._Dt())
        return E.tocsr()[self._interior_dofs]

    @property
    def matrix(self):
        """The smoother matrix with rows indexed by CR dofs and columns by quadratic dofs."""
        if self._matrix is None:
            E = self.operator().T.tocsr()
            E.eliminate_zeros()
            self._matrix = E
        return self._matrix


def _vec(scalar, v):
    v = np.asarray(v, dtype=float).reshape(-1, 2)
    return np.column_stack([scalar @ v[:, 0], scalar @ v[:, 1]]).ravel()


def assemble_E_matrix(mesh, realization="direct", **kw):
    """Build the smoother for ``mesh`` and return its sparse matrix."""
    return Smoother(mesh, realization=realization, **kw).matrix


def averaging_apply(smoother, v):
    return smoother.averaging_apply(v)


def bubble_apply(smoother, v):
    return smoother.bubble_apply(v)


def smoother_C_apply(smoother, v):
    return smoother.C_apply(v)


def smoother_E_apply(smoother, v):
    return smoother.apply(v)

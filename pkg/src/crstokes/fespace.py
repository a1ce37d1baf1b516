"""Degrees of freedom and evaluation for the discrete spaces.

* :class:`CrSpace` -- vector Crouzeix-Raviart fields on ``T``. The scalar
  basis function of edge ``F`` is ``phi_F = (1 - 2 lambda_c) / |F|`` on each
  adjacent triangle, ``c`` being the vertex opposite ``F``; hence
  ``int_F' phi_F = delta_FF'``. Vector dofs are interleaved: dof ``2 f + k``
  is component ``k`` of interior edge number ``f``.
* :class:`P2Space` -- continuous piecewise quadratics on the barycentric
  refinement, zero on the boundary. Nodes are the vertices and edge
  midpoints of the fine mesh; vector dofs are ``2 j + k`` over interior
  node ``j``.
* :class:`P0Space` -- elementwise constants on ``T``.
"""
import numpy as np

from .mesh import MeshError
from .quadrature import quad_rule

# Local numbering of the 10 quadratic nodes of a macro element K:
#   0, 1, 2  macro vertices a_0, a_1, a_2
#   3        barycentre b
#   4, 5, 6  midpoints of macro edges (edge i is opposite a_i)
#   7, 8, 9  midpoints of the segments a_i -- b
# Barycentric coordinates (w.r.t. K) of these nodes:
MACRO_NODE_LAMBDA = np.array([
    [1, 0, 0], [0, 1, 0], [0, 0, 1],
    [1 / 3, 1 / 3, 1 / 3],
    [0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0],
    [2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3],
])
MACRO_INTERIOR_NODES = np.array([3, 7, 8, 9])

# Sub-triangle i = (a_{i+1}, a_{i+2}, b). Its six P2 nodes in local order
# (vertex 0, 1, 2, then edge midpoint opposite vertex 0, 1, 2), as macro nodes.
SUB_NODES = np.array([
    [(i + 1) % 3, (i + 2) % 3, 3, 7 + (i + 2) % 3, 7 + (i + 1) % 3, 4 + i] for i in range(3)
])


def p2_shape(lam):
    """Quadratic Lagrange shape functions at barycentric points ``lam`` (..., 3)."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1], axis=-1)


def p2_shape_grad(lam, glam):
    """Gradients of the quadratic shape functions.

    ``lam`` has shape (..., q, 3), ``glam`` (..., 3, 2) holds the barycentric
    gradients; result has shape (..., q, 6, 2).
    """
    g0, g1, g2 = (glam[..., None, i, :] for i in range(3))
    l0, l1, l2 = (lam[..., i, None] for i in range(3))
    return np.stack([(4 * l0 - 1) * g0, (4 * l1 - 1) * g1, (4 * l2 - 1) * g2,
                     4 * (l1 * g2 + l2 * g1), 4 * (l2 * g0 + l0 * g2), 4 * (l0 * g1 + l1 * g0)],
                    axis=-2)


class CrSpace:
    """Vector Crouzeix-Raviart space on a triangulation."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.edges = mesh.interior_edges
        self.n_edges = len(self.edges)
        self.dim = 2 * self.n_edges
        index = -np.ones(mesh.n_edges, dtype=np.int64)
        index[self.edges] = np.arange(self.n_edges)
        #: interior-edge number of every mesh edge, -1 on the boundary
        self.edge_index = index
        #: (nt, 3) interior-edge number of each local edge, -1 on the boundary
        self.local_index = index[mesh.tri_edges]
        # grad phi_F on K for F = local edge i: -2 grad(lambda_i)/|F| = n_i / |K|
        self.local_grads = mesh.outward_normals / mesh.areas[:, None, None]

    def dof(self, f, k):
        return 2 * f + k

    def local_values(self, lam, K):
        """Scalar basis values of the three local edges of ``K`` at barycentric ``lam``."""
        return (1.0 - 2.0 * np.asarray(lam)) / self.mesh.local_edge_lengths[K]

    def element_coefficients(self, coeffs):
        """Per-triangle coefficients, shape (nt, 3, 2); zero for boundary edges."""
        c = np.asarray(coeffs, dtype=float).reshape(-1, 2)
        out = np.zeros(self.local_index.shape + (2,))
        mask = self.local_index >= 0
        out[mask] = c[self.local_index[mask]]
        return out

    def gradients(self, coeffs):
        """Elementwise gradient of a CR field; ``G[K, i, j] = d u_i / d x_j``."""
        c = self.element_coefficients(coeffs)
        return np.einsum("tfi,tfj->tij", c, self.local_grads)

    def divergence(self, coeffs):
        g = self.gradients(coeffs)
        return g[:, 0, 0] + g[:, 1, 1]

    def evaluate(self, coeffs, K, points):
        """Values of the field on triangle ``K`` at ``points`` (q, 2)."""
        lam = self.mesh.barycentric(K, points)
        c = self.element_coefficients(coeffs)[K]
        return self.local_values(lam, K) @ c

    def midpoint_values(self, coeffs):
        """One-sided values at the midpoints of all local edges, shape (nt, 3, 2)."""
        return self.element_coefficients(coeffs) / self.mesh.local_edge_lengths[..., None]


class P0Space:
    """Elementwise constants; the mean-zero constraint is left to the solver."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.dim = mesh.n_triangles


class P2Space:
    """Continuous quadratic vector fields on a barycentric refinement, zero on the boundary."""

    def __init__(self, bary):
        self.bary = bary
        fine = bary.fine
        coarse = bary.coarse
        nv = fine.n_vertices
        self.n_nodes = nv + fine.n_edges
        self.nodes = np.vstack([fine.vertices, fine.edge_midpoints])
        boundary = np.concatenate([fine.boundary_vertices, fine.boundary_edges])
        self.boundary_nodes = boundary
        self.interior_nodes = np.flatnonzero(~boundary)
        node_index = -np.ones(self.n_nodes, dtype=np.int64)
        node_index[self.interior_nodes] = np.arange(len(self.interior_nodes))
        #: interior node number of every node, -1 on the boundary
        self.node_index = node_index
        self.dim = 2 * len(self.interior_nodes)

        # micro-triangle local P2 nodes -> global node
        te = fine.tri_edges
        self.micro_nodes = np.column_stack([fine.triangles, nv + te])

        # macro-local numbering (see module constants) -> global node
        nt = coarse.n_triangles
        sub = np.arange(3 * nt).reshape(nt, 3)
        macro = np.empty((nt, 10), dtype=np.int64)
        macro[:, :3] = coarse.triangles
        macro[:, 3] = bary.barycentre_vertex
        for i in range(3):
            loc = self.micro_nodes[sub[:, i]]
            macro[:, 4 + i] = loc[:, 5]
            macro[:, 7 + (i + 2) % 3] = loc[:, 3]
            macro[:, 7 + (i + 1) % 3] = loc[:, 4]
        self.macro_nodes = macro

    def full_nodal(self, coeffs):
        """Nodal values (n_nodes, 2) including the zero boundary nodes."""
        vals = np.zeros((self.n_nodes, 2))
        vals[self.interior_nodes] = np.asarray(coeffs, dtype=float).reshape(-1, 2)
        return vals

    def restrict(self, nodal):
        """Inverse of :meth:`full_nodal` (boundary values are dropped)."""
        return np.asarray(nodal)[self.interior_nodes].ravel()

    def interpolate(self, func, keep_boundary=False):
        """Nodal interpolant of a vector function ``func(points) -> (q, 2)``.

        With ``keep_boundary`` the full nodal array is returned, which is
        useful for fixtures that do not vanish on the boundary.
        """
        vals = np.asarray(func(self.nodes), dtype=float)
        return vals if keep_boundary else self.restrict(vals)

    def evaluate(self, nodal, micro, points):
        """Values and gradients of a field on micro triangle ``micro``.

        ``nodal`` is a full nodal array (n_nodes, 2) or a coefficient vector.
        Returns values (q, 2) and gradients (q, 2, 2) with ``[q, i, j] = d u_i/d x_j``.
        """
        nodal = np.asarray(nodal, dtype=float)
        if nodal.ndim == 1:
            nodal = self.full_nodal(nodal)
        fine = self.bary.fine
        lam = fine.barycentric(micro, points)
        phi = p2_shape(lam)
        dphi = p2_shape_grad(lam, fine.grad_lambda[micro])
        loc = nodal[self.micro_nodes[micro]]
        return phi @ loc, np.einsum("qnj,ni->qij", dphi, loc)


def cr_basis_eval(space, F, k, K, x):
    """Value of ``phi_F e_k`` restricted to triangle ``K`` at points ``x``."""
    mesh = space.mesh
    loc = np.flatnonzero(mesh.tri_edges[K] == F)
    if len(loc) == 0:
        raise MeshError(f"triangle {K} is not adjacent to edge {F}")
    lam = mesh.barycentric(K, np.atleast_2d(x))
    val = (1.0 - 2.0 * lam[:, loc[0]]) / mesh.edge_lengths[F]
    out = np.zeros((len(val), 2))
    out[:, k] = val
    return out


def bubble_eval(mesh, F, x):
    """Edge bubble ``psi_F = 6 lambda_a lambda_b / |F|`` at points ``x`` (zero off the patch)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(len(x))
    a, b = mesh.edges[F]
    for K in mesh.edge_tris[F]:
        if K < 0:
            continue
        lam = mesh.barycentric(K, x)
        inside = np.all(lam >= -1e-12, axis=1) & (out == 0)
        tri = list(mesh.triangles[K])
        val = 6.0 * lam[:, tri.index(a)] * lam[:, tri.index(b)] / mesh.edge_lengths[F]
        out[inside] = val[inside]
    return out


def face_moment(field, edge_points, degree=20):
    """Integral of a vector field over the segment ``edge_points`` (2, 2).

    ``field`` maps points (q, 2) to values (q, 2).
    """
    rule = quad_rule("segment", degree)
    p0, p1 = np.asarray(edge_points, dtype=float)
    pts = p0[None] + rule.points[:, None] * (p1 - p0)[None]
    length = np.linalg.norm(p1 - p0)
    return length * rule.weights @ np.asarray(field(pts))


def cr_face_moments(space, coeffs):
    """Face moments of a CR field on all mesh edges, shape (ne, 2).

    Interior edges return the coefficient, boundary edges zero.
    """
    out = np.zeros((space.mesh.n_edges, 2))
    out[space.edges] = np.asarray(coeffs).reshape(-1, 2)
    return out


def eval_field_and_gradient(space, coeffs, element, points):
    """Values and gradients of a discrete field on one element.

    For a :class:`CrSpace`, ``element`` is a macro triangle; for a
    :class:`P2Space` it is a micro triangle of the barycentric refinement.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if isinstance(space, CrSpace):
        if not 0 <= element < space.mesh.n_triangles:
            raise MeshError("element index out of range")
        vals = space.evaluate(coeffs, element, points)
        g = space.gradients(coeffs)[element]
        return vals, np.broadcast_to(g, (len(points), 2, 2)).copy()
    if isinstance(space, P2Space):
        if not 0 <= element < space.bary.fine.n_triangles:
            raise MeshError("element index out of range")
        return space.evaluate(coeffs, element, points)
    raise TypeError(f"unsupported space {type(space).__name__}")

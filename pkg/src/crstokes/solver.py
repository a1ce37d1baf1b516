"""Three ways to solve the discrete Stokes problem.

* :func:`solve_saddle_point` -- direct factorization of the bordered
  saddle-point matrix;
* :func:`solve_reduced` -- Galerkin solve on the elementwise solenoidal
  subspace spanned by tangential edge fields and vortices;
* :func:`recover_pressure_alg1` -- pressure from the velocity by sweeping
  through the elements and accumulating jumps.

:class:`ReducedSolver` combines the last two and is the fast path.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import breadth_first_order


class SolverError(RuntimeError):
    pass


@dataclass
class StokesSolution:
    u: np.ndarray
    p: np.ndarray


@dataclass
class DivFreeBasis:
    """Columns of ``matrix`` are CR coefficient vectors of the basis fields.

    The first ``n_tangential`` columns are ``phi_F t_F`` for the interior
    edges, the remaining ones the vortices around the interior vertices.
    """

    matrix: sp.csc_matrix
    n_tangential: int
    n_vortices: int
    points: np.ndarray  # location of every basis field (edge midpoint or vertex)

    def __len__(self):
        return self.matrix.shape[1]


def bordered_matrix(system):
    A, D, a = system.stiffness, system.divergence, system.areas
    a = sp.csr_matrix(a[None, :])
    return sp.bmat([[A, -D.T, None], [-D, None, -a.T], [None, -a, None]], format="csc")


class SaddleSolver:
    """Factorization of a saddle-point matrix, reusable for several loads."""

    def __init__(self, system):
        self.n = system.stiffness.shape[0]
        self.m = system.divergence.shape[0]
        self.system = system
        try:
            self.lu = spla.splu(bordered_matrix(system), permc_spec="COLAMD")
        except RuntimeError as exc:  # singular factor
            raise SolverError("saddle-point matrix is singular; check the assembly") from exc

    def solve(self, load):
        rhs = np.zeros(self.n + self.m + 1)
        rhs[:self.n] = load
        x = self.lu.solve(rhs)
        return StokesSolution(x[:self.n], x[self.n:self.n + self.m])


def solve_saddle_point(system):
    """Velocity and mean-zero pressure of an assembled system."""
    return SaddleSolver(system).solve(system.load)


def saddle_residuals(system, sol):
    """Relative residuals of the momentum and continuity equations."""
    A, D = system.stiffness, system.divergence
    r1 = A @ sol.u - D.T @ sol.p - system.load
    scale = np.linalg.norm(system.load) + np.linalg.norm(A @ sol.u) + np.linalg.norm(D.T @ sol.p)
    r2 = D @ sol.u
    return np.linalg.norm(r1) / max(scale, 1e-300), np.linalg.norm(r2) / max(np.linalg.norm(sol.u), 1e-300)


def build_divfree_basis(mesh, cr):
    """Tangential edge fields and vortices spanning the solenoidal CR fields."""
    nf = cr.n_edges
    t = mesh.edge_tangents[cr.edges]
    rows = np.concatenate([2 * np.arange(nf), 2 * np.arange(nf) + 1])
    cols = np.concatenate([np.arange(nf), np.arange(nf)])
    vals = np.concatenate([t[:, 0], t[:, 1]])

    # vortex around z: sum over edges at z of phi_F times the normal pointing
    # counterclockwise about z; that is +n_F if z is the lower endpoint of F
    zs = mesh.interior_vertices
    col_of = -np.ones(mesh.n_vertices, dtype=np.int64)
    col_of[zs] = nf + np.arange(len(zs))
    e = mesh.edges[cr.edges]
    n = mesh.edge_normals[cr.edges]
    vr, vc, vv = [], [], []
    for end, sign in ((0, 1.0), (1, -1.0)):
        z = e[:, end]
        ok = col_of[z] >= 0
        f = np.flatnonzero(ok)
        for c in range(2):
            vr.append(2 * f + c)
            vc.append(col_of[z[ok]])
            vv.append(sign * n[ok, c])
    rows = np.concatenate([rows] + vr)
    cols = np.concatenate([cols] + vc)
    vals = np.concatenate([vals] + vv)
    Z = sp.csc_matrix((vals, (rows, cols)), shape=(cr.dim, nf + len(zs)))
    points = np.concatenate([mesh.edge_midpoints[cr.edges], mesh.vertices[zs]])
    return DivFreeBasis(Z, nf, len(zs), points)


def solve_reduced(basis, stiffness, load):
    """Galerkin solution on the span of ``basis``; returns CR coefficients."""
    Z = basis.matrix
    K = (Z.T @ stiffness @ Z).tocsc()
    try:
        lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SolverError("reduced matrix is singular; the basis is rank deficient") from exc
    return Z @ lu.solve(Z.T @ np.asarray(load, dtype=float))


class ReducedSolver:
    """Factorization of the stiffness matrix restricted to the solenoidal fields.

    :meth:`solve` returns the velocity from the reduced system and the
    pressure from :func:`recover_pressure_alg1`; the matrix is shared by the
    standard and the modified scheme, only the load differs.
    """

    def __init__(self, mesh, cr, stiffness, basis=None):
        self.mesh, self.cr, self.stiffness = mesh, cr, stiffness
        self.basis = basis if basis is not None else build_divfree_basis(mesh, cr)
        # a geometric presort makes the minimum-degree ordering fast and
        # keeps the fill moderate on meshes with scattered numbering
        pts = self.basis.points
        self.Z = self.basis.matrix[:, np.lexsort((pts[:, 0], pts[:, 1]))].tocsc()
        K = (self.Z.T @ stiffness @ self.Z).tocsc()
        try:
            self.lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SolverError("reduced matrix is singular; the basis is rank deficient") from exc

    def velocity(self, load):
        return self.Z @ self.lu.solve(self.Z.T @ np.asarray(load, dtype=float))

    def solve(self, load):
        u = self.velocity(load)
        return StokesSolution(u, recover_pressure_alg1(self.mesh, self.cr, u, self.stiffness, load))


def pressure_jumps(mesh, cr, u, stiffness, load):
    """``g_F = a(u, phi_F n_F) - <f, E(phi_F n_F)>`` for all interior edges.

    Across ``F`` from ``K'`` into ``K`` the pressure changes by ``(n_F . n_K) g_F``.
    """
    r = (stiffness @ u - np.asarray(load)).reshape(-1, 2)
    return np.einsum("fc,fc->f", r, mesh.edge_normals[cr.edges])


def recover_pressure_alg1(mesh, cr, u, stiffness, load, start=0):
    """Elementwise pressure from a solenoidal velocity by a breadth-first sweep.

    ``stiffness`` includes the viscosity and ``load`` is the load vector of
    the scheme (standard or modified) on the CR dofs.
    """
    g = pressure_jumps(mesh, cr, u, stiffness, load)
    nt = mesh.n_triangles
    F = cr.edges
    k1, k2 = mesh.edge_tris[F, 0], mesh.edge_tris[F, 1]
    adj = sp.csr_matrix((np.ones(2 * len(F)), (np.concatenate([k1, k2]), np.concatenate([k2, k1]))),
                        shape=(nt, nt))
    order, pred = breadth_first_order(adj, start, directed=False, return_predecessors=True)
    if len(order) != nt:
        raise SolverError("element graph is disconnected")
    # neighbour across each local edge
    et = mesh.edge_tris[mesh.tri_edges]  # (nt, 3, 2)
    nb = np.where(et[..., 0] == np.arange(nt)[:, None], et[..., 1], et[..., 0])
    rest = order[1:]
    loc = np.argmax(nb[rest] == pred[rest][:, None], axis=1)
    step = np.zeros(nt)
    step[rest] = mesh.edge_sign()[rest, loc] * g[cr.local_index[rest, loc]]

    p = [0.0] * nt
    parent = pred.tolist()
    inc = step.tolist()
    for K in rest.tolist():
        p[K] = p[parent[K]] + inc[K]
    p = np.array(p)
    return p - mesh.areas @ p / mesh.areas.sum()


def closed_path_sums(mesh, cr, g):
    """Sum of pressure increments along the closed loop around every interior vertex."""
    F = cr.edges
    e = mesh.edges[F]
    nF = mesh.edge_normals[F]
    total = np.zeros(mesh.n_vertices)
    for end, sign in ((0, 1.0), (1, -1.0)):
        z = e[:, end]
        # the triangle on the counterclockwise side of F seen from z
        ccw = sign * nF
        out = []
        for s in range(2):
            K = mesh.edge_tris[F, s]
            loc = mesh.edge_local[F, s]
            out.append(np.einsum("fc,fc->f", ccw, mesh.outward_normals[K, loc]))
        side = np.where(out[0] < 0, 0, 1)
        K = mesh.edge_tris[F, side]
        loc = mesh.edge_local[F, side]
        s_K = np.einsum("fc,fc->f", nF, mesh.outward_normals[K, loc])
        total += np.bincount(z, weights=s_K * g, minlength=mesh.n_vertices)
    return total[mesh.interior_vertices]


def cross_validate(mesh, cr, system, tol=1e-8):
    """Solve ``system`` by all three routes and compare.

    Returns the relative velocity and pressure discrepancies between the
    saddle-point solution and reduced velocity plus swept pressure, and the
    largest closed-path jump sum scaled by the largest jump. Raises
    :class:`SolverError` if any exceeds ``tol``.
    """
    ref = solve_saddle_point(system)
    u = solve_reduced(build_divfree_basis(mesh, cr), system.stiffness, system.load)
    p = recover_pressure_alg1(mesh, cr, u, system.stiffness, system.load)
    g = pressure_jumps(mesh, cr, u, system.stiffness, system.load)
    loops = closed_path_sums(mesh, cr, g)
    out = {
        "velocity": np.linalg.norm(u - ref.u) / max(np.linalg.norm(ref.u), 1e-300),
        "pressure": np.linalg.norm(p - ref.p) / max(np.linalg.norm(ref.p), 1e-300),
        "loops": np.abs(loops).max(initial=0.0) / max(np.abs(g).max(initial=0.0), 1e-300),
    }
    bad = {k: v for k, v in out.items() if not v <= tol}
    if bad:
        raise SolverError(f"solver routes disagree: {bad}")
    return out

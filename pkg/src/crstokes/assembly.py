"""Stiffness, divergence and load vectors of the Crouzeix-Raviart Stokes system."""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .fespace import p2_shape
from .quadrature import map_to_triangles, quad_rule

VOLUME_DEGREE = 8
LINE_DEGREE = 31  # 16-point Gauss
CHUNK = 50000  # triangles per block of volume quadrature


class UndefinedLoadError(ValueError):
    """The standard load is undefined: a mesh edge lies on the support line."""


@dataclass(frozen=True)
class LoadFunctional:
    """A load ``<f, v> = int f_vol . v + int_0^1 g(x2) v(x1*, x2) . t dx2``.

    ``volume`` maps points (..., 2) to values (..., 2). The line part is
    given by ``line_x`` (the abscissa x1*), ``line_density`` (g, a function
    of x2) and ``line_direction`` (t).
    """

    volume: Optional[Callable] = None
    line_x: Optional[float] = None
    line_density: Optional[Callable] = None
    line_direction: tuple = (1.0, 0.0)

    def __post_init__(self):
        if self.volume is None and self.line_x is None:
            raise ValueError("a load needs a volume part, a line part, or both")
        if (self.line_x is None) != (self.line_density is None):
            raise ValueError("line_x and line_density must be given together")


@dataclass
class SaddleSystem:
    stiffness: sp.csr_matrix
    divergence: sp.csr_matrix
    areas: np.ndarray
    load: np.ndarray


def assemble_stiffness(mesh, cr, nu=1.0):
    """``A[i, j] = nu int grad_T v^i : grad_T v^j`` on the interleaved CR dofs."""
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    n = mesh.outward_normals
    loc = nu * np.einsum("tic,tjc->tij", n, n) / mesh.areas[:, None, None]
    idx = cr.local_index
    rows = np.broadcast_to(idx[:, :, None], loc.shape)
    cols = np.broadcast_to(idx[:, None, :], loc.shape)
    ok = (rows >= 0) & (cols >= 0)
    A = sp.csr_matrix((loc[ok], (rows[ok], cols[ok])), shape=(cr.n_edges, cr.n_edges))
    return sp.kron(A, sp.identity(2), format="csr")


def assemble_divergence(mesh, cr):
    """``D[K, i] = int_K div_T v^i``; for ``phi_F e_k`` this is the outward normal component."""
    nt = mesh.n_triangles
    rows, cols, vals = [], [], []
    for i in range(3):
        f = cr.local_index[:, i]
        ok = np.flatnonzero(f >= 0)
        for c in range(2):
            rows.append(ok)
            cols.append(2 * f[ok] + c)
            vals.append(mesh.outward_normals[ok, i, c])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(nt, cr.dim))


def barycentric_at(mesh, tris, points):
    """Barycentric coordinates of ``points`` (n, q, 2) in triangles ``tris`` (n,)."""
    a = mesh.vertices[mesh.triangles[tris]]  # (n, 3, 2)
    g = mesh.grad_lambda[tris]
    return 1.0 + np.einsum("nqij,nij->nqi", points[:, :, None, :] - a[:, None, :, :], g)


def clip_vertical_line(mesh, x0, tol=1e-13):
    """Intersections of the line ``x1 = x0`` with the triangles of ``mesh``.

    Returns
    -------
    tris : (s,) triangle index of each segment
    p0, p1 : (s, 2) segment end points
    on_edge : (s,) True where the segment is a mesh edge lying on the line
    """
    v = mesh.vertices[mesh.triangles]
    d = v[..., 0] - x0
    zero = np.abs(d) <= tol
    d = np.where(zero, 0.0, d)
    nz = zero.sum(axis=1)
    crossing = (d.min(axis=1) < 0) & (d.max(axis=1) > 0)
    on_edge = nz == 2

    pts = np.full((mesh.n_triangles, 2, 2), np.nan)
    count = np.zeros(mesh.n_triangles, dtype=np.int64)
    rows = np.arange(mesh.n_triangles)
    for i in range(3):
        take = (crossing | on_edge) & zero[:, i]
        r = rows[take]
        pts[r, count[r]] = v[r, i]
        count[r] += 1
    for i, j in ((0, 1), (1, 2), (2, 0)):
        cut = crossing & (d[:, i] * d[:, j] < 0)
        r = rows[cut]
        s = d[r, i] / (d[r, i] - d[r, j])
        pts[r, count[r]] = v[r, i] + s[:, None] * (v[r, j] - v[r, i])
        count[r] += 1
    sel = np.flatnonzero(crossing | on_edge)
    assert np.all(count[sel] == 2)
    return sel, pts[sel, 0], pts[sel, 1], on_edge[sel]


def _line_samples(mesh, load, forbid_edges):
    """Quadrature samples of the line part: triangle, points, weights times density."""
    tris, p0, p1, on_edge = clip_vertical_line(mesh, load.line_x)
    if forbid_edges and np.any(on_edge):
        raise UndefinedLoadError(
            "a mesh edge lies on the support of the line load; the standard load is undefined")
    rule = quad_rule("segment", LINE_DEGREE)
    pts = p0[:, None, :] + rule.points[None, :, None] * (p1 - p0)[:, None, :]
    length = np.linalg.norm(p1 - p0, axis=1)
    # segments on an edge are seen from both sides; average the two traces
    share = np.where(on_edge, 0.5, 1.0)
    w = (share * length)[:, None] * rule.weights[None, :] * load.line_density(pts[..., 1])
    t = np.asarray(load.line_direction, dtype=float)
    return tris, pts, w[..., None] * t[None, None, :]


def assemble_load_standard(mesh, cr, load):
    """``b_i = <f, v^i>`` for the CR nodal basis."""
    b = np.zeros((cr.n_edges, 2))
    parts = []
    if load.volume is not None:
        rule = quad_rule("triangle", VOLUME_DEGREE)
        lam = np.column_stack([1.0 - rule.points.sum(axis=1), rule.points])
        for s in range(0, mesh.n_triangles, CHUNK):
            tris = np.arange(s, min(s + CHUNK, mesh.n_triangles))
            pts, w = map_to_triangles(rule, mesh.vertices[mesh.triangles[tris]])
            fw = np.asarray(load.volume(pts)) * w[..., None]  # (t, q, 2)
            phi = (1.0 - 2.0 * lam)[None] / mesh.local_edge_lengths[tris, None, :]  # (t, q, 3)
            parts.append((tris, np.einsum("tqi,tqc->tic", phi, fw)))
    if load.line_x is not None:
        tris, pts, fw = _line_samples(mesh, load, forbid_edges=True)
        lam = barycentric_at(mesh, tris, pts)
        phi = (1.0 - 2.0 * lam) / mesh.local_edge_lengths[tris][:, None, :]
        parts.append((tris, np.einsum("sqi,sqc->sic", phi, fw)))
    for tris, contrib in parts:
        idx = cr.local_index[tris]
        ok = idx >= 0
        for c in range(2):
            b[:, c] += np.bincount(idx[ok], weights=contrib[..., c][ok], minlength=cr.n_edges)
    return b.ravel()


def assemble_p2_load(p2, load):
    """``(f)_j = <f, w^j>`` for the nodal basis of the quadratic space on the refinement."""
    fine = p2.bary.fine
    full = np.zeros((p2.n_nodes, 2))
    if load.volume is not None:
        rule = quad_rule("triangle", VOLUME_DEGREE)
        lam = np.column_stack([1.0 - rule.points.sum(axis=1), rule.points])
        phi = p2_shape(lam)  # (q, 6)
        for s in range(0, fine.n_triangles, CHUNK):
            sl = slice(s, s + CHUNK)
            pts, w = map_to_triangles(rule, fine.vertices[fine.triangles[sl]])
            fw = np.asarray(load.volume(pts)) * w[..., None]
            contrib = np.einsum("qn,sqc->snc", phi, fw)
            for c in range(2):
                full[:, c] += np.bincount(p2.micro_nodes[sl].ravel(), weights=contrib[..., c].ravel(),
                                          minlength=p2.n_nodes)
    if load.line_x is not None:
        tris, pts, fw = _line_samples(fine, load, forbid_edges=False)
        phi = p2_shape(barycentric_at(fine, tris, pts))  # (s, q, 6)
        contrib = np.einsum("sqn,sqc->snc", phi, fw)
        for c in range(2):
            full[:, c] += np.bincount(p2.micro_nodes[tris].ravel(), weights=contrib[..., c].ravel(),
                                      minlength=p2.n_nodes)
    return p2.restrict(full)


def assemble_load_modified(smoother, load):
    """``b_i = <f, E v^i>``, computed as the smoother matrix times the quadratic load vector."""
    return smoother.load(assemble_p2_load(smoother.p2, load))


def assemble_system(mesh, cr, load_vector, nu=1.0):
    return SaddleSystem(assemble_stiffness(mesh, cr, nu), assemble_divergence(mesh, cr),
                        mesh.areas.copy(), np.asarray(load_vector, dtype=float))

"""Errors, best-approximation errors, cross-mesh differences and EOCs."""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .assembly import LoadFunctional
from .mesh import MeshError
from .quadrature import map_to_triangles, quad_rule

ERROR_DEGREE = 8
EDGE_DEGREE = 31


@dataclass(frozen=True)
class AnalyticCase:
    """An exact Stokes solution (or just a load) on the unit square.

    ``p_cut`` is the abscissa of a vertical discontinuity line of ``p``;
    integrals of ``p`` are then computed on the pieces of each cut element.
    """

    load: LoadFunctional
    nu: float = 1.0
    u: Optional[Callable] = None
    grad_u: Optional[Callable] = None
    p: Optional[Callable] = None
    p_cut: Optional[float] = None


@dataclass(frozen=True)
class ErrorReport:
    err_u: float
    best_u: float
    err_p: float
    best_p: float

    @property
    def gamma_u(self):
        return self.err_u / self.best_u

    @property
    def gamma_p(self):
        return self.err_p / self.best_p


def element_quadrature(mesh, degree=ERROR_DEGREE, cut_x=None):
    """Quadrature on all triangles, splitting those cut by ``x1 = cut_x``.

    Returns flat arrays ``(elem, points, weights)``; ``elem`` gives the
    triangle of each point.
    """
    rule = quad_rule("triangle", degree)
    corners = mesh.vertices[mesh.triangles]
    nt = mesh.n_triangles
    pieces = [corners]
    owners = [np.arange(nt)]
    if cut_x is not None:
        d = corners[..., 0] - cut_x
        cut = (d.min(axis=1) < 0) & (d.max(axis=1) > 0)
        keep = ~cut
        pieces = [corners[keep]]
        owners = [np.flatnonzero(keep)]
        for k in np.flatnonzero(cut):
            for tri in _split_triangle(corners[k], d[k], cut_x):
                pieces.append(tri[None])
                owners.append(np.array([k]))
    tris = np.concatenate(pieces)
    elem = np.concatenate(owners)
    pts, w = map_to_triangles(rule, tris)
    q = len(rule.weights)
    return np.repeat(elem, q), pts.reshape(-1, 2), w.ravel()


def _split_triangle(v, d, x0):
    """Split a triangle crossed by a vertical line into pieces on either side."""
    # the vertex alone on its side; a vertex on the line counts for neither side
    lone = int(np.flatnonzero(d > 0)[0]) if np.sum(d > 0) == 1 else int(np.flatnonzero(d < 0)[0])
    ia, ib, ic = lone, (lone + 1) % 3, (lone + 2) % 3
    a, b, c = v[ia], v[ib], v[ic]
    if d[ib] == 0:
        pc = a + d[ia] / (d[ia] - d[ic]) * (c - a)
        return [np.array([a, b, pc]), np.array([pc, b, c])]
    if d[ic] == 0:
        pb = a + d[ia] / (d[ia] - d[ib]) * (b - a)
        return [np.array([a, pb, c]), np.array([pb, b, c])]
    pb = a + d[ia] / (d[ia] - d[ib]) * (b - a)
    pc = a + d[ia] / (d[ia] - d[ic]) * (c - a)
    return [np.array([a, pb, pc]), np.array([pb, b, c]), np.array([pb, c, pc])]


def cr_interpolate(u, mesh, cr, degree=EDGE_DEGREE):
    """CR quasi-interpolant: coefficients are the face moments of ``u``."""
    rule = quad_rule("segment", degree)
    e = mesh.edges[cr.edges]
    p0 = mesh.vertices[e[:, 0]]
    p1 = mesh.vertices[e[:, 1]]
    pts = p0[:, None] + rule.points[None, :, None] * (p1 - p0)[:, None]
    vals = np.asarray(u(pts))  # (nf, q, 2)
    length = mesh.edge_lengths[cr.edges]
    return (length[:, None] * np.einsum("q,fqc->fc", rule.weights, vals)).ravel()


def broken_h1_error(mesh, cr, coeffs, grad_u, degree=ERROR_DEGREE):
    """``|| grad u - grad_T u_h ||`` with ``grad_u(points) -> (..., 2, 2)``."""
    elem, pts, w = element_quadrature(mesh, degree)
    G = cr.gradients(coeffs)
    diff = np.asarray(grad_u(pts)) - G[elem]
    return float(np.sqrt(w @ np.einsum("qij,qij->q", diff, diff)))


def best_velocity_error(u, grad_u, mesh, cr, degree=ERROR_DEGREE):
    return broken_h1_error(mesh, cr, cr_interpolate(u, mesh, cr), grad_u, degree)


def elementwise_means(p, mesh, cut_x=None, degree=ERROR_DEGREE):
    elem, pts, w = element_quadrature(mesh, degree, cut_x)
    return np.bincount(elem, weights=w * p(pts), minlength=mesh.n_triangles) / mesh.areas


def l2_pressure_error(mesh, p_h, p, cut_x=None, degree=ERROR_DEGREE):
    """``|| p - p_h ||`` for an elementwise constant ``p_h``."""
    elem, pts, w = element_quadrature(mesh, degree, cut_x)
    diff = p(pts) - np.asarray(p_h)[elem]
    return float(np.sqrt(w @ diff ** 2))


def best_pressure_error(p, mesh, cut_x=None, degree=ERROR_DEGREE):
    """Distance of ``p`` to the elementwise constants (realized by the elementwise means)."""
    return l2_pressure_error(mesh, elementwise_means(p, mesh, cut_x, degree), p, cut_x, degree)


def error_report(case, mesh, cr, sol, degree=ERROR_DEGREE):
    return ErrorReport(
        err_u=broken_h1_error(mesh, cr, sol.u, case.grad_u, degree),
        best_u=best_velocity_error(case.u, case.grad_u, mesh, cr, degree),
        err_p=l2_pressure_error(mesh, sol.p, case.p, case.p_cut, degree),
        best_p=best_pressure_error(case.p, mesh, case.p_cut, degree),
    )


def _ancestor(fine, coarse):
    if fine.parent is None:
        raise MeshError("fine mesh carries no genealogy")
    parent = np.asarray(fine.parent)
    if parent.max() >= coarse.n_triangles:
        raise MeshError("genealogy does not refer to the coarse mesh")
    return parent


def cross_mesh_difference(coarse, fine, grads_coarse, grads_fine, p_coarse=None, p_fine=None):
    """Differences of piecewise constant gradients (and pressures) on nested meshes.

    ``fine.parent`` must give, for every fine triangle, its ancestor in
    ``coarse``. Returns ``delta_u`` and, if pressures are given, ``delta_p``.
    """
    parent = _ancestor(fine, coarse)
    d = np.asarray(grads_fine) - np.asarray(grads_coarse)[parent]
    delta_u = float(np.sqrt(fine.areas @ np.einsum("tij,tij->t", d, d)))
    if p_coarse is None:
        return delta_u
    dp = np.asarray(p_fine) - np.asarray(p_coarse)[parent]
    return delta_u, float(np.sqrt(fine.areas @ dp ** 2))


def eoc(values, sizes):
    """Decay rates ``-log(d_n / d_{n-1}) / log(N_n / N_{n-1})``; one shorter than the input."""
    values = np.asarray(values, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if np.any(values <= 0) or np.any(sizes <= 0):
        raise ValueError("EOC needs positive values and sizes")
    if np.any(np.diff(sizes) <= 0):
        raise ValueError("sizes must increase")
    return -np.log(values[1:] / values[:-1]) / np.log(sizes[1:] / sizes[:-1])

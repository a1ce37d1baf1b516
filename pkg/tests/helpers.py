"""Shared fixtures and independent evaluation routines for the tests."""
import numpy as np

from crstokes.fespace import p2_shape, p2_shape_grad
from crstokes.mesh import (build_anisotropic_mesh, build_crossed_initial, build_uniform_mesh,
                           refine_nvb_global)
from crstokes.quadrature import quad_rule

# acceptance outcomes, printed at the end of the session
CRITERIA = {}


def record(number, title, ok, detail=""):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}" + (f": {detail}" if detail else "")
    CRITERIA[number] = line
    print(line)
    return ok


def small_meshes():
    return {
        "uniform": build_uniform_mesh(2),
        "anisotropic": build_anisotropic_mesh(1, 10),
        "nvb": refine_nvb_global(build_crossed_initial(), 3),
    }


def random_cr(cr, rng):
    return rng.standard_normal(cr.dim)


def p2_at_quadrature(p2, nodal, degree=4):
    """Values (3nt, q, 2), gradients (3nt, q, 2, 2) and weights (3nt, q) of a quadratic field."""
    fine = p2.bary.fine
    rule = quad_rule("triangle", degree)
    lam = np.column_stack([1.0 - rule.points.sum(axis=1), rule.points])
    loc = nodal[p2.micro_nodes]  # (s, 6, 2)
    vals = np.einsum("qn,snc->sqc", p2_shape(lam), loc)
    dphi = p2_shape_grad(lam[None], fine.grad_lambda)  # (s, q, 6, 2)
    grads = np.einsum("sqnj,sni->sqij", dphi, loc)
    w = 2.0 * fine.areas[:, None] * rule.weights[None]
    return vals, grads, w


def p2_edge_moments(p2, nodal, degree=5):
    """Integrals of a quadratic field over every coarse edge, shape (ne, 2)."""
    coarse = p2.bary.coarse
    rule = quad_rule("segment", degree)
    K = coarse.edge_tris[:, 0]
    i = coarse.edge_local[:, 0]
    micro = 3 * K + i  # sub-triangle (a_{i+1}, a_{i+2}, b) holds edge i
    t = rule.points
    lam = np.column_stack([1.0 - t, t, np.zeros_like(t)])
    vals = np.einsum("qn,enc->eqc", p2_shape(lam), nodal[p2.micro_nodes[micro]])
    return coarse.edge_lengths[:, None] * np.einsum("q,eqc->ec", rule.weights, vals)


def p1_to_cr(mesh, cr, vertex_values):
    """CR coefficients (face moments) of the continuous piecewise affine field with given vertex values."""
    e = mesh.edges[cr.edges]
    vv = np.asarray(vertex_values, dtype=float)
    mid = 0.5 * (vv[e[:, 0]] + vv[e[:, 1]])
    return (mesh.edge_lengths[cr.edges][:, None] * mid).ravel()

import numpy as np
import pytest

from crstokes.fespace import (CrSpace, P2Space, bubble_eval, cr_basis_eval, cr_face_moments,
                              eval_field_and_gradient, face_moment)
from crstokes.mesh import MeshError, barycentric_refine, build_uniform_mesh
from helpers import p2_edge_moments


@pytest.fixture(scope="module")
def mesh():
    return build_uniform_mesh(2)


@pytest.fixture(scope="module")
def cr(mesh):
    return CrSpace(mesh)


def test_cr_basis_nodal_values(mesh, cr):
    F = cr.edges[5]
    K = mesh.edge_tris[F, 0]
    mid = mesh.edge_midpoints[F]
    np.testing.assert_allclose(cr_basis_eval(cr, F, 0, K, mid), [[1 / mesh.edge_lengths[F], 0]])
    for G in mesh.tri_edges[K]:
        if G != F:
            np.testing.assert_allclose(cr_basis_eval(cr, F, 1, K, mesh.edge_midpoints[G]), 0, atol=1e-15)
    bc = mesh.barycentres[K]
    np.testing.assert_allclose(cr_basis_eval(cr, F, 1, K, bc), [[0, 1 / (3 * mesh.edge_lengths[F])]])
    with pytest.raises(MeshError):
        far = [k for k in range(mesh.n_triangles) if F not in mesh.tri_edges[k]][0]
        cr_basis_eval(cr, F, 0, far, mid)


def test_cr_basis_face_moments(mesh, cr):
    F = cr.edges[3]
    for K in mesh.edge_tris[F]:
        field = lambda x, K=K: cr_basis_eval(cr, F, 0, K, x)
        np.testing.assert_allclose(face_moment(field, mesh.vertices[mesh.edges[F]]), [1, 0], atol=1e-14)
        for G in mesh.tri_edges[K]:
            if G != F:
                np.testing.assert_allclose(face_moment(field, mesh.vertices[mesh.edges[G]]), 0, atol=1e-14)


def test_bubble(mesh):
    F = 7
    np.testing.assert_allclose(bubble_eval(mesh, F, mesh.edge_midpoints[F]), 1.5 / mesh.edge_lengths[F])
    scalar = lambda x: np.column_stack([bubble_eval(mesh, F, x), np.zeros(len(x))])
    assert face_moment(scalar, mesh.vertices[mesh.edges[F]])[0] == pytest.approx(1.0, abs=1e-13)
    for G in mesh.tri_edges[mesh.edge_tris[F, 0]]:
        if G != F:
            assert face_moment(scalar, mesh.vertices[mesh.edges[G]])[0] == pytest.approx(0.0, abs=1e-14)


def test_face_moments_are_coefficients(mesh, cr, rng):
    c = rng.standard_normal(cr.dim)
    mom = cr_face_moments(cr, c)
    np.testing.assert_array_equal(mom[mesh.boundary_edges], 0)
    np.testing.assert_allclose(mom[cr.edges].ravel(), c)


def test_cr_gradient_constant_per_element(mesh, cr, rng):
    c = rng.standard_normal(cr.dim)
    K = 9
    pts = np.array([[0.2, 0.3, 0.5], [0.6, 0.2, 0.2]]) @ mesh.vertices[mesh.triangles[K]]
    _, g = eval_field_and_gradient(cr, c, K, pts)
    np.testing.assert_allclose(g[0], g[1])
    # finite differences of the values agree with the gradient
    x0 = mesh.barycentres[K]
    h = 1e-6
    v0 = cr.evaluate(c, K, x0[None])[0]
    vx = cr.evaluate(c, K, (x0 + [h, 0])[None])[0]
    np.testing.assert_allclose((vx - v0) / h, g[0][:, 0], rtol=1e-6, atol=1e-6)


def test_zero_field(mesh, cr):
    v, g = eval_field_and_gradient(cr, np.zeros(cr.dim), 0, mesh.barycentres[:1])
    assert not v.any() and not g.any()


def test_p2_reproduces_quadratics(mesh):
    p2 = P2Space(barycentric_refine(mesh))
    nodal = p2.interpolate(lambda x: np.column_stack([x[:, 0] ** 2, x[:, 0] * x[:, 1]]), keep_boundary=True)
    fine = p2.bary.fine
    for micro in (0, 7, fine.n_triangles - 1):
        pts = fine.vertices[fine.triangles[micro]].mean(axis=0)[None] + [[0.001, 0.002]]
        vals, grads = eval_field_and_gradient(p2, nodal, micro, pts)
        x = pts[0]
        np.testing.assert_allclose(vals[0], [x[0] ** 2, x[0] * x[1]], atol=1e-12)
        np.testing.assert_allclose(grads[0], [[2 * x[0], 0], [x[1], x[0]]], atol=1e-12)


def test_p2_continuous_across_micro_edges(mesh, rng):
    p2 = P2Space(barycentric_refine(mesh))
    nodal = p2.full_nodal(rng.standard_normal(p2.dim))
    fine = p2.bary.fine
    for e in fine.interior_edges[:20]:
        k0, k1 = fine.edge_tris[e]
        x = fine.vertices[fine.edges[e]].T @ [0.3, 0.7]
        v0, _ = p2.evaluate(nodal, k0, x[None])
        v1, _ = p2.evaluate(nodal, k1, x[None])
        np.testing.assert_allclose(v0, v1, atol=1e-12)
    # the boundary trace vanishes
    bnd = fine.edges[fine.boundary_edges][:5]
    for a, b in bnd:
        k = np.flatnonzero(np.any(fine.triangles == a, axis=1) & np.any(fine.triangles == b, axis=1))[0]
        v, _ = p2.evaluate(nodal, k, (0.5 * (fine.vertices[a] + fine.vertices[b]))[None])
        assert np.all(v == 0)


def test_p2_edge_moment_helper_matches_simpson(mesh, rng):
    p2 = P2Space(barycentric_refine(mesh))
    nodal = p2.full_nodal(rng.standard_normal(p2.dim))
    mom = p2_edge_moments(p2, nodal)
    e = 11
    a, b = mesh.edges[e]
    pts = mesh.vertices[[a, b]]
    simpson = []
    for x in (pts[0], pts.mean(axis=0), pts[1]):
        k = [k for k in range(p2.bary.fine.n_triangles)
             if p2.bary.fine.contains(k, x[None]).all()][0]
        simpson.append(p2.evaluate(nodal, k, x[None])[0][0])
    exact = mesh.edge_lengths[e] * (simpson[0] + 4 * simpson[1] + simpson[2]) / 6
    np.testing.assert_allclose(mom[e], exact, atol=1e-12)

import numpy as np
import pytest

from crstokes.analysis import elementwise_means
from crstokes.assembly import (assemble_divergence, assemble_load_modified, assemble_load_standard,
                               assemble_stiffness, assemble_system)
from crstokes.fespace import CrSpace
from crstokes.mesh import build_anisotropic_mesh, build_crossed_initial, build_uniform_mesh, refine_nvb_global
from crstokes.problems import gradient_case, smooth_case
from crstokes.smoothing import Smoother
from crstokes.solver import (ReducedSolver, SolverError, build_divfree_basis, closed_path_sums,
                             cross_validate, pressure_jumps, recover_pressure_alg1, saddle_residuals,
                             solve_reduced, solve_saddle_point)

MESHES = {
    "uniform": build_uniform_mesh(3),
    "anisotropic": build_anisotropic_mesh(2, 10),
    "nvb": refine_nvb_global(build_crossed_initial(), 4),
}


def _system(mesh, case, scheme):
    cr = CrSpace(mesh)
    b = assemble_load_standard(mesh, cr, case.load) if scheme == "std" else \
        assemble_load_modified(Smoother(mesh, cr=cr), case.load)
    return cr, assemble_system(mesh, cr, b)


def test_zero_load():
    T = MESHES["uniform"]
    cr = CrSpace(T)
    sys_ = assemble_system(T, cr, np.zeros(cr.dim))
    sol = solve_saddle_point(sys_)
    assert not sol.u.any() and not sol.p.any()
    assert not solve_reduced(build_divfree_basis(T, cr), sys_.stiffness, sys_.load).any()


@pytest.mark.parametrize("n,size", [(0, 1), (1, 9), (2, 49)])
def test_basis_size(n, size):
    T = build_uniform_mesh(n)
    cr = CrSpace(T)
    basis = build_divfree_basis(T, cr)
    assert len(basis) == size
    # N - (P - 1): the divergence maps onto the mean-zero constants
    assert size == cr.dim - (T.n_triangles - 1)
    assert np.linalg.matrix_rank(basis.matrix.toarray()) == size


@pytest.mark.parametrize("name", list(MESHES))
def test_basis_is_solenoidal(name):
    T = MESHES[name]
    cr = CrSpace(T)
    basis = build_divfree_basis(T, cr)
    D = assemble_divergence(T, cr)
    assert abs(D @ basis.matrix).max() < 1e-13
    # vortices only touch edges at their vertex
    vort = basis.matrix[:, basis.n_tangential:].tocsc()
    for j, z in enumerate(T.interior_vertices[:10]):
        rows = vort[:, j].nonzero()[0] // 2
        assert np.all(np.any(T.edges[cr.edges[rows]] == z, axis=1))


@pytest.mark.parametrize("name", list(MESHES))
def test_gradient_load_is_balanced_by_pressure(name):
    T = MESHES[name]
    case = gradient_case()
    cr, sys_ = _system(T, case, "mod")
    sol = solve_saddle_point(sys_)
    grads = cr.gradients(sol.u)
    assert np.sqrt(T.areas @ np.einsum("tij,tij->t", grads, grads)) < 1e-9
    means = elementwise_means(case.p, T)
    means -= T.areas @ means
    np.testing.assert_allclose(sol.p, means, atol=1e-9)
    fast = ReducedSolver(T, cr, sys_.stiffness).solve(sys_.load)
    np.testing.assert_allclose(fast.u, 0, atol=1e-9)
    np.testing.assert_allclose(fast.p, means, atol=1e-9)


def test_standard_scheme_is_not_pressure_robust():
    T = MESHES["uniform"]
    cr, sys_ = _system(T, gradient_case(), "std")
    sol = solve_saddle_point(sys_)
    assert np.abs(cr.gradients(sol.u)).max() > 1e-4


@pytest.mark.parametrize("name", list(MESHES))
@pytest.mark.parametrize("scheme", ["std", "mod"])
def test_three_routes_agree(name, scheme):
    T = MESHES[name]
    cr, sys_ = _system(T, smooth_case(), scheme)
    out = cross_validate(T, cr, sys_)
    assert max(out.values()) < 1e-8
    sol = solve_saddle_point(sys_)
    r1, r2 = saddle_residuals(sys_, sol)
    assert r1 < 1e-10 and r2 < 1e-10


def test_pressure_sweep_normalization_and_start_independence():
    T = MESHES["nvb"]
    cr, sys_ = _system(T, smooth_case(), "mod")
    u = solve_reduced(build_divfree_basis(T, cr), sys_.stiffness, sys_.load)
    p0 = recover_pressure_alg1(T, cr, u, sys_.stiffness, sys_.load)
    p1 = recover_pressure_alg1(T, cr, u, sys_.stiffness, sys_.load, start=T.n_triangles - 1)
    assert abs(T.areas @ p0) < 1e-14
    np.testing.assert_allclose(p0, p1, atol=1e-10)
    g = pressure_jumps(T, cr, u, sys_.stiffness, sys_.load)
    assert np.abs(closed_path_sums(T, cr, g)).max() < 1e-9 * max(1.0, np.abs(g).max())


def test_closed_paths_detect_non_solenoidal_velocity(rng):
    T = MESHES["uniform"]
    cr, sys_ = _system(T, smooth_case(), "std")
    u = rng.standard_normal(cr.dim)
    g = pressure_jumps(T, cr, u, sys_.stiffness, sys_.load)
    assert np.abs(closed_path_sums(T, cr, g)).max() > 1e-3


def test_cross_validate_raises_on_disagreement():
    T = build_uniform_mesh(2)
    cr, sys_ = _system(T, smooth_case(), "std")
    with pytest.raises(SolverError):
        cross_validate(T, cr, sys_, tol=-1.0)

"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""
import time

import numpy as np
import pytest

from crstokes.analysis import elementwise_means
from crstokes.assembly import (assemble_load_modified, assemble_load_standard, assemble_system)
from crstokes.experiments import (ExperimentConfig, run_anisotropic, run_rough_load,
                                  run_rough_pressure, run_smooth)
from crstokes.fespace import MACRO_INTERIOR_NODES, CrSpace
from crstokes.mesh import build_anisotropic_mesh, build_uniform_mesh
from crstokes.problems import gradient_case
from crstokes.smoothing import (Smoother, local_divergence, local_stokes_blocks,
                                local_stokes_solve, sk_stability_constant)
from crstokes.solver import solve_saddle_point
from helpers import p2_at_quadrature, p2_edge_moments, record, small_meshes

pytestmark = pytest.mark.slow

M_VALUES = (1, 10, 20, 40)
# reference ratios, rows n = 2..6, one column per m
GAMMA_U = {
    "std": [[1.37, 1.39, 1.39, 1.39], [1.48, 1.50, 1.50, 1.50], [1.54, 1.55, 1.55, 1.55],
            [1.57, 1.57, 1.57, 1.57], [1.58, 1.58, 1.58, 1.58]],
    "mod": [[2.07, 2.03, 2.03, 2.03], [2.06, 2.04, 2.04, 2.04], [2.05, 2.05, 2.05, 2.05],
            [2.05, 2.05, 2.05, 2.05], [2.05, 2.05, 2.05, 2.05]],
}
GAMMA_P = {
    "std": [[1.44, 1.57, 1.57, 1.57], [1.41, 1.41, 1.41, 1.41], [1.25, 1.22, 1.22, 1.21],
            [1.14, 1.11, 1.11, 1.11], [1.08, 1.09, 1.07, 1.07]],
    "mod": [[1.09, 1.12, 1.12, 1.12], [1.10, 1.11, 1.11, 1.11], [1.07, 1.07, 1.07, 1.07],
            [1.06, 1.06, 1.06, 1.06], [1.06, 1.07, 1.06, 1.06]],
}
# line-load differences for n = 3..7 and their rates for n = 4..7
DELTA_U = [6.092e-2, 3.673e-2, 2.135e-2, 1.206e-2, 6.670e-3]
DELTA_P = [4.339e-2, 2.571e-2, 1.455e-2, 8.021e-3, 4.349e-3]
EOC_U = [0.37, 0.39, 0.41, 0.43]
EOC_P = [0.38, 0.41, 0.43, 0.44]


@pytest.fixture(scope="module")
def tables():
    return {
        "smooth": run_smooth(ExperimentConfig("smooth")),
        "anisotropic": run_anisotropic(ExperimentConfig("anisotropic", m=M_VALUES)),
        "rough-pressure": run_rough_pressure(ExperimentConfig("rough-pressure")),
        "rough-load": run_rough_load(ExperimentConfig("rough-load")),
    }


def test_criterion_1_operator_identities(rng):
    worst = dict(moments=0.0, div=0.0, bilinear=0.0, trace=0.0, sk_inverse=0.0, sk_trace=0.0)
    for mesh in small_meshes().values():
        sm = Smoother(mesh)
        cr, p2 = sm.cr, sm.p2
        macro = sm.bary.macro_of_micro
        inner = np.zeros(p2.n_nodes, bool)
        inner[p2.macro_nodes[:, MACRO_INTERIOR_NODES].ravel()] = True
        for _ in range(50):
            v = rng.standard_normal(cr.dim)
            w = rng.standard_normal(cr.dim)
            Gv, Gw = cr.gradients(v), cr.gradients(w)
            norm_v = np.sqrt(mesh.areas @ np.einsum("tij,tij->t", Gv, Gv))
            norm_w = np.sqrt(mesh.areas @ np.einsum("tij,tij->t", Gw, Gw))
            nodal = sm.apply_nodal(v)
            mom = p2_edge_moments(p2, nodal)[cr.edges].ravel()
            worst["moments"] = max(worst["moments"], np.abs(mom - v).max() / (1 + norm_v))
            _, grads, qw = p2_at_quadrature(p2, nodal)
            div = np.einsum("sqii->sq", grads)
            worst["div"] = max(worst["div"], np.abs(div - cr.divergence(v)[macro][:, None]).max())
            lhs = np.einsum("sq,sqij,sij->", qw, grads, Gw[macro])
            rhs = mesh.areas @ np.einsum("tij,tij->t", Gw, Gv)
            worst["bilinear"] = max(worst["bilinear"], abs(lhs - rhs) / (norm_v * norm_w))
            worst["trace"] = max(worst["trace"], np.abs(nodal[p2.boundary_nodes]).max())
            corr = nodal - p2.full_nodal(sm.C_apply(v))
            worst["sk_trace"] = max(worst["sk_trace"], np.abs(corr[~inner]).max())
            # local right inverse on a random element
            k = rng.integers(mesh.n_triangles)
            c = mesh.vertices[mesh.triangles[k]]
            _, _, _, mean = local_stokes_blocks(c[None])
            r = rng.standard_normal(9)
            r -= (mean[0] @ r) / mean[0].sum()
            u = local_stokes_solve(c, r)
            worst["sk_inverse"] = max(worst["sk_inverse"],
                                      np.abs(local_divergence(c[None])[0] @ u - r).max() / np.abs(r).max())
    ok = (worst["moments"] <= 1e-10 and worst["div"] <= 1e-9 and worst["bilinear"] <= 1e-9
          and worst["trace"] == 0 and worst["sk_inverse"] <= 1e-9 and worst["sk_trace"] <= 1e-9)
    record(1, "operator identities", ok, ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_2_pressure_robustness():
    case = gradient_case()
    worst_u = worst_p = 0.0
    meshes = dict(small_meshes(), uniform3=build_uniform_mesh(3))
    for mesh in meshes.values():
        sm = Smoother(mesh)
        sol = solve_saddle_point(assemble_system(mesh, sm.cr, assemble_load_modified(sm, case.load)))
        G = sm.cr.gradients(sol.u)
        worst_u = max(worst_u, np.sqrt(mesh.areas @ np.einsum("tij,tij->t", G, G)))
        means = elementwise_means(case.p, mesh)
        worst_p = max(worst_p, np.abs(sol.p - (means - mesh.areas @ means)).max())
    T = meshes["uniform3"]
    cr = CrSpace(T)
    std = solve_saddle_point(assemble_system(T, cr, assemble_load_standard(T, cr, case.load)))
    G = cr.gradients(std.u)
    std_err = np.sqrt(T.areas @ np.einsum("tij,tij->t", G, G))
    ok = worst_u <= 1e-9 and worst_p <= 1e-9 and std_err > 0
    record(2, "pressure-robustness oracle", ok,
           f"mod |grad u|={worst_u:.1e}, |p - means|={worst_p:.1e}, std |grad u|={std_err:.2e}")
    assert ok


def _table_gap(table, name, reference):
    gap, where = 0.0, None
    for scheme, rows in reference.items():
        for i, n in enumerate(range(2, 7)):
            for j, m in enumerate(M_VALUES):
                d = abs(table.value(name, n, scheme, m) - rows[i][j])
                if d > gap:
                    gap, where = d, (scheme, n, m)
    return gap, where


def test_criterion_3_velocity_ratios(tables):
    gap, where = _table_gap(tables["anisotropic"], "gamma_u", GAMMA_U)
    ok = gap <= 0.05
    record(3, "velocity error ratios", ok, f"max deviation {gap:.3f} at {where}")
    assert ok


def test_criterion_4_pressure_ratios(tables):
    gap, where = _table_gap(tables["anisotropic"], "gamma_p", GAMMA_P)
    ok = gap <= 0.06
    record(4, "pressure error ratios", ok, f"max deviation {gap:.3f} at {where}")
    assert ok


def test_criterion_5_rough_pressure_rates(tables):
    t = tables["rough-pressure"]
    mod = t.fitted_rate("err_u_h1", "mod")
    std = t.fitted_rate("err_u_h1", "std")
    g = t.column("gamma_u", "mod")[-3:]
    ok = abs(mod - 0.5) <= 0.05 and abs(std - 0.25) <= 0.05 and g.min() >= 1.7 and g.max() <= 2.3
    record(5, "discontinuous pressure rates", ok,
           f"mod rate {mod:.3f}, std rate {std:.3f}, mod gamma in [{g.min():.3f}, {g.max():.3f}]")
    assert ok


def test_criterion_6_rough_load(tables):
    t = tables["rough-load"]
    du = np.array([t.value("delta_u", n) for n in range(3, 8)])
    dp = np.array([t.value("delta_p", n) for n in range(3, 8)])
    eu = np.array([t.value("eoc_u", n) for n in range(4, 8)])
    ep = np.array([t.value("eoc_p", n) for n in range(4, 8)])
    rel = max(np.abs(du / DELTA_U - 1).max(), np.abs(dp / DELTA_P - 1).max())
    gap = max(np.abs(eu - EOC_U).max(), np.abs(ep - EOC_P).max())
    ok = rel <= 0.2 and gap <= 0.05
    record(6, "line load differences", ok, f"delta rel. deviation {rel:.3f}, EOC deviation {gap:.3f}")
    assert ok


def test_criterion_7_solver_cross_validation(tables):
    checks = [c for t in tables.values() for c in t.checks.values()]
    agree = max(max(c["velocity"], c["pressure"]) for c in checks)
    loops = max(c["loops"] for c in checks)
    ok = len(checks) >= 4 and agree <= 1e-8 and loops <= 1e-9
    record(7, "solver cross-validation", ok, f"{len(checks)} checks, agreement {agree:.1e}, loops {loops:.1e}")
    assert ok


def test_criterion_8_scaling():
    sizes, times, nnz = [], [], {}
    for n in range(3, 7):
        T = build_uniform_mesh(n)
        best = np.inf
        for _ in range(5):
            t0 = time.perf_counter()
            E = Smoother(T).matrix
            best = min(best, time.perf_counter() - t0)
        sizes.append(E.shape[0])
        times.append(best)
        nnz[n] = int(np.diff(E.indptr).max())
    slope = np.polyfit(np.log(sizes), np.log(times), 1)[0]
    ok = abs(slope - 1) <= 0.2 and nnz[4] == nnz[5] == nnz[6]
    record(8, "smoother assembly scaling", ok, f"slope {slope:.3f}, max row nnz {nnz}")
    assert ok


def test_criterion_9_sk_anisotropy():
    ms = 2 ** np.arange(7)
    consts = []
    for m in ms:
        T = build_anisotropic_mesh(0, int(m))
        consts.append(max(sk_stability_constant(T.vertices[T.triangles[k]]) for k in range(T.n_triangles)))
    slope = np.polyfit(np.log(ms), np.log(consts), 1)[0]
    ok = abs(slope - 1) <= 0.2
    record(9, "local Stokes stability vs anisotropy", ok,
           f"slope {slope:.3f}, constants {np.round(consts, 2).tolist()}")
    assert ok

"""Crouzeix-Raviart discretization of the 2D Stokes problem with a pressure-robust variant."""
from .mesh import (MeshError, Triangulation, BarycentricMesh, build_uniform_mesh,
                   build_anisotropic_mesh, build_crossed_initial, refine_nvb_global,
                   barycentric_refine, mesh_stats)
from .fespace import CrSpace, P0Space, P2Space
from .smoothing import Smoother, assemble_E_matrix, sk_stability_constant
from .assembly import (LoadFunctional, UndefinedLoadError, assemble_stiffness,
                       assemble_divergence, assemble_load_standard, assemble_load_modified,
                       assemble_system)
from .solver import (SolverError, StokesSolution, solve_saddle_point, build_divfree_basis,
                     solve_reduced, recover_pressure_alg1, closed_path_sums)
from .analysis import AnalyticCase, ErrorReport, error_report, cross_mesh_difference, eoc

__version__ = "0.1.0"

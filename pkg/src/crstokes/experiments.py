"""Numerical experiments on the unit square and their result tables.

Four studies are available:

``smooth``
    polynomial solution on uniform meshes, ratios of errors to best errors;
``anisotropic``
    the same solution on stretched meshes ``T_n^m``;
``rough-pressure``
    discontinuous pressure on newest-vertex-bisection meshes, with rates;
``rough-load``
    a line load with unknown solution, differences of consecutive solutions.
"""
import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analysis import cross_mesh_difference, eoc, error_report
from .assembly import (SaddleSystem, UndefinedLoadError, assemble_divergence,
                       assemble_load_modified, assemble_load_standard, assemble_stiffness)
from .fespace import CrSpace
from .mesh import build_anisotropic_mesh, build_crossed_initial, refine_nvb_global
from .problems import rough_load_case, rough_pressure_case, smooth_case
from .smoothing import SK_REALIZATIONS, Smoother
from .solver import ReducedSolver, cross_validate

log = logging.getLogger(__name__)

EXPERIMENTS = ("smooth", "anisotropic", "rough-pressure", "rough-load")
SCHEMES = ("std", "mod")
DEFAULT_NMAX = {"smooth": 6, "anisotropic": 6, "rough-pressure": 8, "rough-load": 7}
DEFAULT_M = (1, 10, 20, 40)
COLUMNS = ("experiment", "n", "m", "scheme", "ntri", "err_u_h1", "best_u_h1", "gamma_u",
           "err_p_l2", "best_p_l2", "gamma_p", "delta_u", "delta_p", "eoc_u", "eoc_p")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n_max: Optional[int] = None
    m: tuple = DEFAULT_M
    scheme: Optional[str] = None
    sk: str = "direct"
    out: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.n_max is None:
            object.__setattr__(self, "n_max", DEFAULT_NMAX[self.experiment])
        if self.n_max < 2:
            raise ConfigError("n_max must be at least 2")
        if self.scheme is None:
            object.__setattr__(self, "scheme", "mod" if self.experiment == "rough-load" else "both")
        if self.scheme not in ("std", "mod", "both"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.experiment == "rough-load" and self.scheme != "mod":
            raise ConfigError("the standard load is undefined for the rough-load experiment; use --scheme mod")
        if self.sk not in SK_REALIZATIONS:
            raise ConfigError(f"unknown S_K realization {self.sk!r}")
        m = tuple(int(v) for v in self.m)
        if not m or any(v < 1 or v > 64 for v in m):
            raise ConfigError("m values must lie in 1..64")
        object.__setattr__(self, "m", m)
        if self.format not in ("csv", "pretty"):
            raise ConfigError(f"unknown format {self.format!r}")

    @property
    def schemes(self):
        return SCHEMES if self.scheme == "both" else (self.scheme,)


@dataclass
class ResultRow:
    experiment: str
    n: int
    m: Optional[int]
    scheme: str
    ntri: int
    err_u_h1: Optional[float] = None
    best_u_h1: Optional[float] = None
    gamma_u: Optional[float] = None
    err_p_l2: Optional[float] = None
    best_p_l2: Optional[float] = None
    gamma_p: Optional[float] = None
    delta_u: Optional[float] = None
    delta_p: Optional[float] = None
    eoc_u: Optional[float] = None
    eoc_p: Optional[float] = None


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


@dataclass
class ResultTable:
    """Rows ordered by ``m``, scheme and ``n``, plus solver cross-checks."""

    experiment: str
    rows: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)

    def select(self, scheme=None, m=None):
        return [r for r in self.rows
                if (scheme is None or r.scheme == scheme) and (m is None or r.m == m)]

    def column(self, name, scheme=None, m=None):
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name)
                         for r in self.select(scheme, m)])

    def value(self, name, n, scheme=None, m=None):
        for r in self.select(scheme, m):
            if r.n == n:
                return getattr(r, name)
        raise KeyError(f"no row with n={n}, scheme={scheme}, m={m}")

    def fitted_rate(self, name, scheme=None, m=None, steps=3):
        """Least-squares decay rate of column ``name`` against ``ntri`` over the last ``steps`` steps."""
        rows = [r for r in self.select(scheme, m) if getattr(r, name) is not None]
        rows = rows[-(steps + 1):]
        if len(rows) < 2:
            raise ValueError("need at least two rows")
        x = np.log([r.ntri for r in rows])
        y = np.log([getattr(r, name) for r in rows])
        return float(-np.polyfit(x, y, 1)[0])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([_cell(getattr(r, c)) for c in COLUMNS])
        return buf.getvalue()

    def to_pretty(self):
        used = [c for c in COLUMNS if any(getattr(r, c) is not None for r in self.rows)]
        cells = [[_pretty(getattr(r, c)) for c in used] for r in self.rows]
        widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(used)]
        lines = ["  ".join(c.rjust(wd) for c, wd in zip(used, widths))]
        lines += ["  ".join(v.rjust(wd) for v, wd in zip(row, widths)) for row in cells]
        return "\n".join(lines) + "\n"

    def render(self, fmt="csv"):
        return self.to_csv() if fmt == "csv" else self.to_pretty()


def _pretty(value):
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.3e}" if abs(value) < 1e-2 or abs(value) >= 1e3 else f"{value:.4f}"
    return str(value)


def _fill_eoc(rows, value_u, value_p):
    for prev, row in zip(rows, rows[1:]):
        vu, vp = getattr(prev, value_u), getattr(prev, value_p)
        wu, wp = getattr(row, value_u), getattr(row, value_p)
        sizes = [prev.ntri, row.ntri]
        if vu and wu:
            row.eoc_u = float(eoc([vu, wu], sizes)[0])
        if vp and wp:
            row.eoc_p = float(eoc([vp, wp], sizes)[0])


def _scheme_loads(mesh, cr, case, schemes, sk):
    loads = {}
    if "std" in schemes:
        loads["std"] = assemble_load_standard(mesh, cr, case.load)
    if "mod" in schemes:
        loads["mod"] = assemble_load_modified(Smoother(mesh, realization=sk, cr=cr), case.load)
    return loads


def _check(table, key, mesh, cr, stiffness, loads):
    D = assemble_divergence(mesh, cr)
    for scheme, b in loads.items():
        system = SaddleSystem(stiffness, D, mesh.areas.copy(), b)
        table.checks[(key, scheme)] = cross_validate(mesh, cr, system)


def _ratio_study(config, name, meshes, case, n_first):
    """Errors and best errors for ``case`` on a sequence of meshes."""
    table = ResultTable(name)
    for m, sequence in meshes:
        per_scheme = {s: [] for s in config.schemes}
        for n, mesh in zip(range(n_first, config.n_max + 1), sequence):
            log.info("%s: n=%d m=%s, %d triangles", name, n, m, mesh.n_triangles)
            cr = CrSpace(mesh)
            A = assemble_stiffness(mesh, cr, case.nu)
            loads = _scheme_loads(mesh, cr, case, config.schemes, config.sk)
            if n == n_first:
                _check(table, m, mesh, cr, A, loads)
            solver = ReducedSolver(mesh, cr, A)
            for scheme, b in loads.items():
                rep = error_report(case, mesh, cr, solver.solve(b))
                per_scheme[scheme].append(ResultRow(
                    name, n, m, scheme, mesh.n_triangles,
                    err_u_h1=rep.err_u, best_u_h1=rep.best_u, gamma_u=rep.gamma_u,
                    err_p_l2=rep.err_p, best_p_l2=rep.best_p, gamma_p=rep.gamma_p))
            del solver, loads
        for scheme in config.schemes:
            _fill_eoc(per_scheme[scheme], "err_u_h1", "err_p_l2")
            table.rows.extend(per_scheme[scheme])
    return table


def _anisotropic_meshes(n_max, m):
    for n in range(2, n_max + 1):
        yield build_anisotropic_mesh(n, m)


def run_smooth(config):
    """Ratios of errors to best errors on uniform meshes, ``n = 2 .. n_max``."""
    return _ratio_study(config, "smooth", [(1, _anisotropic_meshes(config.n_max, 1))],
                        smooth_case(), 2)


def run_anisotropic(config):
    """Ratios of errors to best errors on ``T_n^m`` for every ``m`` in the configuration."""
    meshes = [(m, _anisotropic_meshes(config.n_max, m)) for m in config.m]
    return _ratio_study(config, "anisotropic", meshes, smooth_case(), 2)


def hat_meshes(n_max):
    """Meshes ``T^_1 .. T^_n_max``: two bisection rounds per step from the crossed square."""
    T = build_crossed_initial()
    for _ in range(n_max):
        T = refine_nvb_global(T, 2)
        yield T


def breve_meshes(n_max):
    """Meshes ``T^_n`` bisected once more, ``n = 0 .. n_max``; each carries its genealogy."""
    T = refine_nvb_global(build_crossed_initial(), 1)
    yield T
    for _ in range(n_max):
        T = refine_nvb_global(T, 2)
        yield T


def run_rough_pressure(config):
    """Errors for the discontinuous pressure, ``n = 1 .. n_max``."""
    return _ratio_study(config, "rough-pressure", [(None, hat_meshes(config.n_max))],
                        rough_pressure_case(), 1)


def run_rough_load(config):
    """Differences of consecutive modified solutions for the line load."""
    if "std" in config.schemes:
        raise UndefinedLoadError("the standard load is undefined for the rough-load experiment")
    case = rough_load_case()
    table = ResultTable("rough-load")
    prev = None
    for n, mesh in enumerate(breve_meshes(config.n_max)):
        log.info("rough-load: n=%d, %d triangles", n, mesh.n_triangles)
        cr = CrSpace(mesh)
        A = assemble_stiffness(mesh, cr, case.nu)
        b = _scheme_loads(mesh, cr, case, ("mod",), config.sk)["mod"]
        if n == 0:
            _check(table, None, mesh, cr, A, {"mod": b})
        sol = ReducedSolver(mesh, cr, A).solve(b)
        grads = cr.gradients(sol.u)
        if prev is not None:
            du, dp = cross_mesh_difference(prev[0], mesh, prev[1], grads, prev[2], sol.p)
            table.rows.append(ResultRow("rough-load", n, None, "mod", mesh.n_triangles,
                                        delta_u=du, delta_p=dp))
        prev = (mesh, grads, sol.p)
    _fill_eoc(table.rows, "delta_u", "delta_p")
    return table


RUNNERS = {
    "smooth": run_smooth,
    "anisotropic": run_anisotropic,
    "rough-pressure": run_rough_pressure,
    "rough-load": run_rough_load,
}


def run(config):
    return RUNNERS[config.experiment](config)

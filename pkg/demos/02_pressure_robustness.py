"""A pure gradient load: the exact velocity is zero.

The modified load returns a zero discrete velocity; the standard one does not.
"""
import numpy as np

from crstokes import (CrSpace, Smoother, assemble_load_modified, assemble_load_standard,
                      assemble_system, build_uniform_mesh, solve_saddle_point)
from crstokes.problems import gradient_case

case = gradient_case()
for n in (2, 3, 4):
    T = build_uniform_mesh(n)
    sm = Smoother(T)
    cr = sm.cr
    out = []
    for b in (assemble_load_standard(T, cr, case.load), assemble_load_modified(sm, case.load)):
        u = solve_saddle_point(assemble_system(T, cr, b)).u
        G = cr.gradients(u)
        out.append(np.sqrt(T.areas @ np.einsum("tij,tij->t", G, G)))
    print(f"n={n}  |grad u| std={out[0]:.3e}  mod={out[1]:.1e}")

"""Error-to-best-error ratios for a smooth solution, on uniform and stretched meshes.

Run: python demos/01_smooth_ratios.py
"""
from crstokes.experiments import ExperimentConfig, run_anisotropic

table = run_anisotropic(ExperimentConfig("anisotropic", n_max=4, m=(1, 10)))
print(table.to_pretty())
for m in (1, 10):
    for scheme in ("std", "mod"):
        g = table.column("gamma_u", scheme, m)
        print(f"m={m:2d} {scheme}: velocity ratio settles near {g[-1]:.2f}")

"""Line load on x1 = 1/2: differences of consecutive modified solutions and their rates."""
from crstokes.experiments import ExperimentConfig, run_rough_load

table = run_rough_load(ExperimentConfig("rough-load", n_max=5))
print(table.to_pretty())

"""Success rate of the solvers as random 3-SAT gets denser.

Small scale so it finishes in a few minutes: N = 200, eight seeds per
clause density.  Prints the same CSV table the ``bench`` command writes,
with timing left in.

Run: python demos/difficulty_sweep.py [solver ...]
"""
import sys

from mpcsp.harness import ExperimentConfig, bench

solvers = sys.argv[1:] or ["bp-dec", "perturbed-bp", "perturbed-sp", "sp-dec-s"]
for i, solver in enumerate(solvers):
    config = ExperimentConfig(solver, seeds=list(range(8)), kind="ksat", n=200,
                              alphas=[3.0, 3.5, 3.8, 4.0, 4.2], params={"max_attempts": 2})
    table = bench(config)
    print(table if i == 0 else table.split("\n", 1)[1], end="")

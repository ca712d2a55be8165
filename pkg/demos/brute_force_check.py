"""
Checking the solver against exhaustive search
=============================================

On tiny grids every discrete labeling can be scored.  This gives the true
discrete optimum, against which the relaxed solution and its argmax are
compared.
"""

import numpy as np

from pseudoflow import PottsModel, SolverConfig, brute_force_discrete
from pseudoflow.solvers import potts

rng = np.random.default_rng(3)
for trial in range(5):
    model = PottsModel(rng.uniform(0, 1, (3, 2, 2)), rng.uniform(0, 0.5, (3, 2, 2)))
    best, e_opt, count = brute_force_discrete(model)
    u, report = potts.run(model, SolverConfig(tol=1e-11, max_iters=20000, energy_every=0))
    print(f"trial {trial}: {count} labelings, optimum {e_opt:.6f}, "
          f"relaxed {report.final_energy:.6f}, argmax {report.final_discrete_energy:.6f}, "
          f"same labeling: {np.array_equal(u.argmax(axis=0), best)}")

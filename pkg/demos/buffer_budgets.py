"""
Memory budgets
==============

Counting voxel-sized buffers for the pseudo-flow solvers against the
full-flow formulation that stores source, sink and spatial flows.
"""

from pseudoflow import buffer_budget
from pseudoflow.graph import dag_budget_counts

for k in (2, 5, 10, 100, 1000):
    b = buffer_budget(("potts", k), 3)
    print(f"Potts K={k:5d}: {b.pseudo:6d} vs {b.full:6d}  saves {100 * b.reduction:5.2f}%")

for n in (1, 3, 10):
    b = buffer_budget(("ishikawa", n), 3)
    print(f"Ishikawa N={n:2d}: {b.pseudo} vs {b.full}  saves {100 * b.reduction:5.2f}%")

# the saving for DAGs depends on the intermediate:end ratio
for ends, mids in ((4, 2), (10, 5), (10, 10), (10, 15), (100, 100)):
    b = dag_budget_counts(ends, mids, 3)
    print(f"DAG {ends} ends, {mids} mids: {b.pseudo} vs {b.full}  "
          f"saves {100 * b.reduction:5.2f}%")

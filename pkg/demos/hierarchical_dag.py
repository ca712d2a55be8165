"""
Hierarchical and DAG label orderings
====================================

A tree groups two labels into a super-object whose boundary is penalized on
its own.  A DAG then lets one label belong to two groups with split weight.
Only the end-labels are stored; the super-object labels are rebuilt from
them.
"""

import logging

import numpy as np

from pseudoflow import DagModel, SolverConfig, buffer_budget
from pseudoflow.energy import total_variation
from pseudoflow.solvers import dagmf

# unit weights on every tree edge are deliberate here; mute the lint
logging.getLogger("pseudoflow").setLevel(logging.ERROR)

rng = np.random.default_rng(1)
dims = (32, 32)
yy, xx = np.mgrid[0:32, 0:32]

# "organ" is split into two halves that are hard to tell apart
organ = (xx - 16) ** 2 + (yy - 16) ** 2 < 120
left = organ & (xx < 16)
data = {
    "left": np.where(left, 0.3, 0.7) + rng.normal(scale=0.25, size=dims),
    "right": np.where(organ & ~left, 0.3, 0.7) + rng.normal(scale=0.25, size=dims),
    "bg": np.where(organ, 0.8, 0.2) + rng.normal(scale=0.25, size=dims),
}
data = {k: np.clip(v, 0, None) for k, v in data.items()}

edges = [("S", "organ", 1.0), ("S", "bg", 1.0),
         ("organ", "left", 1.0), ("organ", "right", 1.0)]
for s_organ in (0.0, 0.4):
    model = DagModel(edges=edges, data=data,
                     smoothness={"organ": s_organ, "left": 0.05, "right": 0.05, "bg": 0.05},
                     dims=dims, kind="hmf")
    labels, report = dagmf.run(model, SolverConfig(max_iters=800, energy_every=0))
    tv = total_variation(labels["organ"], np.ones(dims))
    print(f"organ smoothness {s_organ}: organ boundary length {tv:.1f}, "
          f"energy {report.final_energy:.3f}")

print("buffers:", buffer_budget(model).as_dict())

# a DAG: "shared" belongs half to each group
dag = DagModel(
    edges=[("S", "g1", 0.5), ("S", "g2", 0.5), ("g1", "a", 1.0), ("g1", "shared", 1.0),
           ("g2", "shared", 1.0), ("g2", "b", 1.0)],
    data={n: rng.uniform(0, 1, dims) for n in ("a", "b", "shared")},
    smoothness={"g1": 0.2, "g2": 0.2, "a": 0.05, "b": 0.05, "shared": 0.05},
    dims=dims,
)
labels, report = dagmf.run(dag, SolverConfig(max_iters=300, energy_every=0))
print("g1 = a + shared:", np.allclose(labels["g1"], labels["a"] + labels["shared"]))

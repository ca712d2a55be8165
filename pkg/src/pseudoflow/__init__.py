"""Pseudo-flow continuous max-flow solvers for multi-region segmentation."""

from .energy import (
    brute_force_discrete,
    compare_runs,
    dag_energy,
    energy,
    ishikawa_energy,
    potts_energy,
)
from .fields import GridGeometry, divergence, gradient, project_ball
from .graph import (
    BufferBudget,
    DagModel,
    IshikawaModel,
    PottsModel,
    buffer_budget,
    path_weight,
    topo_orders,
    validate,
)
from .solvers import EnergyReport, NumericalCollapse, SolverConfig, solve

__version__ = "0.1.0"

"""Pseudo-flow solver for directed-acyclic label orderings.

Hierarchical (tree) models are the special case where every node has one
parent.  Only the end-labels hold explicit label fields; intermediate labels
are reconstructed on demand from the weighted-sum constraint.  Each
non-source node owns one flow field and one ``d`` buffer.  The ``d`` buffer
carries the top-down flow excess before the label update and the bottom-up
label mass after it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..energy import dag_energy, one_hot, reconstruct_labels
from ..fields import divergence
from ..graph import DagModel, topo_orders
from .common import (
    EnergyReport,
    SolverConfig,
    boltzmann,
    drive,
    flow_step,
    for_each,
    normalize,
    state_buffer_count,
)

__all__ = ["DagPlan", "DagState", "plan", "init", "accumulate_excess_topdown",
           "update_labels", "propagate_mass_and_update_flows", "iterate", "run"]


@dataclass(frozen=True)
class DagPlan:
    """Row layout and traversal lists derived once from a validated model."""

    order: tuple[str, ...]            # top-down, source first
    nodes: tuple[str, ...]            # non-source nodes, one row each in q and d
    ends: tuple[str, ...]             # end-labels, one row each in u
    row: dict                         # node -> row in q / d
    end_rows: tuple[int, ...]         # d row of each end-label
    down: tuple                       # (row, ((child_row, w), ...)) in order minus S
    up: tuple                         # (row, ((parent_row, w), ...)) in reverse minus S
    mid_rows: tuple[int, ...]


def plan(model: DagModel) -> DagPlan:
    model.check()
    order, reverse = topo_orders(model)
    src = model.source
    nodes = tuple(n for n in order if n != src)
    row = {n: i for i, n in enumerate(nodes)}
    ends = tuple(n for n in nodes if not model.children[n])
    down = tuple(
        (row[n], tuple((row[c], w) for c, w in model.children[n]))
        for n in nodes
    )
    up = tuple(
        (row[n], tuple((row[p], w) for p, w in model.parents[n] if p != src))
        for n in reverse if n != src
    )
    mids = tuple(row[n] for n in nodes if model.children[n])
    return DagPlan(tuple(order), nodes, ends, row, tuple(row[n] for n in ends),
                   down, up, mids)


@dataclass
class DagState:
    u: np.ndarray  # (n_end, *dims)
    q: np.ndarray  # (n_nodes, ndim, *dims)
    d: np.ndarray  # (n_nodes, *dims)
    a: np.ndarray  # (*dims)
    c: float
    plan: DagPlan
    iteration: int = 0
    flow_change: float = 0.0

    def buffer_count(self) -> int:
        return state_buffer_count((self.u, self.q, self.d, self.a), self.a.size)


def init(model: DagModel, config: SolverConfig) -> DagState:
    p = plan(model)
    dims = model.dims
    n_end, n = len(p.ends), len(p.nodes)
    return DagState(
        u=np.full((n_end,) + dims, 1.0 / n_end),
        q=np.zeros((n, len(dims)) + dims),
        d=np.zeros((n,) + dims),
        a=np.zeros(dims),
        c=config.c,
        plan=p,
    )


def accumulate_excess_topdown(state: DagState, model: DagModel) -> DagState:
    """``d_L <- div q_L (+ D_L)``, then push ``w d_L`` into every child in
    top-down order."""
    p, d, q = state.plan, state.d, state.q
    for i in range(len(p.nodes)):
        divergence(q[i], out=d[i])
    for name, r in zip(p.ends, p.end_rows):
        d[r] += model.data[name]
    for r, kids in p.down:
        for cr, w in kids:
            d[cr] += w * d[r]
    return state


def update_labels(state: DagState, model: DagModel, config: SolverConfig) -> DagState:
    """Multiplicative end-label update; leaves the unnormalized masses in
    ``d`` and the normalized labels in ``u``."""
    p, u, d, a, c = state.plan, state.u, state.d, state.a, state.c
    rows = p.end_rows
    a[...] = d[rows[0]]
    for r in rows[1:]:
        np.minimum(a, d[r], out=a)

    def one(j):
        r = rows[j]
        u[j] *= boltzmann(d[r], a, c)
        d[r] = u[j]

    for_each(one, len(rows), config.workers)
    normalize(u, a)
    return state


def propagate_mass_and_update_flows(state: DagState, model: DagModel,
                                    config: SolverConfig) -> DagState:
    """Bottom-up: project each node's flow against the gradient of its mass,
    then add the weighted mass to its non-source parents."""
    p, d, q = state.plan, state.d, state.q
    step = state.c * config.tau
    for r in p.mid_rows:
        d[r] = 0.0
    bounds = [model.smoothness[n] for n in p.nodes]
    move = 0.0
    for r, parents in p.up:
        move = max(move, flow_step(q[r], d[r], bounds[r], step))
        for pr, w in parents:
            d[pr] += w * d[r]
    state.flow_change = move
    return state


def iterate(state: DagState, model: DagModel, config: SolverConfig) -> DagState:
    accumulate_excess_topdown(state, model)
    update_labels(state, model, config)
    propagate_mass_and_update_flows(state, model, config)
    state.iteration += 1
    return state


def _energies(model):
    k = len(model.end_labels)

    def f(state):
        hard = one_hot(np.argmax(state.u, axis=0), k)
        return dag_energy(model, hard), dag_energy(model, state.u)

    return f


def run(model: DagModel, config: SolverConfig | None = None,
        state: DagState | None = None) -> tuple[dict[str, np.ndarray], EnergyReport]:
    """Iterate to convergence.

    Returns
    -------
    labels : dict
        Label field of every node, the source and intermediates included.
        The end-label fields are the solver's own buffers; the rest are
        reconstructed.
    report : EnergyReport
    """
    config = config or SolverConfig()
    state = state or init(model, config)
    report = drive(state, iterate, model, config, _energies(model))
    return reconstruct_labels(model, state.u), report


def end_label_stack(model: DagModel, labels: dict[str, np.ndarray]) -> np.ndarray:
    return np.stack([labels[n] for n in model.end_labels])

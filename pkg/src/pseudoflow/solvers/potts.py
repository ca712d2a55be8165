"""Pseudo-flow solver for the continuous Potts model.

Each iteration performs, for every label ``L``:

1. ``u_L <- u_L * exp(-(D_L + div q_L) / c)``
2. ``q_L <- Proj_{|q_L| <= S_L}(q_L - c tau grad u_L)`` on the *unnormalized*
   labels from step 1
3. ``a <- sum_L u_L``
4. ``u_L <- u_L / a``

The exponent is shifted by its per-voxel minimum over labels before
exponentiation.  The minimum is held in ``a`` (free until step 3), so the
state is exactly ``K`` labels, ``K * ndim`` flow components and one
accumulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..energy import potts_energy
from ..fields import divergence
from ..graph import PottsModel
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

__all__ = ["PottsState", "init", "iterate", "run", "argmax_labeling"]


@dataclass
class PottsState:
    u: np.ndarray  # (K, *dims)
    q: np.ndarray  # (K, ndim, *dims)
    a: np.ndarray  # (*dims)
    c: float
    iteration: int = 0
    flow_change: float = 0.0

    def buffer_count(self) -> int:
        return state_buffer_count((self.u, self.q, self.a), self.a.size)


def init(model: PottsModel, config: SolverConfig) -> PottsState:
    if model.n_labels < 2:
        raise ValueError("Potts model needs at least 2 labels")
    k, dims = model.n_labels, model.dims
    return PottsState(
        u=np.full((k,) + dims, 1.0 / k),
        q=np.zeros((k, len(dims)) + dims),
        a=np.zeros(dims),
        c=config.c,
    )


def iterate(state: PottsState, model: PottsModel, config: SolverConfig) -> PottsState:
    u, q, a, c = state.u, state.q, state.a, state.c
    D, S = model.data, model.smoothness
    k = u.shape[0]

    # per-voxel shift, parked in the accumulator
    for L in range(k):
        ex = D[L] + divergence(q[L])
        if L == 0:
            a[...] = ex
        else:
            np.minimum(a, ex, out=a)

    def labels(L):
        u[L] *= boltzmann(D[L] + divergence(q[L]), a, c)

    for_each(labels, k, config.workers)

    step = c * config.tau

    def flows(L):
        return flow_step(q[L], u[L], S[L], step)

    state.flow_change = max(for_each(flows, k, config.workers))

    normalize(u, a)
    state.iteration += 1
    return state


def argmax_labeling(u: np.ndarray) -> np.ndarray:
    """Index of the largest label per voxel; ties go to the lowest index."""
    return np.argmax(u, axis=0)


def _energies(model):
    from ..energy import one_hot

    def f(state):
        hard = one_hot(argmax_labeling(state.u), model.n_labels)
        return potts_energy(model, hard), potts_energy(model, state.u)

    return f


def run(model: PottsModel, config: SolverConfig | None = None,
        state: PottsState | None = None) -> tuple[np.ndarray, EnergyReport]:
    """Iterate to convergence; return the relaxed labels and the traces."""
    config = config or SolverConfig()
    state = state or init(model, config)
    report = drive(state, iterate, model, config, _energies(model))
    return state.u, report

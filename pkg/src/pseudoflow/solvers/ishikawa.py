"""Pseudo-flow solver for linearly ordered (Ishikawa) label models.

With labels ``L_0 .. L_N`` the flow ``q_i`` (``i >= 1``) regularizes the
cumulative region ``L_i ∪ ... ∪ L_N``.  The excess of label ``i`` is the
prefix sum of the flow divergences up to ``i`` plus its data term, and the
mass driving ``q_i`` is the suffix sum of the unnormalized label masses from
``i`` on.  The excess of ``L_0`` is just ``D_0`` and is never stored, giving
``(N+1) + 1 + N + ndim N`` buffers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..energy import ishikawa_energy, one_hot
from ..fields import divergence
from ..graph import IshikawaModel
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

__all__ = ["IshikawaState", "init", "iterate", "run"]


@dataclass
class IshikawaState:
    u: np.ndarray  # (N+1, *dims)
    q: np.ndarray  # (N, ndim, *dims), q[i-1] belongs to level i
    d: np.ndarray  # (N, *dims), d[i-1] belongs to level i
    a: np.ndarray
    c: float
    iteration: int = 0
    flow_change: float = 0.0

    def buffer_count(self) -> int:
        return state_buffer_count((self.u, self.q, self.d, self.a), self.a.size)


def init(model: IshikawaModel, config: SolverConfig) -> IshikawaState:
    n, dims = model.levels, model.dims
    if n < 1:
        raise ValueError("Ishikawa model needs at least one level")
    state = IshikawaState(
        u=np.full((n + 1,) + dims, 1.0 / (n + 1)),
        q=np.zeros((n, len(dims)) + dims),
        d=np.zeros((n,) + dims),
        a=np.zeros(dims),
        c=config.c,
    )
    assert state.buffer_count() == (n + 1) + 1 + n + len(dims) * n
    return state


def iterate(state: IshikawaState, model: IshikawaModel,
            config: SolverConfig) -> IshikawaState:
    u, q, d, a, c = state.u, state.q, state.d, state.a, state.c
    D, S = model.data, model.smoothness
    n = q.shape[0]

    # prefix accumulation of flow divergences
    divergence(q[0], out=d[0])
    for i in range(1, n):
        divergence(q[i], out=d[i])
        d[i] += d[i - 1]
    for i in range(n):
        d[i] += D[i + 1]

    # shift by the per-voxel minimum; D_0 stands in for the unstored d_0
    a[...] = D[0]
    for i in range(n):
        np.minimum(a, d[i], out=a)
    u[0] *= boltzmann(D[0], a, c)

    def labels(i):
        u[i + 1] *= boltzmann(d[i], a, c)
        d[i] = u[i + 1]

    for_each(labels, n, config.workers)
    normalize(u, a)

    # suffix accumulation of unnormalized masses
    for i in range(n - 2, -1, -1):
        d[i] += d[i + 1]

    step = c * config.tau

    def flows(i):
        return flow_step(q[i], d[i], S[i], step)

    state.flow_change = max(for_each(flows, n, config.workers))
    state.iteration += 1
    return state


def _energies(model):
    k = model.n_labels

    def f(state):
        hard = one_hot(np.argmax(state.u, axis=0), k)
        return ishikawa_energy(model, hard), ishikawa_energy(model, state.u)

    return f


def run(model: IshikawaModel, config: SolverConfig | None = None,
        state: IshikawaState | None = None) -> tuple[np.ndarray, EnergyReport]:
    config = config or SolverConfig()
    state = state or init(model, config)
    report = drive(state, iterate, model, config, _energies(model))
    return state.u, report

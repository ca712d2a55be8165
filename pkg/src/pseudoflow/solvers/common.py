"""Pieces shared by the Potts, DAG and Ishikawa pseudo-flow solvers."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..fields import gradient, pointwise_norm, project_ball


class NumericalCollapse(FloatingPointError):
    """The label normalizer vanished at some voxel."""

    def __init__(self, voxel):
        self.voxel = voxel
        super().__init__(f"label normalizer is zero at voxel {voxel}")


@dataclass
class SolverConfig:
    """Solver parameters.

    Parameters
    ----------
    c : float
        Weight of the entropic proximity term.  Smaller values sharpen the
        labels per step.
    tau : float
        Flow step size; the flow update moves by ``c * tau`` times a label
        gradient.  Keep ``tau`` at or below ``1 / (4 * ndim)``.
    max_iters : int
        Iteration cap.
    tol : float
        Stop once both the largest per-voxel label change and the largest
        pointwise flow move drop below this.
    anneal : float
        Factor in ``(0, 1]`` applied to ``c`` every ``anneal_every``
        iterations, floored at ``c_min``.  ``1`` disables annealing.
    energy_every : int
        Record the energy traces every this many iterations (the last
        iteration is always recorded).  ``0`` records only the final state.
    workers : int
        Threads used for per-label loops.  Results do not depend on it.
    """

    c: float = 0.25
    tau: float = 0.1
    max_iters: int = 5000
    tol: float = 1e-9
    anneal: float = 1.0
    anneal_every: int = 100
    c_min: float = 1e-3
    energy_every: int = 1
    workers: int = 1

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if not 0 < self.anneal <= 1:
            raise ValueError(f"anneal must lie in (0, 1], got {self.anneal}")
        if self.max_iters < 1 or self.anneal_every < 1 or self.workers < 1:
            raise ValueError("max_iters, anneal_every and workers must be >= 1")
        if not self.c_min > 0:
            raise ValueError("c_min must be positive")

    def replace(self, **changes) -> "SolverConfig":
        return SolverConfig(**{**asdict(self), **changes})

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class EnergyReport:
    """Per-iteration traces from a solver run.

    All trace lists have the same length; ``iteration[k]`` is the 1-based
    iteration at which entry ``k`` was recorded.
    """

    iteration: list[int] = field(default_factory=list)
    discrete_energy: list[float] = field(default_factory=list)
    relaxed_energy: list[float] = field(default_factory=list)
    label_change: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    c_final: float = math.nan
    buffers: int = 0

    def record(self, it: int, discrete: float, relaxed: float, change: float):
        if not (math.isfinite(discrete) and math.isfinite(relaxed)):
            raise FloatingPointError(f"non-finite energy at iteration {it}")
        self.iteration.append(it)
        self.discrete_energy.append(float(discrete))
        self.relaxed_energy.append(float(relaxed))
        self.label_change.append(float(change))

    @property
    def final_energy(self) -> float:
        return self.relaxed_energy[-1]

    @property
    def final_discrete_energy(self) -> float:
        return self.discrete_energy[-1]

    def as_dict(self) -> dict:
        return asdict(self)


def boltzmann(excess: np.ndarray, shift: np.ndarray, c: float) -> np.ndarray:
    """``exp(-(excess - shift) / c)``; with ``shift`` the per-voxel minimum
    the result lies in ``(0, 1]``."""
    e = np.subtract(excess, shift)
    e *= -1.0 / c
    return np.exp(e, out=e)


def flow_step(q: np.ndarray, mass: np.ndarray, bound: np.ndarray, step: float) -> float:
    """In place ``q <- Proj_{|q| <= bound}(q - step * grad(mass))``.

    Returns the largest pointwise move ``max |q_new - q_old|``.  The old
    flow is kept only in a transient scratch array.
    """
    old = q.copy()
    g = gradient(mass)
    g *= step
    q -= g
    project_ball(q, bound, out=q)
    old -= q
    return float(pointwise_norm(old).max())


def normalize(u: np.ndarray, a: np.ndarray) -> None:
    """``a <- sum_L u_L``; ``u_L <- u_L / a``.  The sum runs over the leading
    axis in fixed order."""
    np.sum(u, axis=0, out=a)
    bad = ~(a > 0) | ~np.isfinite(a)
    if bad.any():
        raise NumericalCollapse(tuple(int(i) for i in np.argwhere(bad)[0]))
    u /= a


def label_change_bound(a: np.ndarray) -> float:
    """Bound on ``max |u_new - u_old|`` from the normalizer alone.

    After a shifted multiplicative update every factor is at most one, so
    ``a = sum_L u_old e_L <= 1`` and ``sum_L |u_new - u_old| <= 2 (1 - a) / a``.
    Since the changes sum to zero no single label moves more than half of
    that, ``(1 - a) / a``.  This needs no copy of the previous labels.
    """
    gap = np.maximum(1.0 - a, 0.0) / a
    return float(gap.max())


def for_each(fn: Callable[[int], object], count: int, workers: int) -> list:
    """Run ``fn(i)`` for ``i in range(count)``; threads touch disjoint rows.
    Results come back in index order."""
    if workers <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(workers, count)) as pool:
        return list(pool.map(fn, range(count)))


def state_buffer_count(arrays, voxels: int) -> int:
    """Number of voxel-sized buffers held by ``arrays``."""
    total = sum(int(np.asarray(x).size) for x in arrays)
    if total % voxels:
        raise AssertionError("state holds a buffer that is not voxel-sized")
    return total // voxels


def drive(state, iterate, model, config: SolverConfig, energies) -> EnergyReport:
    """Generic outer loop: iterate, trace, test convergence, anneal.

    ``energies(state)`` returns ``(discrete, relaxed)``.
    """
    report = EnergyReport()
    every = config.energy_every
    for it in range(1, config.max_iters + 1):
        iterate(state, model, config)
        change = label_change_bound(state.a)
        # saturated labels barely move while the flows are still travelling
        done = change < config.tol and state.flow_change < config.tol
        if done or it == config.max_iters or (every and it % every == 0):
            report.record(it, *energies(state), change)
        report.iterations = it
        if done:
            report.converged = True
            break
        if config.anneal < 1 and it % config.anneal_every == 0:
            state.c = max(state.c * config.anneal, config.c_min)
    report.c_final = state.c
    report.buffers = state.buffer_count()
    return report

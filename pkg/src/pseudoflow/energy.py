"""Discretized energies, an exhaustive oracle and run comparison.

All energies use the same forward-difference gradient and Euclidean
per-voxel norm as the solvers, so optimality claims compare like with like.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .fields import gradient, pointwise_norm
from .graph import DagModel, IshikawaModel, PottsModel, path_weight, topo_orders

__all__ = [
    "potts_energy",
    "ishikawa_energy",
    "dag_energy",
    "energy",
    "reconstruct_labels",
    "one_hot",
    "brute_force_discrete",
    "compare_runs",
    "RunComparison",
    "check_simplex",
]

SIMPLEX_TOL = 1e-6


def check_simplex(u: np.ndarray, tol: float = SIMPLEX_TOL) -> None:
    """Raise ``ValueError`` unless ``u`` is non-negative and sums to one."""
    if np.any(u < -tol):
        raise ValueError(f"labeling has negative entries (min {u.min():.3g})")
    err = np.abs(u.sum(axis=0) - 1.0).max()
    if err > tol:
        raise ValueError(f"labeling violates the simplex constraint by {err:.3g}")


def total_variation(u: np.ndarray, weight: np.ndarray) -> float:
    return float(np.sum(weight * pointwise_norm(gradient(u))))


def potts_energy(model: PottsModel, u: np.ndarray) -> float:
    """``sum_L sum_x D_L u_L + S_L |grad u_L|`` for a relaxed or one-hot ``u``."""
    u = np.asarray(u, dtype=float)
    if u.shape != model.data.shape:
        raise ValueError(f"labeling shape {u.shape} != {model.data.shape}")
    check_simplex(u)
    e = float(np.sum(model.data * u))
    for L in range(model.n_labels):
        e += total_variation(u[L], model.smoothness[L])
    return e


def ishikawa_energy(model: IshikawaModel, u: np.ndarray) -> float:
    """Data term on each label plus smoothness on every cumulative region
    ``L_i ∪ ... ∪ L_N``, ``i >= 1``."""
    u = np.asarray(u, dtype=float)
    if u.shape != model.data.shape:
        raise ValueError(f"labeling shape {u.shape} != {model.data.shape}")
    check_simplex(u)
    e = float(np.sum(model.data * u))
    cumulative = np.cumsum(u[::-1], axis=0)[::-1]
    for i in range(1, model.n_labels):
        e += total_variation(cumulative[i], model.smoothness[i - 1])
    return e


def reconstruct_labels(model: DagModel, u_end: np.ndarray) -> dict[str, np.ndarray]:
    """Labels of every node from the end-label fields.

    Non-end nodes follow ``u_L = sum_{L' in L.C} w_(L,L') u_L'``, evaluated
    bottom-up; this includes the source.
    """
    ends = model.end_labels
    labels = {n: np.asarray(u_end[i], dtype=float) for i, n in enumerate(ends)}
    _, reverse = topo_orders(model)
    for n in reverse:
        kids = model.children[n]
        if not kids:
            continue
        acc = np.zeros(model.dims)
        for c, w in kids:
            acc += w * labels[c]
        labels[n] = acc
    return labels


def dag_energy(model: DagModel, u_end: np.ndarray) -> float:
    """Energy of a DAG labeling given its end-label fields (in
    ``model.end_labels`` order)."""
    u_end = np.asarray(u_end, dtype=float)
    expect = (len(model.end_labels),) + model.dims
    if u_end.shape != expect:
        raise ValueError(f"labeling shape {u_end.shape} != {expect}")
    check_simplex(u_end)
    labels = reconstruct_labels(model, u_end)
    e = 0.0
    for n, f in model.data.items():
        e += float(np.sum(f * labels[n]))
    for n, s in model.smoothness.items():
        e += total_variation(labels[n], s)
    return e


def energy(model, u: np.ndarray) -> float:
    if isinstance(model, PottsModel):
        return potts_energy(model, u)
    if isinstance(model, IshikawaModel):
        return ishikawa_energy(model, u)
    if isinstance(model, DagModel):
        return dag_energy(model, u)
    raise TypeError(f"not a label model: {type(model).__name__}")


def one_hot(labels: np.ndarray, n_labels: int) -> np.ndarray:
    labels = np.asarray(labels)
    return (np.arange(n_labels).reshape((-1,) + (1,) * labels.ndim) == labels).astype(float)


# ------------------------------------------------------------------ brute force


def _batched_tv(u: np.ndarray) -> np.ndarray:
    """Per-voxel |grad u| for a batch ``(M, *dims)``; same stencil as
    `gradient`."""
    sq = np.zeros_like(u)
    for axis in range(1, u.ndim):
        d = np.diff(u, axis=axis)
        pad = [(0, 0)] * u.ndim
        pad[axis] = (0, 1)
        sq += np.pad(d, pad) ** 2
    return np.sqrt(sq)


def _node_weights(model) -> tuple[list[str], np.ndarray, list[str]]:
    """End-label names, matrix ``W[node, end]`` and scored node names.

    Uses the path-weight definition directly, independent of the solvers'
    bottom-up accumulation.
    """
    if isinstance(model, PottsModel):
        k = model.n_labels
        return list(model.names), np.eye(k), list(model.names)
    if isinstance(model, IshikawaModel):
        k = model.n_labels
        # cumulative region i = labels i..N
        return list(model.names), np.triu(np.ones((k, k))), list(model.names)
    ends = model.end_labels
    nodes = [n for n in topo_orders(model)[0] if n != model.source]
    W = np.array([[path_weight(model, n, b) for b in ends] for n in nodes])
    return ends, W, nodes


def _fields(model, ends, nodes):
    """Data terms per end-label and smoothness per scored node."""
    if isinstance(model, PottsModel):
        return model.data, model.smoothness
    if isinstance(model, IshikawaModel):
        sm = np.concatenate([np.zeros((1,) + model.dims), model.smoothness])
        return model.data, sm
    D = np.stack([model.data[n] for n in ends])
    S = np.stack([model.smoothness[n] for n in nodes])
    return D, S


def brute_force_discrete(model, max_states: int = 10**6, chunk: int = 4096):
    """Exhaustive minimum over one-hot labelings.

    Labelings are enumerated lexicographically over voxels in storage order
    (first axis fastest); the first minimum wins ties.

    Returns
    -------
    labels : ndarray of int
        Optimal end-label index per voxel.
    energy : float
        Its energy.
    count : int
        Number of labelings enumerated.

    Raises
    ------
    ValueError
        If ``n_labels ** n_voxels`` exceeds ``max_states``.
    """
    ends, W, nodes = _node_weights(model)
    D, S = _fields(model, ends, nodes)
    dims = D.shape[1:]
    k = len(ends)
    nvox = int(np.prod(dims))
    total = k**nvox
    if total > max_states:
        raise ValueError(f"{k}^{nvox} = {total} labelings exceed the guard of {max_states}")

    best_e, best = np.inf, None
    flat_order = np.arange(nvox).reshape(dims, order="F")
    product = itertools.product(range(k), repeat=nvox)
    done = 0
    while done < total:
        block = np.array(list(itertools.islice(product, chunk)), dtype=np.intp)
        m = block.shape[0]
        # storage order: enumeration index j maps to flat F-order voxel j
        lab = block[:, flat_order]
        hot = (lab[:, None] == np.arange(k).reshape((1, k) + (1,) * len(dims))).astype(float)
        e = (hot * D).reshape(m, -1).sum(axis=1)
        nodes_u = np.tensordot(hot, W, axes=([1], [1]))  # (m, *dims, nodes)
        nodes_u = np.moveaxis(nodes_u, -1, 1)  # (m, nodes, *dims)
        flat = nodes_u.reshape((m * len(nodes),) + dims)
        tv = _batched_tv(flat).reshape(nodes_u.shape)
        e = e + (tv * S).reshape(m, -1).sum(axis=1)
        i = int(np.argmin(e))
        if e[i] < best_e:
            best_e, best = float(e[i]), lab[i].copy()
        done += m
    return best, best_e, total


# ------------------------------------------------------------------ comparison


@dataclass(frozen=True)
class RunComparison:
    energy_gap: float
    agreement: float
    max_label_difference: float


def compare_runs(report_a, labeling_a, report_b, labeling_b) -> RunComparison:
    """Relative energy gap, argmax agreement and largest field difference.

    The energy gap is ``|E_a - E_b| / min(|E_a|, |E_b|)``.  Reports may be
    `EnergyReport` objects or plain final energies.
    """
    ua = np.asarray(labeling_a, dtype=float)
    ub = np.asarray(labeling_b, dtype=float)
    if ua.shape != ub.shape:
        raise ValueError(f"labelings differ in shape: {ua.shape} vs {ub.shape}")
    ea = getattr(report_a, "final_energy", report_a)
    eb = getattr(report_b, "final_energy", report_b)
    scale = min(abs(ea), abs(eb))
    if ea == eb:
        gap = 0.0
    else:
        gap = abs(ea - eb) / scale if scale > 0 else np.inf
    agree = float(np.mean(np.argmax(ua, axis=0) == np.argmax(ub, axis=0)))
    return RunComparison(float(gap), agree, float(np.abs(ua - ub).max()))

"""Label-ordering structures and their derived quantities.

A `DagModel` is the general form: a source node, weighted parent->child
edges, data terms on the childless end-labels and smoothness fields on every
other non-source node.  `PottsModel` and `IshikawaModel` are the two
dedicated special cases; both convert to an equivalent `DagModel` (a star
and a caterpillar chain respectively).
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "DagModel",
    "PottsModel",
    "IshikawaModel",
    "BufferBudget",
    "validate",
    "topo_orders",
    "path_weight",
    "buffer_budget",
    "reachable",
]


def _as_field(value, dims) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape == dims:
        return arr
    try:
        return np.broadcast_to(arr, dims).copy()
    except ValueError:
        return arr  # left for validate() to report


@dataclass
class DagModel:
    """Directed acyclic label ordering with per-node fields.

    Parameters
    ----------
    edges : iterable of (parent, child, weight)
        Weighted ordering edges ``w_(parent, child)``.
    data : mapping
        Data term per end-label.  Scalars are broadcast to ``dims``.
    smoothness : mapping
        Non-negative smoothness field per non-source node.  Nodes without an
        entry get zero smoothness.
    dims : tuple of int
        Grid extents shared by every field.
    source : str
        Identifier of the root node.
    """

    edges: list[tuple[str, str, float]]
    data: dict[str, np.ndarray]
    smoothness: dict[str, np.ndarray]
    dims: tuple[int, ...]
    source: str = "S"
    kind: str = "dagmf"

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.edges = [(str(p), str(c), float(w)) for p, c, w in self.edges]
        self.data = {str(k): _as_field(v, self.dims) for k, v in self.data.items()}
        nodes = self.nodes
        sm = {str(k): _as_field(v, self.dims) for k, v in self.smoothness.items()}
        for n in nodes:
            if n != self.source and n not in sm:
                sm[n] = np.zeros(self.dims)
        self.smoothness = sm

    @property
    def nodes(self) -> list[str]:
        seen = {self.source}
        for p, c, _ in self.edges:
            seen.update((p, c))
        seen.update(self.data)
        return sorted(seen)

    @cached_property
    def children(self) -> dict[str, list[tuple[str, float]]]:
        out: dict[str, list[tuple[str, float]]] = {n: [] for n in self.nodes}
        for p, c, w in self.edges:
            out[p].append((c, w))
        for n in out:
            out[n].sort()
        return out

    @cached_property
    def parents(self) -> dict[str, list[tuple[str, float]]]:
        out: dict[str, list[tuple[str, float]]] = {n: [] for n in self.nodes}
        for p, c, w in self.edges:
            out[c].append((p, w))
        for n in out:
            out[n].sort()
        return out

    @property
    def end_labels(self) -> list[str]:
        """Childless nodes in top-down topological order."""
        order, _ = topo_orders(self)
        return [n for n in order if n != self.source and not self.children[n]]

    @property
    def intermediates(self) -> list[str]:
        order, _ = topo_orders(self)
        return [n for n in order if n != self.source and self.children[n]]

    @property
    def ndim(self) -> int:
        return len(self.dims)

    def weight(self, parent: str, child: str) -> float:
        return sum(w for c, w in self.children[parent] if c == child)

    def is_tree(self) -> bool:
        return all(len(self.parents[n]) == 1 for n in self.nodes if n != self.source)

    def check(self) -> "DagModel":
        """Raise ``ValueError`` listing every violated invariant."""
        problems = validate(self)
        if problems:
            raise ValueError("invalid label model:\n  " + "\n  ".join(problems))
        return self


def validate(model: DagModel) -> list[str]:
    """Return every structural problem of ``model``; empty means valid.

    Weight rows that do not sum to one are logged as warnings only.
    """
    problems: list[str] = []
    nodes = model.nodes
    src = model.source
    dims = model.dims

    if not 1 <= len(dims) <= 3 or any(n < 1 for n in dims):
        problems.append(f"bad grid extents {dims}")

    for p, c, w in model.edges:
        if not (w > 0 and math.isfinite(w)):
            problems.append(f"edge {p}->{c} has non-positive weight {w}")
        if p == c:
            problems.append(f"self-loop on {p}")
    if model.parents[src]:
        problems.append(f"source {src} has parents {[p for p, _ in model.parents[src]]}")

    cyc = _cycle_nodes(model)
    if cyc:
        problems.append(f"cycle through nodes {sorted(cyc)}")

    reach = reachable(model, src)
    for n in nodes:
        if n != src and n not in reach:
            problems.append(f"node {n} is not reachable from source {src}")

    if not model.children[src]:
        problems.append(f"source {src} has no children")
    for n in nodes:
        if n == src:
            continue
        is_end = not model.children[n]
        if is_end and n not in model.data:
            problems.append(f"end-label {n} has no data term")
        if not is_end and n in model.data:
            problems.append(f"non-end node {n} carries a data term")
    if src in model.data:
        problems.append(f"source {src} carries a data term")
    if src in model.smoothness:
        problems.append(f"source {src} carries a smoothness field")

    for name, fields in (("data term", model.data), ("smoothness", model.smoothness)):
        for n, f in fields.items():
            if f.shape != dims:
                problems.append(f"{name} of {n} has shape {f.shape}, expected {dims}")
            elif not np.all(np.isfinite(f)):
                problems.append(f"{name} of {n} is not finite")
    for n, f in model.smoothness.items():
        if f.shape == dims and np.any(f < 0):
            problems.append(f"smoothness of {n} is negative somewhere")

    # star and chain builders never normalize their weights; only lint DAGs
    if not problems and model.kind in ("dagmf", "hmf"):
        for n in nodes:
            kids = model.children[n]
            if kids:
                total = sum(w for _, w in kids)
                if not math.isclose(total, 1.0, rel_tol=1e-9):
                    log.warning("child weights of %s sum to %g, not 1", n, total)
    return problems


def _cycle_nodes(model: DagModel) -> set[str]:
    indeg = {n: len(model.parents[n]) for n in model.nodes}
    stack = [n for n, d in indeg.items() if d == 0]
    while stack:
        n = stack.pop()
        for c, _ in model.children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                stack.append(c)
    return {n for n, d in indeg.items() if d > 0}


def reachable(model: DagModel, start: str) -> set[str]:
    """All nodes reachable from ``start`` (inclusive) by a DFS."""
    seen = {start}
    stack = [start]
    while stack:
        n = stack.pop()
        for c, _ in model.children.get(n, ()):
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return seen


def topo_orders(model: DagModel) -> tuple[list[str], list[str]]:
    """Top-down topological order starting at the source, and its reverse.

    Ties are broken by lexicographic node identifier (Kahn's algorithm with a
    heap), so the order is deterministic.

    Raises
    ------
    ValueError
        If the graph has a cycle.
    """
    indeg = {n: len(model.parents[n]) for n in model.nodes}
    heap = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for c, _ in model.children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, c)
    if len(order) != len(indeg):
        raise ValueError("label graph contains a cycle")
    if order[0] != model.source:
        raise ValueError(f"source {model.source} is not the unique root")
    return order, order[::-1]


def path_weight(model: DagModel, a: str, b: str, _memo: dict | None = None) -> float:
    """Sum over directed paths ``a -> b`` of the product of edge weights.

    ``W(a, a) = 1`` and ``W(a, b) = 0`` when ``b`` is not a descendant of
    ``a``.
    """
    nodes = set(model.nodes)
    for n in (a, b):
        if n not in nodes:
            raise KeyError(f"unknown node {n!r}")
    memo = {} if _memo is None else _memo

    def rec(x: str) -> float:
        if x == b:
            return 1.0
        if x in memo:
            return memo[x]
        total = 0.0
        for c, w in model.children[x]:
            total += w * rec(c)
        memo[x] = total
        return total

    return rec(a)


# ---------------------------------------------------------------- special cases


@dataclass
class PottsModel:
    """Independent labels competing on the simplex.

    Parameters
    ----------
    data : array_like, shape (K, *dims)
        Data term per label.
    smoothness : array_like
        Per-label smoothness, broadcastable to ``(K, *dims)``; a scalar or a
        length-K vector of constants is accepted.
    """

    data: np.ndarray
    smoothness: np.ndarray = 0.0
    names: list[str] | None = None
    kind: str = field(default="potts", init=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim < 2:
            raise ValueError("data must have shape (labels, *dims)")
        sm = np.asarray(self.smoothness, dtype=float)
        if sm.ndim == 1 and sm.shape[0] == self.data.shape[0]:
            sm = sm.reshape((-1,) + (1,) * (self.data.ndim - 1))
        self.smoothness = np.broadcast_to(sm, self.data.shape).copy()
        if self.names is None:
            width = len(str(self.n_labels - 1))
            self.names = [f"L{i:0{width}d}" for i in range(self.n_labels)]
        if len(self.names) != self.n_labels:
            raise ValueError("one name per label required")
        if self.n_labels < 2:
            raise ValueError(f"Potts model needs at least 2 labels, got {self.n_labels}")
        if np.any(self.smoothness < 0):
            raise ValueError("smoothness must be non-negative")
        if not (np.all(np.isfinite(self.data)) and np.all(np.isfinite(self.smoothness))):
            raise ValueError("data and smoothness must be finite")

    @property
    def n_labels(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape[1:]

    @property
    def ndim(self) -> int:
        return self.data.ndim - 1

    def as_dag(self, source: str = "S") -> DagModel:
        """Star ordering: every label is a child of the source with weight 1."""
        return DagModel(
            edges=[(source, n, 1.0) for n in self.names],
            data=dict(zip(self.names, self.data)),
            smoothness=dict(zip(self.names, self.smoothness)),
            dims=self.dims,
            source=source,
            kind="potts",
        )


@dataclass
class IshikawaModel:
    """Linearly ordered labels ``L_0 .. L_N``.

    ``smoothness[i-1]`` regularizes the boundary of the cumulative region
    ``L_i ∪ ... ∪ L_N`` for ``i`` in ``1..N``.
    """

    data: np.ndarray
    smoothness: np.ndarray = 0.0
    kind: str = field(default="ishikawa", init=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim < 2 or self.data.shape[0] < 2:
            raise ValueError("data must have shape (N+1, *dims) with N >= 1")
        shape = (self.levels,) + self.data.shape[1:]
        sm = np.asarray(self.smoothness, dtype=float)
        if sm.ndim == 1 and sm.shape[0] == self.levels:
            sm = sm.reshape((-1,) + (1,) * (self.data.ndim - 1))
        self.smoothness = np.broadcast_to(sm, shape).copy()
        if np.any(self.smoothness < 0):
            raise ValueError("smoothness must be non-negative")
        if not (np.all(np.isfinite(self.data)) and np.all(np.isfinite(self.smoothness))):
            raise ValueError("data and smoothness must be finite")

    @property
    def levels(self) -> int:
        """Number of levels N (there are N+1 labels)."""
        return self.data.shape[0] - 1

    @property
    def n_labels(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape[1:]

    @property
    def ndim(self) -> int:
        return self.data.ndim - 1

    @property
    def names(self) -> list[str]:
        width = len(str(self.levels))
        return [f"L{i:0{width}d}" for i in range(self.n_labels)]

    def as_dag(self, source: str = "S") -> DagModel:
        """Equivalent caterpillar DAG.

        Cumulative nodes ``C_i`` (labels ``i..N``) form the spine
        ``S -> C_1 -> ... -> C_{N-1}``; each ``C_i`` also has the end-label
        ``L_i`` as a child, ``S`` has ``L_0`` and the last spine node has
        ``L_N``.  ``C_N`` coincides with ``L_N``, so ``L_N`` carries the last
        smoothness; the other end-labels get zero smoothness.
        """
        n = self.levels
        names = self.names
        width = len(str(n))
        spine = [f"C{i:0{width}d}" for i in range(1, n)]
        edges = [(source, names[0], 1.0)]
        parent = source
        for i, c in enumerate(spine, start=1):
            edges.append((parent, c, 1.0))
            if i > 1:
                edges.append((spine[i - 2], names[i - 1], 1.0))
            parent = c
        if n == 1:
            edges.append((source, names[1], 1.0))
        else:
            edges.append((spine[-1], names[n - 1], 1.0))
            edges.append((spine[-1], names[n], 1.0))
        smooth = {c: self.smoothness[i] for i, c in enumerate(spine)}
        smooth[names[n]] = self.smoothness[n - 1]
        return DagModel(
            edges=edges,
            data=dict(zip(names, self.data)),
            smoothness=smooth,
            dims=self.dims,
            source=source,
            kind="ishikawa",
        )


# ---------------------------------------------------------------- buffer budgets


@dataclass(frozen=True)
class BufferBudget:
    """Voxel-sized buffer counts for the pseudo-flow and full-flow layouts.

    ``full_derived`` marks baselines that are enumerated here rather than
    quoted (the Potts full-flow count).
    """

    kind: str
    spatial_dims: int
    pseudo: int
    full: int
    full_derived: bool = False

    @property
    def reduction(self) -> float:
        return 1.0 - self.pseudo / self.full

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "spatial_dims": self.spatial_dims,
            "pseudo": self.pseudo,
            "full": self.full,
            "reduction": self.reduction,
            "full_derived": self.full_derived,
        }


def buffer_budget(model, spatial_dims: int | None = None) -> BufferBudget:
    """Count the voxel-sized buffers each layout needs.

    Parameters
    ----------
    model : DagModel, PottsModel, IshikawaModel, or (kind, count)
        A model instance, or a tuple ``("potts", K)`` / ``("ishikawa", N)``
        for closed-form counts without materializing fields.
    spatial_dims : int, optional
        Number of flow components per spatial flow.  Defaults to the model's
        grid dimension; required for the tuple form.

    Notes
    -----
    With ``k`` spatial flow components:

    * DAG pseudo-flow: ``(2+k)`` per end-label (label, excess, flow),
      ``(1+k)`` per non-end node except the source, plus one accumulator.
      Full-flow: ``(3+k)`` per end-label, ``(4+k)`` per non-end node, plus 2.
    * Ishikawa with N levels: pseudo ``(N+1) + 1 + N + kN``,
      full ``(3+k)N + 1``.
    * Potts with K labels: pseudo ``K + kK + 1``; full ``1 + K + kK + K``
      (source flow, sink flows, spatial flows, labels).

    In 3D these reduce to 5/4/+1 vs 6/7/+2, ``5N+2`` vs ``6N+1`` and
    ``4K+1`` vs ``5K+1``.
    """
    if isinstance(model, tuple):
        kind, count = model
        if spatial_dims is None:
            raise ValueError("spatial_dims is required for closed-form budgets")
    elif isinstance(model, PottsModel):
        kind, count = "potts", model.n_labels
    elif isinstance(model, IshikawaModel):
        kind, count = "ishikawa", model.levels
    elif isinstance(model, DagModel):
        kind, count = model.kind, None
    else:
        raise TypeError(f"cannot budget {type(model).__name__}")
    if spatial_dims is None:
        spatial_dims = model.ndim
    k = int(spatial_dims)
    if k < 1:
        raise ValueError("spatial_dims must be >= 1")

    if kind == "potts" and count is not None:
        if count < 1:
            raise ValueError("label count must be >= 1")
        return BufferBudget("potts", k, count * (1 + k) + 1, 1 + count * (2 + k), True)
    if kind == "ishikawa" and count is not None:
        if count < 1:
            raise ValueError("level count must be >= 1")
        return BufferBudget("ishikawa", k, (count + 1) + 1 + count + k * count,
                            (3 + k) * count + 1)
    if not isinstance(model, DagModel):
        raise ValueError(f"unknown model kind {kind!r}")
    n_end = len(model.end_labels)
    n_mid = len(model.intermediates)
    return BufferBudget(
        model.kind if model.kind in ("hmf", "dagmf") else "dagmf",
        k,
        (2 + k) * n_end + (1 + k) * n_mid + 1,
        (3 + k) * n_end + (4 + k) * n_mid + 2,
    )


def dag_budget_counts(n_end: int, n_mid: int, spatial_dims: int = 3) -> BufferBudget:
    """Closed-form DAG budget from node counts alone."""
    if n_end < 1 or n_mid < 0:
        raise ValueError("need at least one end-label and no negative counts")
    k = spatial_dims
    return BufferBudget("dagmf", k, (2 + k) * n_end + (1 + k) * n_mid + 1,
                        (3 + k) * n_end + (4 + k) * n_mid + 2)


def ensure_dag(model) -> DagModel:
    if isinstance(model, DagModel):
        return model
    if isinstance(model, (PottsModel, IshikawaModel)):
        return model.as_dag()
    raise TypeError(f"not a label model: {type(model).__name__}")


def names_of(model) -> list[str]:
    if isinstance(model, DagModel):
        return model.end_labels
    return list(model.names)


def edges_from_parents(parents: Mapping[str, Iterable[tuple[str, float]]]):
    return [(p, c, w) for c, ps in parents.items() for p, w in ps]

"""Model description files, raw volumes and PGM export.

Volumes are headerless little-endian float32 streams with the first axis
varying fastest; the grid extents come from the model description.  Label
maps use the same layout with one unsigned byte per voxel.

A model description is a JSON document::

    {
      "geometry": {"dims": [64, 64]},
      "kind": "hmf",
      "source": "S",
      "nodes": [
        {"id": "body", "parents": {"S": 1.0}, "smoothness": 2.0},
        {"id": "bg",   "parents": ["S"],      "data": "bg.raw", "smoothness": 0.5},
        {"id": "liver","parents": ["body"],   "data": "liver.raw", "smoothness": "s.raw"},
        {"id": "kidney","parents": ["body"],  "data": "kidney.raw"}
      ],
      "solver": {"c": 0.25, "tau": 0.1, "max_iters": 500}
    }

``data`` and ``smoothness`` are either numbers or paths relative to the
description file.  For ``potts`` the nodes are the labels and ``parents`` is
omitted.  For ``ishikawa`` the nodes are the labels ``L_0 .. L_N`` in order.
Node ``i >= 1`` carries the smoothness of the cumulative region ``i..N``.
"""

from __future__ import annotations

import json
from dataclasses import fields as dc_fields
from pathlib import Path

import numpy as np

from .graph import DagModel, IshikawaModel, PottsModel, validate
from .solvers.common import SolverConfig

__all__ = [
    "SpecError",
    "read_volume",
    "write_volume",
    "read_labels",
    "write_labels",
    "write_pgm",
    "load_spec",
    "ModelSpec",
]

KINDS = ("potts", "ishikawa", "hmf", "dagmf")


class SpecError(ValueError):
    """A model description or volume failed validation.

    ``problems`` lists every violation found.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


def _voxels(dims) -> int:
    return int(np.prod(dims))


def read_volume(path, dims, dtype="<f4") -> np.ndarray:
    """Read a raw volume into a float64 array of shape ``dims``."""
    path = Path(path)
    dt = np.dtype(dtype)
    expected = dt.itemsize * _voxels(dims)
    actual = path.stat().st_size
    if actual != expected:
        raise SpecError([f"{path}: expected {expected} bytes for dims {list(dims)}, "
                         f"found {actual}"])
    flat = np.fromfile(path, dtype=dt)
    return flat.reshape(tuple(dims), order="F").astype(float)


def write_volume(path, field: np.ndarray, dtype="<f4") -> None:
    np.asarray(field).astype(dtype).ravel(order="F").tofile(path)


def read_labels(path, dims) -> np.ndarray:
    return read_volume(path, dims, dtype="u1").astype(np.intp)


def write_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
        raise ValueError("label indices must fit in one byte")
    write_volume(path, labels, dtype="u1")


def write_pgm(path, image: np.ndarray) -> None:
    """Binary (P5) greyscale export of a 2D field with min-max scaling.

    The first axis is the image width, so the raw byte order matches the
    volume layout.  A constant image maps to zero.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError(f"PGM export needs a 2D field, got {image.ndim} axes")
    lo, hi = float(image.min()), float(image.max())
    if hi > lo:
        scaled = np.rint((image - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(image)
    pixels = scaled.astype(np.uint8).ravel(order="F")
    width, height = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


class ModelSpec:
    """A parsed model description: the model, solver overrides and names."""

    def __init__(self, model, config: SolverConfig, names, kind, dims):
        self.model = model
        self.config = config
        self.names = names
        self.kind = kind
        self.dims = dims


def _field(value, base: Path, dims, what: str, problems: list):
    if value is None:
        return 0.0
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        path = base / value
        if not path.is_file():
            problems.append(f"{what}: file {value!r} does not exist")
            return None
        try:
            return read_volume(path, dims)
        except SpecError as exc:
            problems.extend(f"{what}: {p}" for p in exc.problems)
            return None
    problems.append(f"{what}: expected a number or a file name, got {value!r}")
    return None


def _parents(node: dict, problems: list) -> list[tuple[str, float]]:
    raw = node.get("parents", [])
    out = []
    if isinstance(raw, dict):
        items = raw.items()
    elif isinstance(raw, list):
        items = []
        for p in raw:
            if isinstance(p, str):
                items.append((p, 1.0))
            elif isinstance(p, dict) and "id" in p:
                items.append((p["id"], p.get("weight", 1.0)))
            else:
                problems.append(f"node {node.get('id')!r}: bad parent entry {p!r}")
    else:
        problems.append(f"node {node.get('id')!r}: parents must be a list or mapping")
        items = []
    for pid, w in items:
        try:
            out.append((str(pid), float(w)))
        except (TypeError, ValueError):
            problems.append(f"node {node.get('id')!r}: weight {w!r} is not a number")
    return out


def load_spec(path) -> ModelSpec:
    """Parse and validate a model description.

    Raises
    ------
    SpecError
        Listing every problem found.
    """
    path = Path(path)
    base = path.parent
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError([f"{path}: cannot read model description: {exc}"]) from exc
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise SpecError([f"{path}: top level must be an object"])

    dims = doc.get("geometry", {}).get("dims") if isinstance(doc.get("geometry"), dict) else None
    if (not isinstance(dims, list) or not 1 <= len(dims) <= 3
            or not all(isinstance(n, int) and n >= 1 for n in dims)):
        raise SpecError(problems + [f"geometry.dims must be 1-3 positive integers, got {dims!r}"])
    dims = tuple(dims)

    kind = doc.get("kind")
    if kind not in KINDS:
        problems.append(f"kind must be one of {KINDS}, got {kind!r}")
    source = str(doc.get("source", "S"))
    nodes = doc.get("nodes")
    if not isinstance(nodes, list) or not nodes:
        raise SpecError(problems + ["nodes must be a non-empty list"])

    ids = []
    for i, n in enumerate(nodes):
        if not isinstance(n, dict) or not isinstance(n.get("id"), str):
            problems.append(f"nodes[{i}] needs a string 'id'")
            continue
        if n["id"] in ids:
            problems.append(f"duplicate node id {n['id']!r}")
        ids.append(n["id"])

    config = SolverConfig()
    overrides = doc.get("solver", {}) or {}
    known = {f.name for f in dc_fields(SolverConfig)}
    for key in overrides:
        if key not in known:
            problems.append(f"solver: unknown option {key!r}")
    try:
        config = config.replace(**{k: v for k, v in overrides.items() if k in known})
    except (TypeError, ValueError) as exc:
        problems.append(f"solver: {exc}")

    if problems:
        raise SpecError(problems)

    data, smooth = {}, {}
    for n in nodes:
        nid = n["id"]
        if "data" in n:
            data[nid] = _field(n["data"], base, dims, f"node {nid!r} data", problems)
        smooth[nid] = _field(n.get("smoothness"), base, dims,
                             f"node {nid!r} smoothness", problems)

    model = None
    if kind in ("potts", "ishikawa"):
        for n in nodes:
            if n.get("parents") not in (None, [], [source], {source: 1.0}):
                problems.append(f"node {n['id']!r}: {kind} labels take no parents")
            if n["id"] not in data:
                problems.append(f"node {n['id']!r}: {kind} label has no data term")
        if kind == "ishikawa" and nodes[0].get("smoothness") not in (None, 0, 0.0):
            problems.append(f"node {ids[0]!r}: the first Ishikawa label has no smoothness")
        if len(nodes) < 2:
            problems.append(f"{kind} model needs at least 2 labels")
        if problems:
            raise SpecError(problems)
        D = np.stack([np.broadcast_to(data[i], dims) for i in ids])
        S = np.stack([np.broadcast_to(smooth[i], dims) for i in ids])
        if np.any(S < 0):
            problems.append("smoothness must be non-negative")
        if not np.all(np.isfinite(D)) or not np.all(np.isfinite(S)):
            problems.append("data and smoothness must be finite")
        if problems:
            raise SpecError(problems)
        model = PottsModel(D, S, names=list(ids)) if kind == "potts" else IshikawaModel(D, S[1:])
        names = list(ids)
    else:
        edges = []
        for n in nodes:
            for p, w in _parents(n, problems):
                edges.append((p, n["id"], w))
            if not n.get("parents"):
                problems.append(f"node {n['id']!r} has no parents")
        if problems:
            raise SpecError(problems)
        model = DagModel(edges=edges, data=data, smoothness=smooth, dims=dims,
                         source=source, kind=kind)
        problems.extend(validate(model))
        if kind == "hmf" and not problems and not model.is_tree():
            multi = [n for n in model.nodes if n != source and len(model.parents[n]) != 1]
            problems.append(f"hmf model must be a tree; nodes with several parents: {multi}")
        if problems:
            raise SpecError(problems)
        names = model.end_labels
    return ModelSpec(model, config, names, kind, dims)

"""Command-line front end.

``pseudoflow solve spec.json --out DIR``
    Run the solver for the described model.  Writes ``u_<label>.raw`` per
    end-label, ``labels.raw`` (argmax, one byte per voxel) and
    ``report.json``.  Exit status 0 on convergence, 2 when the iteration cap
    is hit, 1 on bad input.
``pseudoflow budget spec.json``
    Print the pseudo-flow and full-flow buffer counts.
``pseudoflow energy spec.json --labeling DIR``
    Score the ``labels.raw`` (and any ``u_<label>.raw``) found in ``DIR``.
``pseudoflow export-pgm VOLUME --dims NX NY --out FILE``
    Convert a 2D raw volume to an 8-bit PGM image.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .energy import energy, one_hot
from .graph import buffer_budget
from .solvers import solve

log = logging.getLogger("pseudoflow")

EXIT_CONVERGED, EXIT_INPUT, EXIT_MAX_ITERS = 0, 1, 2


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def cmd_solve(args) -> int:
    spec = io.load_spec(args.spec)
    overrides = {
        "c": args.c, "tau": args.tau, "max_iters": args.max_iters,
        "tol": args.tol, "anneal": args.anneal, "workers": args.workers,
    }
    config = spec.config.replace(**{k: v for k, v in overrides.items() if v is not None})
    start = time.perf_counter()
    u, report = solve(spec.model, config)
    wall = time.perf_counter() - start

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, field in zip(spec.names, u):
        io.write_volume(out / f"u_{name}.raw", field)
    io.write_labels(out / "labels.raw", np.argmax(u, axis=0))
    budget = buffer_budget(spec.model)
    doc = {
        "kind": spec.kind,
        "dims": list(spec.dims),
        "end_labels": list(spec.names),
        "config": config.as_dict(),
        "budget": budget.as_dict(),
        "buffers_allocated": report.buffers,
        "report": report.as_dict(),
    }
    if args.record_time:
        doc["wall_time_s"] = wall
    (out / "report.json").write_text(_dump(doc) + "\n")
    status = "converged" if report.converged else "max-iters reached"
    print(f"{status} after {report.iterations} iterations; "
          f"energy {report.final_energy:.6g}; {wall:.2f}s")
    return EXIT_CONVERGED if report.converged else EXIT_MAX_ITERS


def cmd_budget(args) -> int:
    spec = io.load_spec(args.spec)
    b = buffer_budget(spec.model, args.spatial_dims)
    print(f"pseudo={b.pseudo} full={b.full} reduction={100 * b.reduction:.2f}%"
          + (" (full-flow count derived)" if b.full_derived else ""))
    if args.json:
        print(_dump(b.as_dict()))
    return 0


def cmd_energy(args) -> int:
    spec = io.load_spec(args.spec)
    d = Path(args.labeling)
    k = len(spec.names)
    result = {}
    labels_path = d / "labels.raw"
    if labels_path.is_file():
        labels = io.read_labels(labels_path, spec.dims)
        if labels.max() >= k:
            raise io.SpecError([f"{labels_path}: label index {labels.max()} >= {k} labels"])
        result["discrete_energy"] = energy(spec.model, one_hot(labels, k))
    relaxed = [d / f"u_{n}.raw" for n in spec.names]
    if all(p.is_file() for p in relaxed):
        u = np.stack([io.read_volume(p, spec.dims) for p in relaxed])
        # float32 storage perturbs the simplex sum slightly
        u /= u.sum(axis=0)
        result["relaxed_energy"] = energy(spec.model, u)
    if not result:
        raise io.SpecError([f"{d}: no labels.raw or complete set of u_<label>.raw"])
    print(_dump(result))
    return 0


def cmd_export_pgm(args) -> int:
    dims = tuple(args.dims)
    dtype = {"f4": "<f4", "u1": "u1"}[args.dtype]
    image = io.read_volume(args.volume, dims, dtype=dtype)
    io.write_pgm(args.out, image)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudoflow", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run a solver")
    s.add_argument("spec")
    s.add_argument("--out", required=True)
    s.add_argument("--c", type=float)
    s.add_argument("--tau", type=float)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--anneal", type=float)
    s.add_argument("--workers", type=int)
    s.add_argument("--record-time", action="store_true",
                   help="store wall time in report.json (breaks byte-identical reruns)")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("budget", help="print buffer counts")
    b.add_argument("spec")
    b.add_argument("--spatial-dims", type=int, choices=(2, 3))
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_budget)

    e = sub.add_parser("energy", help="score an existing labeling")
    e.add_argument("spec")
    e.add_argument("--labeling", required=True)
    e.set_defaults(func=cmd_energy)

    x = sub.add_parser("export-pgm", help="convert a 2D volume to PGM")
    x.add_argument("volume")
    x.add_argument("--dims", type=int, nargs=2, required=True, metavar=("NX", "NY"))
    x.add_argument("--dtype", choices=("f4", "u1"), default="f4")
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export_pgm)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except io.SpecError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

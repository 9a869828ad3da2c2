"""Command-line front end: ``divlam {construct,laminate,analyze,search}``.

Exit codes: 0 success, 1 conditions failed (construct only), 2 invalid
input, 3 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import fieldio
from .exceptions import DivlamError, ResourceError
from .fieldlab import CSV_COLUMNS, analyze, convergence_table, default_eps
from .laminator import MAX_RASTER_ENTRIES, LaminateSchedule, fraction_report, hierarchical_laminate, rasterize
from .matkit import InstanceParams, LaminationInstance, build_instance, verify_conditions
from .rigidity import enumerate_exact

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _floats(text: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse {text!r} as numbers") from exc
    if count is not None and len(vals) != count:
        raise UsageError(f"expected {count} comma-separated values, got {len(vals)}")
    return vals


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse {text!r} as integers") from exc


def _matrix(spec: str | None, default: np.ndarray) -> np.ndarray:
    """``identity``, ``zero``, 9 comma-separated numbers, or a JSON file path."""
    if spec is None:
        return default
    if spec == "identity":
        return np.eye(3)
    if spec == "zero":
        return np.zeros((3, 3))
    if os.path.exists(spec):
        with open(spec) as fh:
            data = json.load(fh)
    elif "," in spec:
        data = _floats(spec, 9)
    else:
        raise UsageError(f"matrix {spec!r}: not a file, 'identity', 'zero' or 9 numbers")
    a = np.asarray(data, dtype=float)
    if a.size != 9:
        raise UsageError(f"matrix {spec!r} must have 9 entries")
    return a.reshape(3, 3)


def _params(args) -> InstanceParams:
    return InstanceParams(
        q=tuple(_floats(args.q, 3)),
        G=_matrix(args.G, np.eye(3)),
        M=_matrix(args.M, np.zeros((3, 3))),
        N=_matrix(args.N, np.eye(3)),
    )


def _dump(obj, out=None):
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _threads(args) -> int:
    if args.threads:
        return args.threads
    try:
        return max(1, int(os.environ.get("DIVLAM_THREADS", "1")))
    except ValueError:
        return 1


def cmd_construct(args) -> int:
    inst = build_instance(_params(args), tol=args.tol)
    rep = verify_conditions(inst, args.tol)
    _dump({"instance": inst.to_dict(), "conditions": rep.to_dict()}, args.out)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _schedule(args, inst) -> LaminateSchedule:
    return LaminateSchedule(inst, args.depth, args.ratio, args.base_period)


def cmd_laminate(args) -> int:
    inst = build_instance(_params(args), tol=args.tol)
    sched = _schedule(args, inst)
    field = hierarchical_laminate(sched, tol=args.tol)
    grid = _ints(args.grid)
    cap = args.max_entries or MAX_RASTER_ENTRIES
    if int(np.prod(grid)) * 9 > cap:
        raise ResourceError(f"grid {grid} exceeds the raster cap of {cap} floats")
    threads = _threads(args)
    out = {"fractions": fraction_report(field, args.samples, args.seed, threads=threads).to_dict()}
    if args.out:
        r = rasterize(field, grid, max_entries=cap, threads=threads)
        fieldio.write_field(args.out, r.raster)
        fieldio.write_labels(args.out + ".labels", r.label_raster)
        meta = {
            "instance": inst.to_dict(),
            "schedule": {"depth": sched.depth, "ratio": sched.ratio, "base_period": sched.base_period},
            "grid": grid,
        }
        with open(args.out + ".json", "w") as fh:
            json.dump(meta, fh, indent=2)
        out["field"] = args.out
    _dump(out)
    return EXIT_OK


def _load_instance(args) -> LaminationInstance:
    meta_path = args.input + ".json" if args.input else None
    if args.q is None and meta_path and os.path.exists(meta_path):
        with open(meta_path) as fh:
            return LaminationInstance.from_dict(json.load(fh)["instance"])
    if args.q is None:
        raise UsageError("no instance: pass --q/--G/--M/--N or keep the .json sidecar next to the field")
    return build_instance(_params(args), tol=args.tol)


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def cmd_analyze(args) -> int:
    inst = _load_instance(args)
    eps = args.eps if args.eps is not None else default_eps(inst)
    result = {}
    if args.input:
        raster = fieldio.read_field(args.input)
        if raster.shape[-2:] != (3, 3):
            raise UsageError("analyze expects a 3x3 matrix field")
        rep, proj = analyze(raster, inst.A, eps, project=args.project)
        result["metrics"] = rep.to_dict()
        if args.project:
            out = args.out or args.input + ".proj"
            fieldio.write_field(out, proj)
            result["projected"] = out
    if args.sweep:
        key, _, vals = args.sweep.partition("=")
        if key != "ratio" or not vals:
            raise UsageError("--sweep expects ratio=r1,r2,...")
        rows = convergence_table(inst, _ints(vals), args.depth, _ints(args.grid), args.base_period, eps)
        text = _csv(rows)
        if args.csv:
            with open(args.csv, "w") as fh:
                fh.write(text)
            result["table"] = args.csv
        else:
            result["table"] = rows
    if not result:
        raise UsageError("analyze needs --in and/or --sweep")
    _dump(result)
    return EXIT_OK


def cmd_search(args) -> int:
    if args.inclusion:
        with open(args.inclusion) as fh:
            spec = json.load(fh)
    else:
        if args.K is None or args.dims is None:
            raise UsageError("search needs --inclusion FILE or both --K and --dims")
        spec = {"K": json.loads(args.K), "dims": _ints(args.dims)}
    K = [np.asarray(a, dtype=float) for a in spec["K"]]
    res = enumerate_exact(K, spec["dims"], limit=args.limit)
    _dump(res.to_dict(witnesses=args.witnesses), args.out)
    return EXIT_OK


def _add_instance_flags(p, required=True):
    p.add_argument("--q", required=required, help="volume fractions q1,q2,q3 in (0,1)")
    p.add_argument("--G", help="conjugating matrix: identity | 9 numbers | JSON file (default identity)")
    p.add_argument("--M", help="affine shift (default zero)")
    p.add_argument("--N", help="affine factor (default identity)")
    p.add_argument("--tol", type=float, default=1e-9, help="condition tolerance (default 1e-9)")


def _add_schedule_flags(p):
    p.add_argument("--depth", type=int, default=1, help="lamination cycles (default 1)")
    p.add_argument("--ratio", type=int, default=4, help="scale ratio between levels (default 4)")
    p.add_argument("--base-period", type=float, default=1.0, help="coarsest period (default 1.0)")
    p.add_argument("--grid", default="64,64,64", help="raster dims (default 64,64,64)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="divlam", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=0, help="worker cap (default: $DIVLAM_THREADS or 1)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build an instance and check its conditions")
    _add_instance_flags(p)
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("laminate", help="build, rasterize and measure a multi-scale laminate")
    _add_instance_flags(p)
    _add_schedule_flags(p)
    p.add_argument("--samples", type=int, default=1_000_000, help="Monte-Carlo samples (default 1e6)")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    p.add_argument("--out", help="DIVF output path (labels go to OUT.labels, metadata to OUT.json)")
    p.add_argument("--max-entries", type=int, default=None, help="raster float cap (default 2^27)")
    p.set_defaults(func=cmd_laminate)

    p = sub.add_parser("analyze", help="metrics of a DIVF field and/or a ratio sweep")
    p.add_argument("--in", dest="input", help="DIVF field")
    _add_instance_flags(p, required=False)
    _add_schedule_flags(p)
    p.add_argument("--eps", type=float, default=None, help="distance threshold (default: half min |S_i - K|)")
    p.add_argument("--project", action="store_true", help="also write the Leray-projected field")
    p.add_argument("--sweep", help="ratio=r1,r2,... convergence table")
    p.add_argument("--csv", help="write the sweep table as CSV here")
    p.add_argument("--out", help="projected field path (default IN.proj)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("search", help="enumerate exact discrete solutions")
    p.add_argument("--inclusion", help='JSON file {"K": [...], "dims": [...]}')
    p.add_argument("--K", help="JSON list of matrices")
    p.add_argument("--dims", help="grid dims d1,d2,...")
    p.add_argument("--limit", type=int, default=1_000_000, help="search node budget (default 1e6)")
    p.add_argument("--witnesses", type=int, default=8, help="solutions to print (default 8)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_search)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ResourceError as exc:
        print(f"divlam: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (DivlamError, UsageError, KeyError, ValueError, OSError) as exc:
        print(f"divlam: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

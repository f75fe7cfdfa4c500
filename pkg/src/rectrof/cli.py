"""Command-line interface: ``rectrof <command> [instance] [flags]``.

Reports go to stdout as JSON, diagnostics to stderr. Exit status is 0 on
success or PASS, 1 on FAIL (or an uncertified solve), 2 on usage or parse
errors.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import instances
from .documents import (
    DocumentError,
    InstanceDocument,
    instance_from_pcr,
    make_report,
    parse_instance,
    serialize_instance,
    serialize_report,
)
from .geometry import boundary_grid, union_grids
from .pcr import lp_norm, minimal_grid, resample, tv_pcr
from .solver import SolverConfig, build_graph, energy, solve
from .verify import (
    DEFAULT_COUNTS,
    RefinementSpec,
    random_theorem_instances,
    run_property_suites,
    verify_theorem,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read_instance(path: str) -> InstanceDocument:
    try:
        text = sys.stdin.read() if path == "-" else open(path, encoding="utf-8").read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse_instance(text)


def _alpha(args, doc: InstanceDocument) -> float:
    alpha = args.alpha if args.alpha is not None else doc.alpha
    if alpha is None:
        raise UsageError("alpha is required: give --alpha or an 'alpha' field")
    if not alpha > 0:
        raise UsageError("alpha must be positive")
    return float(alpha)


def _solver_kw(args) -> dict:
    return {"tol_gap": args.tol_gap, "max_iters": args.max_iters}


def _cmd_solve(args):
    doc = _read_instance(args.instance)
    alpha = _alpha(args, doc)
    f = doc.to_pcr()
    u0 = resample(f, minimal_grid(f))
    g = build_graph(u0)
    sol = solve(g, SolverConfig(alpha=alpha, **_solver_kw(args)))
    p = u0.partition
    cells = [
        {"lo": p.lo[k].tolist(), "hi": p.hi[k].tolist(), "value": float(sol.u[k])}
        for k in range(len(p))
    ]
    out = {
        "alpha": alpha,
        "cells": cells,
        "primal_energy": sol.primal,
        "dual_energy": sol.dual,
        "gap": sol.gap,
        "tol_gap": sol.tol_gap,
        "certified": sol.certified,
        "iterations": sol.iterations,
        "error_bound": sol.error_bound(g),
    }
    return doc.digest(), out, sol.certified


def _cmd_energy(args):
    doc = _read_instance(args.instance)
    alpha = _alpha(args, doc)
    f = doc.to_pcr()
    out = {"alpha": alpha}
    if args.candidate is None:
        u = resample(f, minimal_grid(f))
        out["total_variation"] = tv_pcr(u)
        out["l2_norm"] = lp_norm(u, 2)
        out["energy"] = energy(build_graph(u), u.values, alpha)
    else:
        c = _read_instance(args.candidate).to_pcr()
        if not c.domain.same_set(f.domain):
            raise UsageError("candidate and instance domains differ")
        grid = union_grids(minimal_grid(f), minimal_grid(c))
        fu, cu = resample(f, grid), resample(c, grid)
        out["total_variation"] = tv_pcr(cu)
        out["fidelity"] = 0.5 * float(np.sum(fu.partition.volumes * (cu.values - fu.values) ** 2))
        out["energy"] = energy(build_graph(fu), cu.values, alpha)
    return doc.digest(), out, True


def _cmd_grid(args):
    doc = _read_instance(args.instance)
    f = doc.to_pcr()
    gf = minimal_grid(f)
    u = resample(f, gf)
    out = {
        "domain_planes": [list(p) for p in boundary_grid(f.domain).planes],
        "minimal_planes": [list(p) for p in gf.planes],
        "cells": len(u),
        "volume": f.domain.volume,
    }
    return doc.digest(), out, True


def _cmd_verify_theorem(args):
    spec = RefinementSpec(splits_per_axis=args.splits)
    kw = _solver_kw(args)
    if args.instance is not None:
        doc = _read_instance(args.instance)
        cases = [("instance", doc.to_pcr(), _alpha(args, doc))]
        digest = doc.digest()
    else:
        if args.count < 0:
            raise UsageError("--count must be non-negative")
        cases = random_theorem_instances(args.seed, args.count)
        if args.alpha is not None:
            cases = [(i, f, args.alpha) for i, f, _ in cases]
        digest = None
    records = []
    for iid, f, alpha in cases:
        rep = verify_theorem(f, alpha, spec, tol=args.tol, instance_id=iid, **kw)
        rec = rep.to_record()
        rec["alpha"] = alpha
        records.append(rec)
    passed = all(r["status"] == "PASS" for r in records)
    out = {
        "seed": args.seed if args.instance is None else None,
        "splits": args.splits,
        "tol": args.tol,
        "passed": sum(r["status"] == "PASS" for r in records),
        "total": len(records),
        "records": records,
    }
    return digest, out, passed


def _cmd_verify_properties(args):
    counts = dict(DEFAULT_COUNTS) if args.count is None else args.count
    if isinstance(counts, int) and counts < 0:
        raise UsageError("--count must be non-negative")
    rep = run_property_suites(args.seed, counts, quadrature_depth=args.quadrature_depth)
    return None, rep.to_record(), rep.passed


def _cmd_gen_random(args):
    rng = np.random.default_rng(args.seed)
    kinds = instances.DOMAIN_KINDS.get(args.dim)
    if kinds is None:
        raise UsageError(f"--dim must be one of {sorted(instances.DOMAIN_KINDS)}")
    if args.kind is not None and args.kind not in kinds:
        raise UsageError(f"--kind for dimension {args.dim} must be one of {list(kinds)}")
    f = instances.random_pcr(rng, args.dim, kind=args.kind, max_cells=args.max_cells)
    alpha = args.alpha if args.alpha is not None else round(instances.alpha_scale(f), 6)
    return instance_from_pcr(f, alpha)


COMMANDS = {
    "solve": _cmd_solve,
    "energy": _cmd_energy,
    "grid": _cmd_grid,
    "verify-theorem": _cmd_verify_theorem,
    "verify-properties": _cmd_verify_properties,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--alpha", type=float, help="regularization weight (overrides the instance)")
    solver.add_argument("--tol-gap", type=float, help="duality-gap target (default relative 1e-9)")
    solver.add_argument("--max-iters", type=int, default=200_000)

    ap = argparse.ArgumentParser(prog="rectrof", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common, solver], help="solve the ROF problem on the minimal grid")
    p.add_argument("instance", help="instance JSON file, or - for stdin")

    p = sub.add_parser("energy", parents=[common], help="energy of the data or of a candidate")
    p.add_argument("instance")
    p.add_argument("--alpha", type=float)
    p.add_argument("--candidate", help="instance file whose function is evaluated against the data")

    p = sub.add_parser("grid", parents=[common], help="boundary and minimal grids")
    p.add_argument("instance")

    p = sub.add_parser("verify-theorem", parents=[common, solver], help="refinement-invariance check")
    p.add_argument("instance", nargs="?", help="verify one instance instead of random ones")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--splits", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-5)

    p = sub.add_parser("verify-properties", parents=[common], help="seeded property suites")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--count", type=int, help="cases per suite (default: per-suite defaults)")
    p.add_argument("--quadrature-depth", type=int,
                   help="use the midpoint rule with 2**depth nodes per axis instead of Gauss quadrature")

    p = sub.add_parser("gen-random", parents=[common], help="print a random instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--kind", help="domain shape: box, gap, L, hole, bracket")
    p.add_argument("--max-cells", type=int, default=40)
    p.add_argument("--alpha", type=float)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        for name in ("splits", "max_iters", "quadrature_depth"):
            v = getattr(args, name, None)
            if v is not None and v < (0 if name == "quadrature_depth" else 1):
                raise UsageError(f"--{name.replace('_', '-')} out of range: {v}")
        t0 = time.perf_counter()
        if args.command == "gen-random":
            sys.stdout.write(serialize_instance(_cmd_gen_random(args)))
            return EXIT_OK
        digest, out, ok = COMMANDS[args.command](args)
        timings = {"total_seconds": time.perf_counter() - t0} if args.timings else None
    except (DocumentError, UsageError) as exc:
        print(f"rectrof {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"rectrof {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    status = "PASS" if ok else "FAIL"
    sys.stdout.write(serialize_report(make_report(argv, digest, out, status, timings)))
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

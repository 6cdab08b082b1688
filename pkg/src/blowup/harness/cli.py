"""Command line: verify, list, mesh and report."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from ..errors import BlowupError
from .mesh import export_mesh
from .registry import REGISTRY, example_names, run_verify
from .report import to_jsonl, write_report


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blowup", description="Blowup constructions and their verification suites.")
    sub = p.add_subparsers(dest="cmd", required=True)
    v = sub.add_parser("verify", help="run the check list of one example")
    v.add_argument("example")
    v.add_argument("--seed", type=int)
    v.add_argument("--tol-id", type=float)
    v.add_argument("--tol-coc", type=float)
    v.add_argument("--samples", type=int, help="overlap samples per sweep")
    v.add_argument("--json", action="store_true", help="print JSONL records instead of a table")
    sub.add_parser("list", help="list the built-in examples")
    m = sub.add_parser("mesh", help="export an OBJ mesh")
    m.add_argument("example")
    m.add_argument("--resolution", type=int, default=32)
    m.add_argument("--out", required=True)
    r = sub.add_parser("report", help="write a JSONL report")
    r.add_argument("--all", action="store_true", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.cmd == "list":
            for name in example_names():
                s = REGISTRY[name]
                print(f"{name:32s} {s.kind:15s} {s.summary}")
            return 0
        if args.cmd == "verify":
            rep = run_verify(args.example, seed=args.seed, tol_id=args.tol_id, tol_coc=args.tol_coc, samples=args.samples)
            if args.json:
                sys.stdout.write(to_jsonl([rep]))
            else:
                for c in rep.checks:
                    mark = "PASS" if c.passed else "FAIL"
                    print(f"{mark} {c.name:45s} {c.value:.3e} ({c.mode} {c.tol:.1e}, n={c.samples})")
                    if not c.passed and c.detail:
                        print(f"     {c.detail}")
                print(f"{rep.example}: {'PASS' if rep.passed else 'FAIL'} in {rep.wall_time:.2f}s")
            return 0 if rep.passed else 1
        if args.cmd == "mesh":
            path = export_mesh(args.example, args.resolution, args.out)
            print(f"wrote {path}")
            return 0
        if args.cmd == "report":
            reps = [run_verify(name, seed=args.seed) for name in example_names()]
            write_report(reps, args.out)
            bad = [r.example for r in reps if not r.passed]
            print(f"wrote {args.out}: {len(reps)} examples, {len(bad)} failing")
            return 1 if bad else 0
    except BlowupError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())

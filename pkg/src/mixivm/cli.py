"""Command-line entry point: ``mixivm classify|plan|run|bench``.

Exit codes: 0 success, 1 parse or usage error, 2 I/O error, 3 query outside
the supported classes, 4 update to a static relation.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
from pathlib import Path
from typing import Sequence, TextIO

from . import bench
from .classify import C_EXP, OUTSIDE, classify
from .engine import materialize
from .parser import (CHECKPOINT, ENUMERATE, ParseError, StaticUpdateParseError, load_database,
                     parse_query, parse_update_stream)
from .rewrite import rewrite
from .transition import EAGER, LAZY, TransitionError, TransitionSystem, eager_cap, max_dynamic_database
from .vo import create_vo
from .width import preprocessing_width

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_IO = 2
EXIT_CLASS = 3
EXIT_STATIC = 4


class CliError(Exception):
    def __init__(self, message: str, code: int) -> None:
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from exc


def _load_query(path: str):
    text = _read(path)
    try:
        return parse_query(text)
    except ParseError as exc:
        raise CliError(f"{path}:{exc}", EXIT_PARSE) from exc


def _load_data(directory: str, q):
    try:
        return load_database(directory, q)
    except ParseError as exc:
        raise CliError(f"{directory}: {exc}", EXIT_PARSE) from exc
    except OSError as exc:
        raise CliError(f"cannot read data from {directory}: {exc}", EXIT_IO) from exc


# -- classify -----------------------------------------------------------------

def cmd_classify(args: argparse.Namespace, out: TextIO) -> int:
    q = _load_query(args.query)
    report = classify(q)
    extra: dict = {}
    if report.is_well_behaved:
        res = preprocessing_width(q)
        extra["preprocessing_width"] = str(res.width)
        extra["variable_order"] = str(res.vo)
        extra["possibly_suboptimal"] = res.possibly_suboptimal
    out.write(report.to_json(**extra) + "\n")
    return EXIT_OK


# -- plan ---------------------------------------------------------------------

def cmd_plan(args: argparse.Namespace, out: TextIO) -> int:
    q = _load_query(args.query)
    report = classify(q)
    target = Path(args.emit_dot) if args.emit_dot else None
    written = []
    if report.is_well_behaved:
        omega = create_vo(q)
        tree = rewrite(omega, q)
        out.write(f"class: {report.query_class}\nvariable order: {omega}\nview tree:\n{tree}\n")
        if target:
            target.mkdir(parents=True, exist_ok=True)
            (target / "vo.dot").write_text(omega.to_dot(), encoding="utf-8")
            (target / "viewtree.dot").write_text(tree.to_dot(), encoding="utf-8")
            written = ["vo.dot", "viewtree.dot"]
    elif report.query_class == C_EXP:
        out.write(f"class: {C_EXP}\nruntime: transition system\n")
        if target:
            if not args.data:
                raise CliError("--data is required to draw a transition system", EXIT_PARSE)
            ts = TransitionSystem(q, _load_data(args.data, q), EAGER, cap=4)
            target.mkdir(parents=True, exist_ok=True)
            (target / "transition.dot").write_text(ts.to_dot(), encoding="utf-8")
            out.write(f"states: {len(ts)}\n")
            written = ["transition.dot"]
    else:
        raise CliError(f"query {q.name} is outside C_exp: no maintenance strategy applies",
                       EXIT_CLASS)
    for name in written:
        out.write(f"wrote {target / name}\n")
    return EXIT_OK


# -- run ----------------------------------------------------------------------

def cmd_run(args: argparse.Namespace, out: TextIO) -> int:
    q = _load_query(args.query)
    report = classify(q)
    if report.query_class == OUTSIDE:
        raise CliError(f"query {q.name} is outside C_exp: no maintenance strategy applies",
                       EXIT_CLASS)
    data = _load_data(args.data, q) if args.data else {}
    text = _read(args.updates) if args.updates else ""
    try:
        events = parse_update_stream(text, q)
    except StaticUpdateParseError as exc:
        raise CliError(f"{args.updates}:{exc}", EXIT_STATIC) from exc
    except ParseError as exc:
        raise CliError(f"{args.updates}:{exc}", EXIT_PARSE) from exc

    writer = csv.writer(out, lineterminator="\n")
    block = 0
    if report.is_well_behaved:
        engine = materialize(rewrite(create_vo(q), q), data)
        for e in events:
            if e.op == ENUMERATE:
                block += 1
                out.write(f"-- result {block} --\n")
                for row in engine.enumerate():
                    writer.writerow(row)
                out.write("-- end --\n")
            elif e.op == CHECKPOINT:
                out.write(json.dumps({"runtime": "view_tree", **engine.stats.to_dict()},
                                     sort_keys=True) + "\n")
            else:
                engine.apply_update(e)
    else:
        mode = args.mode
        if mode == "auto":
            mode = EAGER if len(max_dynamic_database(q, data)) <= eager_cap() else LAZY
        try:
            ts = TransitionSystem(q, data, mode)
        except TransitionError as exc:
            raise CliError(str(exc), EXIT_CLASS) from exc
        state = ts.initial
        updates = 0
        for e in events:
            if e.op == ENUMERATE:
                block += 1
                out.write(f"-- result {block} --\n")
                for row in ts.enumerate(state):
                    writer.writerow(row)
                out.write("-- end --\n")
            elif e.op == CHECKPOINT:
                out.write(json.dumps({"runtime": "transition_system", "mode": ts.mode,
                                      "state": state, "states": len(ts), "facts": ts.p,
                                      "updates": updates}, sort_keys=True) + "\n")
            else:
                updates += 1
                state = ts.apply_update(state, e)
    return EXIT_OK


# -- bench --------------------------------------------------------------------

def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise CliError(f"expected comma-separated integers, got {text!r}", EXIT_PARSE) from exc


def cmd_bench(args: argparse.Namespace, out: TextIO) -> int:
    if args.kind in ("oumv", "omv"):
        dims = _ints(args.n)
        if len(dims) != 1 or dims[0] < 1:
            raise CliError("n must be a single integer n >= 1", EXIT_PARSE)
        n = dims[0]
        rng = random.Random(args.seed)
        if args.kind == "oumv":
            inst = bench.random_oumv(n, rng)
            data, events = bench.encode_oumv(inst)
            got = bench.run_oumv(inst)
            want = [bench.uMv(u, inst.matrix, v) for u, v in inst.vector_pairs]
            qtext = bench.OUMV_QUERY
            lines = [f"{r + 1},{int(g)},{int(w)}" for r, (g, w) in enumerate(zip(got, want))]
        else:
            inst = bench.random_omv(n, rng)
            data, events = bench.encode_omv(inst)
            got = bench.run_omv(inst)
            want = [bench.Mv(inst.matrix, v) for v in inst.vectors]
            qtext = bench.OMV_QUERY
            lines = [f"{r + 1},{''.join(map(str, map(int, g)))},{''.join(map(str, map(int, w)))}"
                     for r, (g, w) in enumerate(zip(got, want))]
        ok = got == want
        if args.out:
            target = Path(args.out)
            try:
                bench.write_instance(target, qtext, data, events)
                (target / "answers.csv").write_text(
                    "round,engine,expected\n" + "\n".join(lines) + "\n", encoding="utf-8")
            except OSError as exc:
                raise CliError(f"cannot write {target}: {exc}", EXIT_IO) from exc
        out.write(json.dumps({"kind": args.kind, "n": n, "seed": args.seed,
                              "rounds": len(got), "verified": ok}, sort_keys=True) + "\n")
        return EXIT_OK if ok else 5
    if not args.query:
        raise CliError("bench sweep needs --query", EXIT_PARSE)
    q = _load_query(args.query)
    if not classify(q).is_well_behaved:
        raise CliError(f"query {q.name} is not well-behaved; sweep needs a view tree",
                       EXIT_CLASS)
    gen = bench.product_data if args.family == "product" else bench.uniform_data
    profile = bench.timing_sweep(q, _ints(args.n), data_gen=gen,
                                 updates=args.updates, seed=args.seed)
    text = profile.to_csv()
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    out.write(text)
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixivm",
                                description="Maintain conjunctive queries over static and "
                                            "dynamic relations.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="report structural properties and the query class")
    c.add_argument("query")
    c.set_defaults(func=cmd_classify)

    pl = sub.add_parser("plan", help="print the plan and optionally write DOT files")
    pl.add_argument("query")
    pl.add_argument("--emit-dot", metavar="DIR")
    pl.add_argument("--data", metavar="DIR", help="static data for transition-system plans")
    pl.set_defaults(func=cmd_plan)

    r = sub.add_parser("run", help="replay an update stream and print result blocks")
    r.add_argument("query")
    r.add_argument("--data", metavar="DIR")
    r.add_argument("--updates", metavar="FILE")
    r.add_argument("--out", metavar="FILE")
    r.add_argument("--mode", choices=("auto", EAGER, LAZY), default="auto",
                   help="transition-system construction mode")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="reduction workloads and timing sweeps")
    b.add_argument("kind", choices=("oumv", "omv", "sweep"))
    b.add_argument("--n", default="8",
                   help="dimension for oumv/omv, or comma-separated N values for sweep")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", metavar="PATH")
    b.add_argument("--query", metavar="FILE")
    b.add_argument("--updates", type=int, default=1000)
    b.add_argument("--family", choices=("uniform", "product"), default="uniform")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = stdout or sys.stdout
    handle = None
    try:
        if getattr(args, "out", None) and args.command == "run":
            try:
                handle = open(args.out, "w", encoding="utf-8")
            except OSError as exc:
                raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
            out = handle
        return args.func(args, out)
    except CliError as exc:
        print(f"mixivm: {exc}", file=sys.stderr)
        return exc.code
    finally:
        if handle:
            handle.close()


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

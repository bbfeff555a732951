"""Command-line driver: ``python -m nelsonkit <command> ...``.

Exit status is 0 on success, 1 when the answer is negative (an unreducible
sentence, a failed check, a Łoś mismatch) and 2 for usage or parse errors.
"""
from __future__ import annotations

import argparse
import json
import os
import random
import sys

from .classify import boundedness, is_internal
from .corpus import read_entries, run_corpus
from .los import (build_filter_greedy, extend_to_ultrafilter, grid_jsonl, los_grid,
                  parse_candidate, powerset_index, u_semantics, UQ, IndexPred)
from .macros import ElaborationError, MacroTable, default_macros, elaborate
from .reduce import StepLimitExceeded, Unreducible, reduce
from .syntax import ParseError, free_vars, parse, show
from .trace import Trace
from .verify import countermodel, countermodel_json, check_trace

OK, NEGATIVE, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit JSON, one document per input")
    common.add_argument("--ctx", default="", help="comma-separated standard parameters")
    common.add_argument("--max-size", type=_positive, default=4,
                        help="largest structure tried by countermodel search")
    common.add_argument("--max-steps", type=_positive, default=10000)
    common.add_argument("--macros", help="JSON macro table replacing the built-in one")
    common.add_argument("--file", action="append", default=[],
                        help="read inputs from a file ('-' for stdin)")

    p = argparse.ArgumentParser(prog="nelsonkit",
                                description="Reduce bounded IST sentences and check the results.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("parse", "parse and print formulas"),
                           ("classify", "report internality and boundedness"),
                           ("reduce", "reduce sentences to internal form with a trace")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("formulas", nargs="*")
    sp = sub.add_parser("check", parents=[common], help="check traces, or one equivalence")
    sp.add_argument("inputs", nargs="*", help="trace files (JSON or JSON lines)")
    sp.add_argument("--equiv", nargs=2, metavar=("LHS", "RHS"),
                    help="search for a countermodel to LHS <-> RHS instead")
    sp = sub.add_parser("upower", parents=[common], help="exhaustive Łoś grid over ultrapowers")
    sp.add_argument("--base", type=_positive, default=2, help="largest base structure")
    sp.add_argument("--index", type=_positive, default=2, help="largest index set")
    sp.add_argument("--rank", type=int, default=2, help="largest rank")
    sp.add_argument("--depth", type=int, default=2, help="largest quantifier depth")
    sp.add_argument("--summary", action="store_true", help="print totals only")
    sp = sub.add_parser("filter", parents=[common], help="greedy f.i.p. filter over P(V)")
    sp.add_argument("--V", required=True, help="comma-separated points of V")
    sp.add_argument("candidates", nargs="*",
                    help="card>=k, card<=k, has:a or lacks:a; the partner set is the complement")
    sp.add_argument("--random", type=int, default=0,
                    help="append this many random candidates (seeded by NELSONKIT_SEED)")
    sp = sub.add_parser("corpus", parents=[common], help="run the shipped corpus against golden files")
    sp.add_argument("--update", action="store_true", help="rewrite the golden files")
    sp.add_argument("--skip", action="append", default=[], help="golden file to skip")
    return p


def _inputs(args, positional):
    ctx = tuple(v for v in args.ctx.split(",") if v)
    entries = [(t, ctx) for t in positional]
    files = list(args.file)
    if not entries and not files:
        files = ["-"]
    for path in files:
        text = sys.stdin.read() if path == "-" else open(path).read()
        for e in read_entries(text):
            entries.append((e.text, e.ctx or ctx))
    return entries


def _macros(args):
    return MacroTable.from_json(args.macros) if args.macros else default_macros()


def _emit(args, doc, text):
    print(json.dumps(doc, ensure_ascii=False) if args.json else text)


def cmd_parse(args):
    for text, _ in _inputs(args, args.formulas):
        f = parse(text)
        _emit(args, {"input": text, "formula": show(f), "free": sorted(free_vars(f)),
                     "internal": is_internal(f)}, show(f))
    return OK


def cmd_classify(args):
    macros = _macros(args)
    for text, ctx in _inputs(args, args.formulas):
        f = elaborate(parse(text), macros)
        report = boundedness(f, set(ctx), macros)
        doc = {"input": text, **report.to_json()}
        lines = [f"internal: {report.internal}", f"bounded: {report.bounded}"]
        lines += [f"offender: {o.var} at {list(o.path)} ({o.reason})" for o in report.offenders]
        _emit(args, doc, "\n".join(lines))
    return OK


def cmd_reduce(args):
    macros = _macros(args)
    status = OK
    for text, ctx in _inputs(args, args.formulas):
        f = elaborate(parse(text), macros)
        try:
            out, trace = reduce(f, set(ctx), max_steps=args.max_steps, macros=macros)
        except Unreducible as exc:
            status = NEGATIVE
            doc = exc.trace.to_json()
            doc["report"] = exc.report.to_json()
            names = ", ".join(o.var for o in exc.report.offenders)
            _emit(args, doc, f"unreducible ({exc.reason}); offenders: {names}")
            continue
        lines = [show(out)] + [f"  {s.rule} [{s.just}] at {list(s.path)}" for s in trace.steps]
        _emit(args, trace.to_json(), "\n".join(lines))
    return status


def _read_traces(args):
    paths = list(args.inputs) + list(args.file) or ["-"]
    for path in paths:
        text = sys.stdin.read() if path == "-" else open(path).read()
        text = text.strip()
        if not text:
            continue
        if text.startswith("{") and "\n" not in text:
            yield Trace.loads(text)
            continue
        try:
            yield Trace.from_json(json.loads(text))
        except json.JSONDecodeError:
            for line in text.splitlines():
                if line.strip():
                    yield Trace.loads(line)


def cmd_check(args):
    if args.equiv:
        lhs, rhs = (elaborate(parse(t), _macros(args)) for t in args.equiv)
        found = countermodel(lhs, rhs, args.max_size)
        doc = {"countermodel": countermodel_json(*found) if found else None,
               "max_size": args.max_size}
        _emit(args, doc, "no countermodel up to size %d" % args.max_size if found is None
              else "countermodel: " + json.dumps(doc["countermodel"]))
        return OK if found is None else NEGATIVE
    status = OK
    for trace in _read_traces(args):
        report = check_trace(trace, args.max_size)
        if not report.ok:
            status = NEGATIVE
        bad = [f"  step {v.index} {v.rule}: {v.verdict}" for v in report.steps if v.verdict != "ok"]
        _emit(args, report.to_json(), "\n".join(["ok" if report.ok else "FAILED"] + bad))
    return status


def cmd_upower(args):
    cells = list(los_grid(args.base, args.index, args.rank, args.depth))
    bad = sum(c.mismatches for c in cells)
    if args.summary or not args.json:
        print(json.dumps({"cells": len(cells), "cases": sum(c.cases for c in cells),
                          "mismatches": bad}))
    else:
        print(grid_jsonl(cells))
    return OK if bad == 0 else NEGATIVE


def cmd_filter(args):
    V = [v for v in args.V.split(",") if v]
    I = powerset_index(V)
    specs = list(args.candidates)
    rng = random.Random(os.environ.get("NELSONKIT_SEED", "0"))
    kinds = [f"card>={k}" for k in range(len(V) + 1)] + [f"card<={k}" for k in range(len(V) + 1)]
    kinds += [f"has:{a}" for a in V] + [f"lacks:{a}" for a in V]
    specs += [rng.choice(kinds) for _ in range(args.random)]
    pairs = []
    for s in specs:
        A = parse_candidate(s, V)
        pairs.append((A, frozenset(I) - A))
    try:
        stage = build_filter_greedy(V, pairs)
    except ValueError as exc:
        _emit(args, {"error": str(exc)}, f"error: {exc}")
        return NEGATIVE
    U = extend_to_ultrafilter(stage)
    point = U.generator()
    u5 = {a: u_semantics(UQ("i", IndexPred("a in i", ("i",), lambda i, a=a: a in i)), U)
          for a in V}
    doc = {"V": V, "index_size": len(I),
           "selections": [{"candidate": s, "chosen": c} for s, c in zip(specs, stage.chosen)],
           "stage": stage.label, "ultrafilter_point": sorted(point), "u5": u5}
    text = "\n".join([f"{s}: {c}" for s, c in zip(specs, stage.chosen)]
                     + [f"ultrafilter at {{{', '.join(sorted(point))}}}"])
    _emit(args, doc, text)
    return OK


def cmd_corpus(args):
    results = run_corpus(update=args.update, max_size=args.max_size, skip=args.skip)
    for name, ok, detail in results:
        _emit(args, {"name": name, "ok": ok, "detail": detail},
              f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
    return OK if all(ok for _, ok, _ in results) else NEGATIVE


COMMANDS = {"parse": cmd_parse, "classify": cmd_classify, "reduce": cmd_reduce,
            "check": cmd_check, "upower": cmd_upower, "filter": cmd_filter,
            "corpus": cmd_corpus}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (ElaborationError, ValueError, KeyError, OSError, StepLimitExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE if not isinstance(exc, StepLimitExceeded) else NEGATIVE


def main():
    sys.exit(run())

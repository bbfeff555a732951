"""The shipped corpus and its golden outputs."""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .classify import boundedness
from .los import los_grid
from .macros import elaborate
from .reduce import Unreducible, reduce
from .syntax import parse
from .verify import check_trace, match_axiom


@dataclass(frozen=True)
class Entry:
    text: str
    ctx: tuple
    line: int


def corpus_dir() -> Path:
    return Path(resources.files("nelsonkit") / "corpus")


def read_entries(text):
    """Formulas one per line; ``#`` starts a comment, ``#@ctx: A,B`` sets the context."""
    ctx, out = (), []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("#@ctx:"):
            ctx = tuple(v.strip() for v in line[6:].split(",") if v.strip())
            continue
        if not line or line.startswith("#"):
            continue
        out.append(Entry(line, ctx, n))
    return out


def load(name):
    return read_entries((corpus_dir() / name).read_text())


def reduce_entry(entry: Entry, max_steps=10000):
    """Trace of one entry (reduced or not), as the JSON line stored in golden files."""
    f = elaborate(parse(entry.text))
    try:
        _, trace = reduce(f, set(entry.ctx), max_steps=max_steps)
    except Unreducible as exc:
        trace = exc.trace
    return trace


def golden_reduce(name, max_steps=10000):
    return "".join(reduce_entry(e, max_steps).dumps() + "\n" for e in load(name))


def golden_star():
    out = []
    for e in load("star.txt"):
        f = elaborate(parse(e.text))
        out.append(json.dumps(boundedness(f, set(e.ctx)).to_json()) + "\n")
    return "".join(out)


def golden_schemes():
    out = []
    for e in load("schemes.txt"):
        scheme, text = e.text.split(":", 1)
        out.append(json.dumps({"scheme": scheme, "formula": text.strip(),
                               "match": match_axiom(parse(text), scheme)}) + "\n")
    return "".join(out)


def los_manifest():
    return json.loads((corpus_dir() / "los_manifest.json").read_text())


def golden_los():
    """Per-configuration totals of the Łoś grid named by the manifest."""
    totals = {}
    for cell in los_grid(**los_manifest()):
        key = (cell.size, cell.index_size, cell.r, cell.u_index)
        t = totals.setdefault(key, [0, 0, 0])
        t[0] += 1
        t[1] += cell.cases
        t[2] += cell.mismatches
    return "".join(json.dumps({"M": k[0], "I": k[1], "r": k[2], "U": k[3], "formulas": v[0],
                               "cases": v[1], "mismatches": v[2]}) + "\n"
                   for k, v in sorted(totals.items()))


GOLDEN = {
    "bounded.jsonl": lambda: golden_reduce("bounded.txt"),
    "exempt.jsonl": lambda: golden_reduce("exempt.txt"),
    "star.jsonl": golden_star,
    "schemes.jsonl": golden_schemes,
    "los_summary.jsonl": golden_los,
}


def run_corpus(update=False, max_size=4, skip=()):
    """Regenerate every golden file and compare byte-for-byte.

    Also re-checks every bounded trace.  Returns a list of
    ``(name, ok, detail)`` results.
    """
    results = []
    gdir = corpus_dir() / "golden"
    for name, make in GOLDEN.items():
        if name in skip:
            continue
        fresh = make()
        path = gdir / name
        if update:
            path.write_text(fresh)
        ok = path.exists() and path.read_text() == fresh
        results.append((name, ok, "matches" if ok else "differs from golden"))
    if "check" not in skip:
        bad = []
        for e in load("bounded.txt"):
            trace = reduce_entry(e)
            if trace.status != "reduced" or not check_trace(trace, max_size).ok:
                bad.append(e.line)
        results.append(("check", not bad, "all traces check" if not bad
                        else f"failing lines {bad}"))
    return results

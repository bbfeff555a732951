"""Syntactic classification: internality, boundedness, and the ∃^st basis."""
from __future__ import annotations

from dataclasses import dataclass, field

from .macros import MacroTable, default_macros, elaborate
from .syntax import (And, Iff, Implies, Not, Or, Pred, Quant, St, Var, Eq, all_vars,
                     alpha_equiv, canonical, children, exists, fresh_name, rebuild,
                     replace_at, walk, free_vars)
from .trace import Trace, TraceStep


def is_internal(f) -> bool:
    """True iff ``f`` has no ``st`` atom and no external quantifier."""
    for _, g in walk(f):
        if isinstance(g, St) or (isinstance(g, Quant) and g.external):
            return False
    return True


def std_context(f, path, ctx=frozenset()):
    """Variables known standard at ``path``: ``ctx`` plus externally bound ones."""
    ctx = set(ctx)
    for k in path:
        if isinstance(f, Quant):
            if f.external:
                ctx.add(f.var)
            else:
                ctx.discard(f.var)
        f = children(f)[k]
    return ctx


# ------------------------------------------------------------ boundedness

@dataclass(frozen=True)
class Offender:
    var: str
    path: tuple
    reason: str

    def to_json(self):
        return {"var": self.var, "path": list(self.path), "reason": self.reason}


BOUNDED_CLASS = ("syntactic: every standard quantifier is bounded by a standard term, "
                 "or exempt; not claimed equal to any other notion of boundedness")


@dataclass
class ClassReport:
    internal: bool
    free: set
    standard_assumed: set
    bounded: bool
    offenders: list = field(default_factory=list)

    def to_json(self):
        return {
            "internal": self.internal,
            "free": sorted(self.free),
            "standard_assumed": sorted(self.standard_assumed),
            "bounded": self.bounded,
            "offenders": [o.to_json() for o in self.offenders],
            "bounded_class": BOUNDED_CLASS,
        }


class _Guards:
    """Recognizes ``Nat(n) -> ...`` style guards by bounding macros, elaborated or not."""

    def __init__(self, macros):
        self.macros = macros
        self.cache = {}

    def guard_of(self, q: Quant):
        body = q.body
        if q.kind == "forall" and isinstance(body, Implies):
            g = body.left
        elif q.kind == "exists" and isinstance(body, And):
            g = body.left
        else:
            return None
        for m in self.macros.bounding():
            if g == Pred(m.name, (Var(q.var),)):
                return m.name
            key = (m.name, q.var)
            if key not in self.cache:
                self.cache[key] = canonical(elaborate(Pred(m.name, (Var(q.var),)), self.macros))
            if canonical(g) == self.cache[key]:
                return m.name
        return None


def boundedness(f, standard_ctx=frozenset(), macros: MacroTable = None) -> ClassReport:
    """Check that every external quantifier is bounded by a standard-context variable.

    A quantifier whose body opens with a guard such as ``Nat(n) ->`` (for a
    macro flagged as bounding) counts as bounded by that standard set.
    """
    guards = _Guards(macros or default_macros())
    offenders = []

    def visit(g, path, ctx):
        if isinstance(g, Quant):
            inner = set(ctx)
            if g.external:
                if g.bound is not None and isinstance(g.bound, Var) and g.bound.name in ctx:
                    inner.add(g.var)
                elif g.bound is None and not g.finite and guards.guard_of(g):
                    inner.add(g.var)
                else:
                    why = "no bound" if g.bound is None else "bound is not a standard-context variable"
                    offenders.append(Offender(g.var, path, why))
                    inner.discard(g.var)
            else:
                inner.discard(g.var)
            visit(g.body, path + (0,), inner)
            return
        for k, c in enumerate(children(g)):
            visit(c, path + (k,), ctx)

    visit(f, (), set(standard_ctx))
    return ClassReport(
        internal=is_internal(f),
        free=free_vars(f),
        standard_assumed=set(standard_ctx),
        bounded=not offenders,
        offenders=offenders,
    )


# ------------------------------------------------------------------ basis

def _basis_step(g, avoid):
    """One rewrite toward the ∃^st basis at the root of ``g``, or None."""
    if isinstance(g, St):
        y = fresh_name("y", avoid)
        return "def-st", "DEF", exists(y, Eq(Var(y), g.term), st=True)
    if is_internal(g):
        return None
    if isinstance(g, Or):
        return "basis-or", "FO", Not(And(Not(g.left), Not(g.right)))
    if isinstance(g, Implies):
        return "basis-imp", "FO", Not(And(g.left, Not(g.right)))
    if isinstance(g, Iff):
        return "basis-iff", "FO", And(Not(And(g.left, Not(g.right))),
                                      Not(And(g.right, Not(g.left))))
    if isinstance(g, Quant) and g.kind == "forall":
        return "basis-forall", "FO", Not(Quant("exists", g.external, g.finite, g.var,
                                               g.bound, Not(g.body)))
    return None


def to_basis_trace(f, standard_ctx=()) -> Trace:
    """Rewrite into ¬, ∧, ∃, ∃^st over internal subformulas, recording each step."""
    trace = Trace(f, ctx=tuple(sorted(standard_ctx)), status="basis")
    cur = f
    while True:
        avoid = all_vars(cur)
        # definitional unfolding of st first, then the connective rewrites
        hit = None
        for phase in ("DEF", "FO"):
            for path, g in walk(cur):
                step = _basis_step(g, avoid)
                if step is not None and step[1] == phase:
                    hit = path, g, step
                    break
            if hit:
                break
        if hit is None:
            break
        path, g, (rule, just, new) = hit
        trace.steps.append(TraceStep(rule, path, g, new, just))
        cur = replace_at(cur, path, new)
    trace.output = cur
    return trace


def to_basis(f):
    return to_basis_trace(f).output

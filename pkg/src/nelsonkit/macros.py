"""Macro table and elaboration of macro atoms/terms into the pure ∈/= language."""
from __future__ import annotations

import json
from dataclasses import dataclass

from .syntax import (App, Eq, In, Not, Pred, Quant, St, Var, Formula, And, all_vars,
                     atom_terms, children, exists, fresh_name, parse, rebuild,
                     substitute, term_vars)


class ElaborationError(ValueError):
    pass


@dataclass(frozen=True)
class Macro:
    name: str
    kind: str            # "pred" or "term"
    params: tuple        # for term macros the last parameter names the result
    body: Formula
    bounding: bool = False   # pred(n) picks out the elements of a standard set

    @property
    def arity(self):
        return len(self.params) - (1 if self.kind == "term" else 0)


DEFAULT_MACROS = {
    "ispair": ("pred", ("p", "a", "b"),
               "forall w . w in p <-> ((forall u . u in w <-> u = a)"
               " | (forall u . u in w <-> u = a | u = b))"),
    "pair": ("term", ("a", "b", "v"), "ispair(v,a,b)"),
    "app": ("term", ("F", "n", "v"), "exists p . p in F & ispair(p,n,v)"),
    "isfunc": ("pred", ("F",),
               "(forall p in F . exists a . exists b . ispair(p,a,b))"
               " & (forall p in F . forall q in F . forall a . forall b . forall c ."
               " ispair(p,a,b) & ispair(q,a,c) -> b = c)"),
    "zero_or_succ": ("pred", ("m",),
                     "(forall z . ~ z in m) | (exists p in m . forall z . z in m <-> z in p | z = p)"),
    "Nat": ("pred", ("n",),
            "(forall a in n . forall b in a . b in n)"
            " & (forall a in n . forall b in n . a in b | a = b | b in a)"
            " & zero_or_succ(n) & (forall m in n . zero_or_succ(m))"),
}
BOUNDING = {"Nat"}


class MacroTable:
    def __init__(self, macros):
        self.macros = dict(macros)

    def __contains__(self, name):
        return name in self.macros

    def __getitem__(self, name):
        return self.macros[name]

    def bounding(self):
        return [m for m in self.macros.values() if m.bounding and m.kind == "pred"]

    @classmethod
    def from_spec(cls, spec, bounding=()):
        table = {}
        for name, entry in spec.items():
            if isinstance(entry, dict):
                kind, params, body = entry["kind"], entry["params"], entry["body"]
                bnd = entry.get("bounding", name in bounding)
            else:
                kind, params, body = entry
                bnd = name in bounding
            table[name] = Macro(name, kind, tuple(params), parse(body), bnd)
        return cls(table)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_spec(json.load(fh))

    @classmethod
    def default(cls):
        return cls.from_spec(DEFAULT_MACROS, BOUNDING)


_DEFAULT = None


def default_macros() -> MacroTable:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = MacroTable.default()
    return _DEFAULT


def _freshen(body, avoid):
    """Rename every bound variable of ``body`` away from ``avoid`` (mutates avoid)."""
    if isinstance(body, Quant):
        new = fresh_name(body.var, avoid)
        avoid.add(new)
        inner = substitute(body.body, body.var, Var(new)) if new != body.var else body.body
        return Quant(body.kind, body.external, body.finite, new, body.bound,
                     _freshen(inner, avoid))
    return rebuild(body, [_freshen(c, avoid) for c in children(body)])


def instantiate(macro: Macro, args, avoid: set):
    """Body of ``macro`` with parameters replaced by ``args``; bound names fresh."""
    if len(args) != len(macro.params):
        raise ElaborationError(f"{macro.name} expects {macro.arity} arguments")
    body = _freshen(macro.body, avoid | {p for p in macro.params})
    # two-phase renaming keeps the substitution simultaneous
    tmp = [fresh_name(f"_{p}", avoid | all_vars(body)) for p in macro.params]
    for p, t in zip(macro.params, tmp):
        body = substitute(body, p, Var(t))
    for t, a in zip(tmp, args):
        body = substitute(body, t, a)
    avoid |= all_vars(body)
    return body


def elaborate(f, macros: MacroTable = None):
    """Expand macro predicates and macro terms; the result is macro-free."""
    macros = macros or default_macros()
    avoid = set(all_vars(f))
    return _elab(f, macros, avoid)


def _check(macros, head, kind, n):
    if head not in macros:
        raise ElaborationError(f"unknown macro {head!r}")
    m = macros[head]
    if m.kind != kind:
        raise ElaborationError(f"{head} is a {m.kind} macro, used as a {kind}")
    if m.arity != n:
        raise ElaborationError(f"{head} expects {m.arity} arguments, got {n}")
    return m


def _first_app(t):
    """Innermost-leftmost macro term inside ``t`` whose arguments are variables."""
    if isinstance(t, Var):
        return None
    for a in t.args:
        found = _first_app(a)
        if found is not None:
            return found
    return t


def _replace_term(t, old, new):
    if t == old:
        return new
    if isinstance(t, Var):
        return t
    return App(t.head, tuple(_replace_term(a, old, new) for a in t.args))


def _replace_in_atom(f, old, new):
    if isinstance(f, In):
        return In(_replace_term(f.left, old, new), _replace_term(f.right, old, new))
    if isinstance(f, Eq):
        return Eq(_replace_term(f.left, old, new), _replace_term(f.right, old, new))
    if isinstance(f, St):
        return St(_replace_term(f.term, old, new))
    return Pred(f.head, tuple(_replace_term(a, old, new) for a in f.args))


def _elab(f, macros, avoid):
    if isinstance(f, (In, Eq, St, Pred)):
        for t in atom_terms(f):
            app = _first_app(t)
            if app is None:
                continue
            m = _check(macros, app.head, "term", len(app.args))
            if isinstance(f, Eq) and {f.left, f.right} & {app} and \
                    isinstance(f.right if f.left == app else f.left, Var):
                other = f.right if f.left == app else f.left
                return _elab(instantiate(m, app.args + (other,), avoid), macros, avoid)
            v = fresh_name("v", avoid)
            avoid.add(v)
            graph = instantiate(m, app.args + (Var(v),), avoid)
            rest = _replace_in_atom(f, app, Var(v))
            return _elab(exists(v, And(graph, rest)), macros, avoid)
        if isinstance(f, Pred):
            m = _check(macros, f.head, "pred", len(f.args))
            return _elab(instantiate(m, f.args, avoid), macros, avoid)
        return f
    if isinstance(f, Quant) and f.bound is not None and isinstance(f.bound, App):
        raise ElaborationError("macro terms are not allowed as quantifier bounds")
    return rebuild(f, [_elab(c, macros, avoid) for c in children(f)])

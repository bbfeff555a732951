"""Independent checking of reduction traces.

First-order and definitional steps are audited by exhaustive countermodel
search over all finite ∈/st structures up to a size bound.  Steps justified
by Idealization, Standardization or Transfer are matched syntactically
against the corresponding scheme, side conditions included.  Nothing here
calls into the reducer.

The search enumerates one structure per isomorphism class and puts every
free variable on its own array axis, so each class is tried under all
assignments.  Since every structure is isomorphic to its representative,
this covers the full space of (structure, assignment) pairs.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .classify import is_internal, std_context
from .macros import default_macros, elaborate, instantiate
from .structures import BatchEvaluator, FiniteStructure, evaluate
from .syntax import (And, App, Eq, Iff, Implies, In, Not, Or, Pred, Quant, Var,
                     alpha_equiv, canonical, children, free_vars, subformula,
                     replace_at, substitute, term_vars, walk)
from .trace import Trace, TraceStep

DEFAULT_MAX_SIZE = 4
_CELL_BUDGET = 1 << 23


# ------------------------------------------------------------ structures

@lru_cache(maxsize=None)
def iso_representatives(n, with_standard=True):
    """Smallest code of each isomorphism class of size-``n`` structures.

    A code packs membership bits ``i*n+j`` (i ∈ j) followed by ``n``
    standardness bits.  Returns ``(mem, std)`` arrays of shape (K, n, n) and
    (K, n), in increasing code order.
    """
    nbits = n * n + (n if with_standard else 0)
    codes = np.arange(1 << nbits, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(nbits)) & 1).astype(np.int64)
    best = codes.copy()
    for perm in itertools.permutations(range(n)):
        pos = [perm[i] * n + perm[j] for i in range(n) for j in range(n)]
        if with_standard:
            pos += [n * n + perm[i] for i in range(n)]
        np.minimum(best, bits @ (np.int64(1) << np.array(pos, dtype=np.int64)), out=best)
    reps = codes[best == codes]
    mem = ((reps[:, None] >> np.arange(n * n)) & 1).astype(bool).reshape(-1, n, n)
    if with_standard:
        std = ((reps[:, None] >> (n * n + np.arange(n))) & 1).astype(bool)
    else:
        std = np.zeros((len(reps), n), dtype=bool)
    return mem, std


def _cells(f, sorts, n):
    """Largest per-structure array any subformula of ``f`` needs."""
    worst = 1
    for _, g in walk(f):
        names = set(free_vars(g))
        local = dict(sorts)
        if isinstance(g, Quant):
            names.add(g.var)
            local[g.var] = "s" if g.finite else "e"
        size = 1
        for v in names:
            size *= (1 << n) if local.get(v) == "s" else n
        worst = max(worst, size)
    return worst


def _bound_sorts(f):
    """Sort of every variable bound by a ``fin`` quantifier anywhere in ``f``."""
    return {g.var: "s" for _, g in walk(f) if isinstance(g, Quant) and g.finite}


def countermodel(lhs, rhs, max_size=DEFAULT_MAX_SIZE, sorts=None, min_size=1):
    """First structure and assignment falsifying ``lhs <-> rhs``, or None.

    ``sorts`` gives the sort ("e" for elements, "s" for finite subsets) of
    free variables; unspecified ones are elements.  Structures are tried by
    size, then by representative code, then by assignment in row-major order.
    """
    target = Iff(lhs, rhs)
    free = sorted(free_vars(target))
    sorts = {v: (sorts or {}).get(v, "e") for v in free}
    with_std = not is_internal(target)
    for n in range(min_size, max_size + 1):
        mem, std = iso_representatives(n, with_std)
        chunk = max(1, _CELL_BUDGET // _cells(target, sorts, n))
        for lo in range(0, len(mem), chunk):
            ev = BatchEvaluator(n, mem[lo:lo + chunk], std[lo:lo + chunk])
            truth = ev.truth(target, {}, sorts, order=free)
            if truth.all():
                continue
            idx = tuple(int(k) for k in np.argwhere(~truth)[0])
            k = lo + idx[0]
            M = FiniteStructure(range(n),
                                {(i, j) for i in range(n) for j in range(n) if mem[k, i, j]},
                                {i for i in range(n) if std[k, i]})
            env = {}
            for v, a in zip(free, idx[1:]):
                env[v] = a if sorts[v] == "e" else frozenset(i for i in range(n) if a >> i & 1)
            return M, env
    return None


def countermodel_json(M, env):
    out = M.to_json()
    out["env"] = {v: sorted(a) if isinstance(a, frozenset) else a for v, a in env.items()}
    return out


# --------------------------------------------------------------- schemes

def _prefix(f, kind, external, unbounded=False):
    qs = []
    while isinstance(f, Quant) and f.kind == kind and f.external == external:
        if unbounded and (f.bound is not None or f.finite):
            break
        qs.append(f)
        f = f.body
    return qs, f


def _dual(kind):
    return "forall" if kind == "exists" else "exists"


def _match_idealization(before, after):
    for inner in ("exists", "forall"):
        outer = _dual(inner)
        xs, rest = _prefix(before, inner, False, unbounded=True)
        as_, matrix = _prefix(rest, outer, True)
        if not xs or not as_ or rest is before:
            continue
        if not is_internal(matrix):
            return False
        sets, r = _prefix(after, outer, True)
        if len(sets) != len(as_) or any(s.bound is not None or not s.finite for s in sets):
            return False
        names = [s.var for s in sets]
        taken = free_vars(before) | {x.var for x in xs} | {a.var for a in as_}
        if len(set(names)) != len(names) or set(names) & taken:
            return False
        for x in xs:
            if not (isinstance(r, Quant) and r.kind == inner and not r.external
                    and r.var == x.var and r.bound is None and not r.finite):
                return False
            r = r.body
        for a, name in zip(as_, names):
            if not (isinstance(r, Quant) and r.kind == outer and not r.external
                    and r.var == a.var and r.bound == Var(name) and r.finite == a.finite):
                return False
            r = r.body
            if a.bound is not None:
                conn = Implies if outer == "forall" else And
                if not (isinstance(r, conn) and r.left == In(Var(a.var), a.bound)):
                    return False
                r = r.right
        return r == matrix
    return False


def _match_transfer(before, after, std):
    if not (isinstance(before, Quant) and before.external):
        return False
    if not is_internal(before.body):
        return False
    if not free_vars(before) <= set(std):
        return False
    return after == Quant(before.kind, False, before.finite, before.var, before.bound,
                          before.body)


def _graph(g, x, y):
    """Canonical form of ``app(g,x) = y`` elaborated with the default macros."""
    return canonical(elaborate(Eq(App("app", (Var(g), Var(x))), Var(y))))


def _ispair(z, x, y):
    m = default_macros()["ispair"]
    return elaborate(instantiate(m, (Var(z), Var(x), Var(y)), {z, x, y}))


def match_standardization_instance(inst, std=frozenset()):
    """``∀^st X ∃^st Y ∀^st z (z ∈ Y <-> z ∈ X ∧ Φ(z))`` with Y not in Φ.

    Returns ``(X, Y, z, Φ)`` or None.
    """
    if not (isinstance(inst, Quant) and inst.kind == "forall" and inst.external
            and inst.bound is None and not inst.finite):
        return None
    q2 = inst.body
    if not (isinstance(q2, Quant) and q2.kind == "exists" and q2.external
            and q2.bound is None and not q2.finite):
        return None
    q3 = q2.body
    if not (isinstance(q3, Quant) and q3.kind == "forall" and q3.external
            and q3.bound is None and not q3.finite):
        return None
    X, Y, z = inst.var, q2.var, q3.var
    if len({X, Y, z}) != 3:
        return None
    b = q3.body
    if not (isinstance(b, Iff) and b.left == In(Var(z), Var(Y)) and isinstance(b.right, And)
            and b.right.left == In(Var(z), Var(X))):
        return None
    phi = b.right.right
    if Y in free_vars(phi):
        return None
    return X, Y, z, phi


def _match_standardization(before, after, instance, std):
    if instance is None:
        return False
    for outer, inner in (("forall", "exists"), ("exists", "forall")):
        if not (isinstance(before, Quant) and before.external and before.kind == outer):
            continue
        h = before.body
        if not (isinstance(h, Quant) and h.external and h.kind == inner):
            return False
        if before.finite or h.finite:
            return False
        for q in (before, h):
            if not (isinstance(q.bound, Var) and q.bound.name in std):
                return False
        M = h.body
        x, y = before.var, h.var
        if not is_internal(M):
            return False
        if not (isinstance(after, Quant) and after.external and after.kind == inner
                and after.bound is None and not after.finite):
            return False
        g = after.var
        if g in free_vars(before) or g in (x, y):
            return False
        q = after.body
        if not (isinstance(q, Quant) and q.external and q.kind == outer and q.var == x
                and q.bound == before.bound and not q.finite):
            return False
        pin = _graph(g, x, y)
        body = q.body
        yin = In(Var(y), h.bound)
        if outer == "forall":
            ok = (isinstance(body, And)
                  and isinstance(body.left, Quant) and body.left.kind == "exists"
                  and not body.left.external and body.left.var == y
                  and body.left.bound is None and canonical(body.left.body) == pin
                  and isinstance(body.right, Quant) and body.right.kind == "forall"
                  and not body.right.external and body.right.var == y
                  and body.right.bound is None
                  and isinstance(body.right.body, Implies)
                  and canonical(body.right.body.left) == pin
                  and body.right.body.right == And(yin, M))
            phi_matrix = M
        else:
            ok = (isinstance(body, Or)
                  and isinstance(body.left, Quant) and body.left.kind == "forall"
                  and not body.left.external and body.left.var == y
                  and body.left.bound is None and isinstance(body.left.body, Not)
                  and canonical(body.left.body.body) == pin
                  and isinstance(body.right, Quant) and body.right.kind == "exists"
                  and not body.right.external and body.right.var == y
                  and body.right.bound is None
                  and isinstance(body.right.body, And)
                  and canonical(body.right.body.left) == pin
                  and body.right.body.right == Implies(yin, M))
            phi_matrix = Not(M)
        if not ok:
            return False
        parts = match_standardization_instance(instance, std)
        if parts is None:
            return False
        _, _, z, phi = parts
        # Φ(z): z codes a pair <x,y> with x ∈ X, y ∈ Y and the matrix holding
        want = Quant("exists", False, False, x, None, Quant(
            "exists", False, False, y, None,
            And(And(_ispair(z, x, y), And(In(Var(x), before.bound), yin)), phi_matrix)))
        return alpha_equiv(phi, want)
    return False


def match_scheme(step: TraceStep, scheme: str, standard_ctx=frozenset()) -> bool:
    """Is the step's before/after pair an instance of scheme I, S or T?

    ``standard_ctx`` lists the variables standard at the step's position.
    """
    if scheme == "I":
        return _match_idealization(step.before, step.after)
    if scheme == "T":
        return _match_transfer(step.before, step.after, standard_ctx)
    if scheme == "S":
        return _match_standardization(step.before, step.after, step.instance, standard_ctx)
    return False


# ------------------------------------------------------- axiom instances

def _opaque_internal(f):
    # macro predicates stand for ∈-formulas, so they are internal
    return is_internal(f)


def match_axiom(f, scheme, standard_ctx=frozenset()) -> bool:
    """Is ``f`` an instance of the I, S or T axiom scheme as a single sentence?"""
    if scheme == "I":
        if not isinstance(f, Iff):
            return False
        lhs, rhs = f.left, f.right
        if not (isinstance(lhs, Quant) and lhs.kind == "forall" and lhs.external
                and lhs.finite and lhs.bound is None):
            return False
        A = lhs.var
        ex = lhs.body
        if not (isinstance(ex, Quant) and ex.kind == "exists" and not ex.external
                and ex.bound is None and not ex.finite):
            return False
        fa = ex.body
        if not (isinstance(fa, Quant) and fa.kind == "forall" and not fa.external
                and fa.bound == Var(A) and not fa.finite):
            return False
        phi = fa.body
        if not (isinstance(rhs, Quant) and rhs.kind == "exists" and not rhs.external
                and rhs.bound is None and not rhs.finite):
            return False
        fs = rhs.body
        if not (isinstance(fs, Quant) and fs.kind == "forall" and fs.external
                and fs.bound is None and not fs.finite):
            return False
        phi2 = substitute(substitute(fs.body, fs.var, Var("#a")), rhs.var, Var("#x"))
        phi1 = substitute(substitute(phi, fa.var, Var("#a")), ex.var, Var("#x"))
        return (_opaque_internal(phi) and _opaque_internal(fs.body)
                and A not in free_vars(phi) and A != ex.var
                and canonical(phi1) == canonical(phi2))
    if scheme == "S":
        return match_standardization_instance(f, standard_ctx) is not None
    if scheme == "T":
        if not isinstance(f, (Implies, Iff)):
            return False
        lhs, rhs = f.left, f.right
        if not (isinstance(lhs, Quant) and isinstance(rhs, Quant) and lhs.kind == rhs.kind):
            return False
        if lhs.external or not rhs.external or lhs.bound is not None or rhs.bound is not None:
            return False
        if lhs.finite or rhs.finite:
            return False
        phi = lhs.body
        if not _opaque_internal(phi):
            return False
        if canonical(substitute(rhs.body, rhs.var, Var("#x"))) != \
                canonical(substitute(phi, lhs.var, Var("#x"))):
            return False
        return free_vars(lhs) <= set(standard_ctx)
    return False


# ------------------------------------------------------------ trace check

@dataclass(frozen=True)
class StepVerdict:
    index: int
    rule: str
    just: str
    verdict: str                 # ok | scheme-mismatch | countermodel | chain-mismatch
    detail: str = ""
    countermodel: Optional[dict] = None

    def to_json(self):
        out = {"index": self.index, "rule": self.rule, "just": self.just,
               "verdict": self.verdict}
        if self.detail:
            out["detail"] = self.detail
        if self.countermodel is not None:
            out["countermodel"] = self.countermodel
        return out


@dataclass
class CheckReport:
    steps: list = field(default_factory=list)
    output_matches: bool = True
    output_internal: bool = True
    max_size: int = DEFAULT_MAX_SIZE

    @property
    def ok(self):
        return (all(s.verdict == "ok" for s in self.steps)
                and self.output_matches and self.output_internal)

    def to_json(self):
        return {"ok": self.ok, "max_size": self.max_size,
                "fo_status": f"validated (bounded, size <= {self.max_size})",
                "output_matches": self.output_matches,
                "output_internal": self.output_internal,
                "steps": [s.to_json() for s in self.steps]}


class MalformedTrace(ValueError):
    pass


def _sorts_at(f, path):
    sorts = {}
    for k in path:
        if isinstance(f, Quant):
            sorts[f.var] = "s" if f.finite else "e"
        f = children(f)[k]
    return sorts


def check_trace(t: Trace, max_size=DEFAULT_MAX_SIZE) -> CheckReport:
    """Replay ``t`` from its input, auditing every step."""
    if t.input is None:
        raise MalformedTrace("trace has no input")
    report = CheckReport(max_size=max_size)
    ctx = frozenset(t.ctx)
    cur = t.input
    for k, step in enumerate(t.steps):
        if step.just not in ("FO", "DEF", "I", "S", "T"):
            raise MalformedTrace(f"step {k}: unknown justification {step.just!r}")
        try:
            here = subformula(cur, step.path)
        except (IndexError, TypeError):
            here = None
        if here != step.before:
            report.steps.append(StepVerdict(k, step.rule, step.just, "chain-mismatch",
                                            f"path {list(step.path)}"))
            # keep going from the claimed state so later steps are still judged
            cur = replace_at(cur, step.path, step.after) if here is not None else cur
            continue
        if step.just in ("FO", "DEF"):
            found = countermodel(step.before, step.after, max_size, _sorts_at(cur, step.path))
            if found is None:
                report.steps.append(StepVerdict(k, step.rule, step.just, "ok"))
            else:
                report.steps.append(StepVerdict(k, step.rule, step.just, "countermodel",
                                                countermodel=countermodel_json(*found)))
        else:
            std = std_context(cur, step.path, ctx)
            good = match_scheme(step, step.just, std)
            report.steps.append(StepVerdict(k, step.rule, step.just,
                                            "ok" if good else "scheme-mismatch"))
        cur = replace_at(cur, step.path, step.after)
    report.output_matches = t.output is None or cur == t.output
    report.output_internal = t.status != "reduced" or is_internal(cur)
    return report

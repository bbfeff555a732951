"""Reduction of bounded IST sentences with standard parameters to ∈-sentences.

The rewriting is driven by a fixed, prioritized rule registry.  Every rule is
justified either by first-order logic (``FO``), by the definitional reading of
``st`` (``DEF``), or by exactly one of the schemes Idealization (``I``),
Standardization (``S``) and Transfer (``T``).  Strategy: take the first rule in
priority order that matches anywhere, at its outermost-leftmost match.

Registry, in priority order::

    def-st        st t  ~>  exists st y . y = t
    iff-elim      (p <-> q) ~> (p -> q) & (q -> p)       external p or q only
    imp-elim      (p -> q) ~> ~p | q
    neg-neg, neg-and, neg-or, neg-quant                 negation normal form
    T-elim        Q st x . M ~> Q x . M     M internal, parameters standard
    I-swap        exists x.. forall st a.. M ~> forall st fin A.. exists x.. forall a in A.. M
    I-swap-dual   forall x.. exists st a.. M ~> exists st fin A.. forall x.. exists a in A.. M
    S-fun         forall st x in X . exists st y in Y . M ~> exists st g . forall st x in X . ...
    S-fun-dual    exists st x in X . forall st y in Y . M ~> forall st g . exists st x in X . ...
    and-pull, or-pull, and-merge, or-merge, exists-comm, forall-comm

The FO rules are used only in forms that are valid over every domain,
including an empty standard part, so that bounded countermodel search can
audit them.  S-fun carries no functionality condition on ``g``: for standard
``g`` and ``x`` the section ``{y : <x,y> in g}`` is standard, so it has a
standard element whenever it is nonempty.
"""
from __future__ import annotations

from dataclasses import dataclass

from .classify import ClassReport, Offender, boundedness, is_internal
from .macros import default_macros, elaborate, instantiate
from .syntax import (And, App, Eq, Iff, Implies, In, Not, Or, Quant, St, Var,
                     all_vars, children, exists, forall, free_vars, fresh_name,
                     has_macros, rename_bound, replace_at, show, size, subformula,
                     term_vars)
from .trace import Trace, TraceStep

DEFAULT_MAX_STEPS = 10000


class NoMatch(Exception):
    """The rule's left-hand side does not match at the position."""


class SideConditionFailed(Exception):
    def __init__(self, condition, detail=""):
        self.condition = condition
        super().__init__(f"{condition}: {detail}" if detail else condition)


class Unreducible(Exception):
    def __init__(self, report: ClassReport, trace: Trace = None, reason="unbounded"):
        self.report = report
        self.trace = trace
        self.reason = reason
        names = ", ".join(o.var for o in report.offenders)
        super().__init__(f"unreducible ({reason}); offenders: {names or '-'}")


class StepLimitExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Position:
    """What a rule may know about where it is applied."""
    std: frozenset          # variables standard at this position
    internal_above: str     # kind of the nearest internal quantifier ancestor, or ""
    avoid: frozenset        # every variable name in the whole formula


@dataclass(frozen=True)
class Rule:
    id: str
    just: str
    apply: object            # (subformula, Position) -> (after, instance)
    doc: str = ""


def _ext(f):
    return not is_internal(f)


def _dual(kind):
    return "forall" if kind == "exists" else "exists"


# ------------------------------------------------------------ DEF and FO

def _def_st(g, pos):
    if not isinstance(g, St):
        raise NoMatch
    y = fresh_name("y", pos.avoid)
    return exists(y, Eq(Var(y), g.term), st=True), None


def _iff_elim(g, pos):
    if not (isinstance(g, Iff) and _ext(g)):
        raise NoMatch
    return And(Implies(g.left, g.right), Implies(g.right, g.left)), None


def _imp_elim(g, pos):
    if not (isinstance(g, Implies) and _ext(g)):
        raise NoMatch
    return Or(Not(g.left), g.right), None


def _neg(cls):
    def rule(g, pos):
        if not (isinstance(g, Not) and isinstance(g.body, cls) and _ext(g)):
            raise NoMatch
        b = g.body
        if cls is Not:
            return b.body, None
        if cls is And:
            return Or(Not(b.left), Not(b.right)), None
        if cls is Or:
            return And(Not(b.left), Not(b.right)), None
        return Quant(_dual(b.kind), b.external, b.finite, b.var, b.bound, Not(b.body)), None
    return rule


# ---------------------------------------------------------------- Transfer

def _t_elim(g, pos):
    if not (isinstance(g, Quant) and g.external):
        raise NoMatch
    if not is_internal(g.body):
        raise SideConditionFailed("internal-matrix", show(g.body))
    loose = free_vars(g) - pos.std
    if loose:
        raise SideConditionFailed("standard-parameters", ", ".join(sorted(loose)))
    return Quant(g.kind, False, g.finite, g.var, g.bound, g.body), None


# ------------------------------------------------------------ Idealization

def _block(g, kind, external):
    """Maximal run of quantifiers of one kind/flavour starting at ``g``."""
    qs = []
    while isinstance(g, Quant) and g.kind == kind and g.external == external:
        if not external and (g.bound is not None or g.finite):
            break
        qs.append(g)
        g = g.body
    return qs, g


def _i_swap(inner_kind):
    outer_kind = _dual(inner_kind)     # "forall" st-block under "exists" for I-swap

    def rule(g, pos):
        xs, rest = _block(g, inner_kind, False)
        if not xs:
            raise NoMatch
        as_, matrix = _block(rest, outer_kind, True)
        if not as_:
            raise NoMatch
        if not is_internal(matrix):
            raise SideConditionFailed("internal-matrix", show(matrix))
        avoid = set(pos.avoid)
        sets = []
        for a in as_:
            base = a.var.upper() if a.var != a.var.upper() else a.var + "s"
            name = fresh_name(base, avoid)
            avoid.add(name)
            sets.append(name)
        # innermost first: relativize each standard variable to its finite set
        body = matrix
        for a, name in reversed(list(zip(as_, sets))):
            if a.bound is not None:
                guard = In(Var(a.var), a.bound)
                body = Implies(guard, body) if outer_kind == "forall" else And(guard, body)
            body = Quant(outer_kind, False, a.finite, a.var, Var(name), body)
        for x in reversed(xs):
            body = Quant(inner_kind, False, False, x.var, None, body)
        for name in reversed(sets):
            body = Quant(outer_kind, True, True, name, None, body)
        return body, None
    return rule


# ---------------------------------------------------------- Standardization

def pair_in(gname, x, y, avoid=frozenset()):
    """Elaborated ``app(g,x) = y``: some element of g codes the pair <x,y>."""
    body = instantiate(default_macros()["app"], (Var(gname), Var(x), Var(y)),
                       set(avoid) | {gname, x, y})
    return elaborate(body)


def standardization_instance(q_outer, q_inner, matrix, avoid):
    """The S instance standardizing ``{<x,y> in X x Y : matrix}`` used by S-fun."""
    X, Y = q_outer.bound, q_inner.bound
    x, y = q_outer.var, q_inner.var
    avoid = set(avoid) | {x, y}
    X0 = fresh_name("X", avoid); avoid.add(X0)
    Y0 = fresh_name("Y", avoid); avoid.add(Y0)
    z = fresh_name("z", avoid); avoid.add(z)
    ispair = instantiate(default_macros()["ispair"], (Var(z), Var(x), Var(y)), avoid)
    ispair = elaborate(ispair)
    avoid |= all_vars(ispair)
    phi = exists(x, exists(y, And(And(ispair, And(In(Var(x), X), In(Var(y), Y))), matrix)))
    bic = Iff(In(Var(z), Var(Y0)), And(In(Var(z), Var(X0)), phi))
    return forall(X0, exists(Y0, forall(z, bic, st=True), st=True), st=True)


def _s_fun(dual):
    outer_kind, inner_kind = ("exists", "forall") if dual else ("forall", "exists")
    wanted_above = "forall" if dual else "exists"

    def rule(g, pos):
        if not (isinstance(g, Quant) and g.external and g.kind == outer_kind):
            raise NoMatch
        h = g.body
        if not (isinstance(h, Quant) and h.external and h.kind == inner_kind):
            raise NoMatch
        if g.finite or h.finite:
            raise SideConditionFailed("non-finite-quantifiers")
        for q in (g, h):
            if not (isinstance(q.bound, Var) and q.bound.name in pos.std):
                raise SideConditionFailed("standard-bound", q.var)
        M = h.body
        if not is_internal(M):
            raise SideConditionFailed("internal-matrix", show(M))
        if not free_vars(M) - pos.std - {g.var, h.var}:
            raise SideConditionFailed("needs-standardization", "Transfer applies")
        if pos.internal_above != wanted_above:
            raise SideConditionFailed("internal-context", pos.internal_above or "none")
        avoid = set(pos.avoid)
        gname = fresh_name("g", avoid); avoid.add(gname)
        x, y = g.var, h.var
        pin = pair_in(gname, x, y, avoid)
        avoid |= all_vars(pin)
        pin2 = pair_in(gname, x, y, avoid)
        avoid |= all_vars(pin2)
        yin = In(Var(y), h.bound)
        if not dual:
            body = And(exists(y, pin), forall(y, Implies(pin2, And(yin, M))))
            inst = standardization_instance(g, h, M, avoid)
        else:
            body = Or(forall(y, Not(pin)), exists(y, And(pin2, Implies(yin, M))))
            inst = standardization_instance(g, h, Not(M), avoid)
        inner = Quant(outer_kind, True, False, x, g.bound, body)
        return Quant(inner_kind, True, False, gname, None, inner), inst
    return rule


# ------------------------------------------------------------------ pulls

def _clear(q, others, avoid):
    """Rename q's variable if it would capture something in ``others``."""
    if q.var in others:
        return rename_bound(q, fresh_name(q.var, set(avoid) | others | all_vars(q)))
    return q


def _and_or_pull(conn, kind):
    def rule(g, pos):
        if not isinstance(g, conn):
            raise NoMatch
        for side in (0, 1):
            q, other = (g.left, g.right) if side == 0 else (g.right, g.left)
            if isinstance(q, Quant) and q.external and q.kind == kind:
                q = _clear(q, free_vars(other), pos.avoid)
                body = conn(q.body, other) if side == 0 else conn(other, q.body)
                return q.with_body(body), None
        raise NoMatch
    return rule


def _merge(conn, kind):
    def rule(g, pos):
        if not isinstance(g, conn):
            raise NoMatch
        a, b = g.left, g.right
        if not all(isinstance(q, Quant) and q.external and q.kind == kind for q in (a, b)):
            raise NoMatch
        if (a.finite, a.bound) != (b.finite, b.bound):
            raise SideConditionFailed("same-domain")
        a = _clear(a, free_vars(b), pos.avoid)
        b = _clear(b, free_vars(a.body) | {a.var}, pos.avoid | {a.var})
        return a.with_body(b.with_body(conn(a.body, b.body))), None
    return rule


def _comm(kind):
    def rule(g, pos):
        if not (isinstance(g, Quant) and not g.external and g.kind == kind):
            raise NoMatch
        q = g.body
        if not (isinstance(q, Quant) and q.external and q.kind == kind):
            raise NoMatch
        if q.bound is not None and g.var in term_vars(q.bound):
            raise SideConditionFailed("bound-independence", g.var)
        clash = {g.var} | (term_vars(g.bound) if g.bound is not None else set())
        q = _clear(q, clash, pos.avoid)
        return q.with_body(g.with_body(q.body)), None
    return rule


REGISTRY = (
    Rule("def-st", "DEF", _def_st),
    Rule("iff-elim", "FO", _iff_elim),
    Rule("imp-elim", "FO", _imp_elim),
    Rule("neg-neg", "FO", _neg(Not)),
    Rule("neg-and", "FO", _neg(And)),
    Rule("neg-or", "FO", _neg(Or)),
    Rule("neg-quant", "FO", _neg(Quant)),
    Rule("T-elim", "T", _t_elim),
    Rule("I-swap", "I", _i_swap("exists")),
    Rule("I-swap-dual", "I", _i_swap("forall")),
    Rule("S-fun", "S", _s_fun(False)),
    Rule("S-fun-dual", "S", _s_fun(True)),
    Rule("and-pull", "FO", _and_or_pull(And, "exists")),
    Rule("or-pull", "FO", _and_or_pull(Or, "forall")),
    Rule("and-merge", "FO", _merge(And, "forall")),
    Rule("or-merge", "FO", _merge(Or, "exists")),
    Rule("exists-comm", "FO", _comm("exists")),
    Rule("forall-comm", "FO", _comm("forall")),
)
RULES = {r.id: r for r in REGISTRY}


# ----------------------------------------------------------- positions

def positions(f, std=frozenset()):
    """Outermost-leftmost traversal yielding ``(path, node, std, internal_above)``."""
    def go(g, path, std, above):
        yield path, g, std, above
        if isinstance(g, Quant):
            inner = std | {g.var} if g.external else std - {g.var}
            yield from go(g.body, path + (0,), inner, above if g.external else g.kind)
            return
        for k, c in enumerate(children(g)):
            yield from go(c, path + (k,), std, above)
    yield from go(f, (), frozenset(std), "")


def position_at(f, path, std=frozenset()):
    for p, g, s, above in positions(f, std):
        if p == tuple(path):
            return Position(s, above, frozenset(all_vars(f)))
    raise IndexError(f"no subformula at {list(path)}")


def apply_rule(rule, f, path, standard_ctx=frozenset()):
    """Apply ``rule`` (a Rule or rule id) at ``path``; returns the new formula.

    Raises :class:`NoMatch` or :class:`SideConditionFailed`.
    """
    if isinstance(rule, str):
        rule = RULES[rule]
    g = subformula(f, path)
    after, _ = rule.apply(g, position_at(f, path, standard_ctx))
    return replace_at(f, tuple(path), after)


# --------------------------------------------------------------- measure

def measure(f):
    """Lexicographic termination measure; every registry step strictly lowers it.

    Components: st atoms; weighted external <-> nodes; external -> nodes;
    negation weight over external arguments; external quantifiers; internal
    quantifiers above external ones; connectives above external quantifiers;
    quantifier alternations that block the next Idealization step.
    """
    m = [0] * 8

    def go(g, iffs, int_above, conns, block):
        ext = _ext(g)
        if isinstance(g, St):
            m[0] += 1
        if isinstance(g, Iff) and ext:
            m[1] += 2 ** iffs
            iffs += 1
        if isinstance(g, Implies) and ext:
            m[2] += 1
        if isinstance(g, Not) and _ext(g.body):
            m[3] += size(g.body)
        if isinstance(g, Quant):
            if g.external:
                m[4] += 1
                m[5] += len(int_above)
                m[6] += conns
                if int_above:
                    wanted = int_above[-1]
                    for anc in block:
                        bad = ("forall", "exists") if wanted == "exists" else ("exists", "forall")
                        if (anc, g.kind) == bad:
                            m[7] += 1
                go(g.body, iffs, int_above, conns, block + (g.kind,))
            else:
                go(g.body, iffs, int_above + (g.kind,), conns, ())
            return
        if isinstance(g, (And, Or, Implies, Iff)):
            conns += 1
        for c in children(g):
            go(c, iffs, int_above, conns, block)

    go(f, 0, (), 0, ())
    return tuple(m)


# ---------------------------------------------------------------- driver

def _exempt(f, off: Offender, ctx):
    """Unbounded quantifiers that Transfer or Idealization consumes directly."""
    q = subformula(f, off.path)
    pos = position_at(f, off.path, ctx)
    if is_internal(q.body) and free_vars(q) <= pos.std:
        return True
    g = q
    while isinstance(g, Quant) and g.external and g.kind == q.kind:
        g = g.body
    if not is_internal(g):
        return False
    path = list(off.path)
    while path:
        parent = subformula(f, path[:-1])
        if isinstance(parent, Quant) and parent.external and parent.kind == q.kind:
            path.pop()
            continue
        return (isinstance(parent, Quant) and not parent.external
                and parent.kind == _dual(q.kind) and parent.bound is None
                and not parent.finite)
    return False


def reduce(f, standard_ctx=frozenset(), max_steps=DEFAULT_MAX_STEPS, macros=None):
    """Reduce ``f`` to an internal sentence; returns ``(output, trace)``.

    Raises :class:`Unreducible` for inputs outside the bounded class (other
    than quantifiers Transfer or Idealization absorb directly) and when no rule
    applies to a remaining external quantifier.
    """
    ctx = frozenset(standard_ctx)
    if has_macros(f):
        raise ValueError("reduce expects a macro-free formula; elaborate it first")
    loose = free_vars(f) - ctx
    if loose:
        raise ValueError(f"free variables outside the standard context: {sorted(loose)}")
    trace = Trace(f, ctx=tuple(sorted(ctx)))
    report = boundedness(f, ctx, macros)
    blocking = [o for o in report.offenders if not _exempt(f, o, ctx)]
    if blocking:
        trace.status = "unreducible"
        raise Unreducible(ClassReport(report.internal, report.free, report.standard_assumed,
                                      False, blocking), trace)
    cur = f
    mu = measure(cur)
    for _ in range(max_steps):
        step = _next_step(cur, ctx)
        if step is None:
            break
        cur = replace_at(cur, step.path, step.after)
        new_mu = measure(cur)
        assert new_mu < mu, f"measure did not decrease at {step.rule}: {mu} -> {new_mu}"
        mu = new_mu
        trace.steps.append(step)
    else:
        raise StepLimitExceeded(f"no normal form within {max_steps} steps")
    trace.output = cur
    if not is_internal(cur):
        trace.status = "unreducible"
        stuck = [Offender(g.var, p, "no rule applies")
                 for p, g, _, _ in positions(cur, ctx) if isinstance(g, Quant) and g.external]
        raise Unreducible(ClassReport(False, free_vars(f), set(ctx), report.bounded, stuck),
                          trace, reason="stuck")
    trace.status = "reduced"
    return cur, trace


def _next_step(f, ctx):
    avoid = frozenset(all_vars(f))
    nodes = list(positions(f, ctx))
    for rule in REGISTRY:
        for path, g, std, above in nodes:
            try:
                after, inst = rule.apply(g, Position(std, above, avoid))
            except (NoMatch, SideConditionFailed):
                continue
            return TraceStep(rule.id, path, g, after, rule.just, inst)
    return None

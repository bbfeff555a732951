"""Finite structures for the ∈/st language and two independent evaluators.

:func:`evaluate` is a direct recursive truth definition over one structure.
:class:`BatchEvaluator` evaluates a formula over a whole stack of structures
at once with numpy, one array axis per quantified variable; the exhaustive
countermodel search is built on it.

Variables bound by a ``fin`` quantifier are second-sort: they range over
subsets of the universe (of the standard part, for ``forall st fin``).  An
element belongs to such a subset in the obvious way; a subset is never a
member of anything, never standard, and equal only to itself.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .syntax import (And, App, Eq, Iff, Implies, In, Not, Or, Pred, Quant, St, Var)


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class FiniteStructure:
    universe: tuple
    membership: frozenset = frozenset()
    standard: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(self.universe))
        object.__setattr__(self, "membership", frozenset(map(tuple, self.membership)))
        object.__setattr__(self, "standard", frozenset(self.standard))
        u = set(self.universe)
        if not all(a in u and b in u for a, b in self.membership):
            raise ValueError("membership must lie inside universe x universe")
        if not self.standard <= u:
            raise ValueError("standard must be a subset of the universe")

    def member(self, a, b):
        return (a, b) in self.membership

    def equal(self, a, b):
        return a == b

    def is_standard(self, a):
        return a in self.standard

    @classmethod
    def from_codes(cls, n, mem_code, std_code):
        """Structure number ``mem_code`` (bit ``i*n+j`` means i ∈ j) of size n."""
        mem = {(i, j) for i in range(n) for j in range(n) if mem_code >> (i * n + j) & 1}
        std = {i for i in range(n) if std_code >> i & 1}
        return cls(tuple(range(n)), frozenset(mem), frozenset(std))

    def to_json(self):
        idx = {a: k for k, a in enumerate(self.universe)}
        return {
            "universe": len(self.universe),
            "membership": sorted([idx[a], idx[b]] for a, b in self.membership),
            "standard": sorted(idx[a] for a in self.standard),
        }


def all_structures(n, with_standard=True):
    """Every structure on ``range(n)``, in code order."""
    for m in range(1 << (n * n)):
        for s in range(1 << n) if with_standard else (0,):
            yield FiniteStructure.from_codes(n, m, s)


# ------------------------------------------------------ scalar evaluator

def _subsets(elems):
    elems = list(elems)
    for r in range(len(elems) + 1):
        for c in itertools.combinations(elems, r):
            yield frozenset(c)


def _value(t, env):
    if isinstance(t, App):
        raise EvaluationError(f"macro term {t} must be elaborated first")
    try:
        return env[t.name]
    except KeyError:
        raise EvaluationError(f"unbound variable {t.name}") from None


def _is_set(v):
    return isinstance(v, frozenset)


def _member(M, a, b):
    if _is_set(a):
        return False
    if _is_set(b):
        return a in b
    return M.member(a, b)


def evaluate(M, env, f) -> bool:
    """Tarski truth of ``f`` in ``M`` under ``env``.

    ``M`` needs ``universe``, ``member``, ``equal`` and ``is_standard``; finite
    structures and materialized ultrapowers both qualify.
    """
    if isinstance(f, In):
        return _member(M, _value(f.left, env), _value(f.right, env))
    if isinstance(f, Eq):
        a, b = _value(f.left, env), _value(f.right, env)
        if _is_set(a) or _is_set(b):
            return a == b
        return M.equal(a, b)
    if isinstance(f, St):
        a = _value(f.term, env)
        return not _is_set(a) and M.is_standard(a)
    if isinstance(f, Pred):
        raise EvaluationError(f"macro predicate {f.head} must be elaborated first")
    if isinstance(f, Not):
        return not evaluate(M, env, f.body)
    if isinstance(f, And):
        return evaluate(M, env, f.left) and evaluate(M, env, f.right)
    if isinstance(f, Or):
        return evaluate(M, env, f.left) or evaluate(M, env, f.right)
    if isinstance(f, Implies):
        return (not evaluate(M, env, f.left)) or evaluate(M, env, f.right)
    if isinstance(f, Iff):
        return evaluate(M, env, f.left) == evaluate(M, env, f.right)
    if isinstance(f, Quant):
        if f.finite:
            pool = [x for x in M.universe if M.is_standard(x)] if f.external else M.universe
            domain = list(_subsets(pool))
        elif f.external:
            domain = [x for x in M.universe if M.is_standard(x)]
        else:
            domain = list(M.universe)
        if f.bound is not None:
            bound = _value(f.bound, env)
            domain = [x for x in domain if _member(M, x, bound)]
        results = (evaluate(M, {**env, f.var: x}, f.body) for x in domain)
        return any(results) if f.kind == "exists" else all(results)
    raise TypeError(f"not a formula: {f!r}")


# ------------------------------------------------------- batch evaluator

class BatchEvaluator:
    """Evaluate formulas over a broadcastable stack of structures of size n.

    ``mem`` has shape ``batch + (n, n)``, ``std`` shape ``batch + (n,)`` and the
    optional ``eq`` shape ``batch + (n, n)`` (identity when omitted).  Results
    have shape ``batch + (dims of the listed axis variables)``.
    """

    def __init__(self, n, mem, std, eq=None):
        self.n = n
        self.mem = np.asarray(mem, dtype=bool)
        self.std = np.asarray(std, dtype=bool)
        self.nb = self.mem.ndim - 2
        self.eq = None if eq is None else np.asarray(eq, dtype=bool)
        self.eye_e = np.eye(n, dtype=bool).reshape((1,) * self.nb + (n, n))
        self._subset_tables = None

    def _subsets(self):
        # second-sort tables are only built when a fin quantifier needs them
        if self._subset_tables is None:
            n, k, lead = self.n, 1 << self.n, (1,) * self.nb
            sub = (np.arange(k)[None, :] >> np.arange(n)[:, None] & 1).astype(bool)
            sub_b = sub.reshape(lead + sub.shape)
            # subset s lies inside the standard part
            std_subsets = np.all(~sub_b | self.std[..., :, None], axis=-2)
            eye_s = np.eye(k, dtype=bool).reshape(lead + (k, k))
            self._subset_tables = sub_b, std_subsets, eye_s
        return self._subset_tables

    @property
    def sub_b(self):
        return self._subsets()[0]

    @property
    def std_subsets(self):
        return self._subsets()[1]

    @property
    def eye_s(self):
        return self._subsets()[2]

    def const(self, value):
        return np.full((1,) * self.nb, bool(value)), ()

    def dim(self, sort):
        return self.n if sort == "e" else 1 << self.n

    # -- axis bookkeeping
    def _expand(self, arr, axes, target):
        if tuple(axes) == tuple(target):
            return arr
        perm = [axes.index(v) for v in target if v in axes]
        arr = np.transpose(arr, list(range(self.nb)) + [self.nb + p for p in perm])
        present = [v for v in target if v in axes]
        shape = list(arr.shape[:self.nb])
        it = iter(arr.shape[self.nb:])
        for v in target:
            shape.append(next(it) if v in present else 1)
        return arr.reshape(shape)

    def _align(self, a, b):
        (x, ax), (y, ay) = a, b
        target = tuple(ax) + tuple(v for v in ay if v not in ax)
        return self._expand(x, ax, target), self._expand(y, ay, target), target

    # -- atoms
    def _term(self, t, env, sorts):
        if isinstance(t, App):
            raise EvaluationError(f"macro term {t} must be elaborated first")
        name = t.name
        if name in sorts:
            return sorts[name], ("axis", name)
        if name in env:
            kind, val = env[name]
            return kind, ("const", val)
        raise EvaluationError(f"unbound variable {name}")

    def _binary_table(self, table, s, t):
        """Index a batch+(d1,d2) table by two term references."""
        (ks, vs), (kt, vt) = s, t
        if ks == "const" and kt == "const":
            return table[..., vs, vt], ()
        if ks == "const":
            return table[..., vs, :], (vt,)
        if kt == "const":
            return table[..., :, vt], (vs,)
        if vs == vt:
            return np.diagonal(table, axis1=-2, axis2=-1), (vs,)
        return table, (vs, vt)

    def _unary_table(self, table, s):
        ks, vs = s
        if ks == "const":
            return table[..., vs], ()
        return table, (vs,)

    def ev(self, f, env=None, sorts=None):
        """Return ``(array, axes)``; env maps names to ("e"|"s", index)."""
        env = env or {}
        sorts = sorts or {}
        if isinstance(f, In):
            (sa, ra), (sb, rb) = self._term(f.left, env, sorts), self._term(f.right, env, sorts)
            if sa == "s":
                return self.const(False)
            if sb == "s":
                return self._binary_table(self.sub_b, ra, rb)
            return self._binary_table(self.mem, ra, rb)
        if isinstance(f, Eq):
            (sa, ra), (sb, rb) = self._term(f.left, env, sorts), self._term(f.right, env, sorts)
            if sa != sb:
                return self.const(False)
            if sa == "s":
                return self._binary_table(self.eye_s, ra, rb)
            return self._binary_table(self.eye_e if self.eq is None else self.eq, ra, rb)
        if isinstance(f, St):
            sa, ra = self._term(f.term, env, sorts)
            if sa == "s":
                return self.const(False)
            return self._unary_table(self.std, ra)
        if isinstance(f, Pred):
            raise EvaluationError(f"macro predicate {f.head} must be elaborated first")
        if isinstance(f, Not):
            arr, ax = self.ev(f.body, env, sorts)
            return ~arr, ax
        if isinstance(f, (And, Or, Implies, Iff)):
            x, y, ax = self._align(self.ev(f.left, env, sorts), self.ev(f.right, env, sorts))
            if isinstance(f, And):
                return x & y, ax
            if isinstance(f, Or):
                return x | y, ax
            if isinstance(f, Implies):
                return ~x | y, ax
            return x == y, ax
        if isinstance(f, Quant):
            return self._quant(f, env, sorts)
        raise TypeError(f"not a formula: {f!r}")

    def _quant(self, f, env, sorts):
        sort = "s" if f.finite else "e"
        env = {k: v for k, v in env.items() if k != f.var}
        inner = {**sorts, f.var: sort}
        if f.external:
            guard = (self.std_subsets if sort == "s" else self.std), (f.var,)
        else:
            guard = np.ones((1,) * self.nb + (self.dim(sort),), dtype=bool), (f.var,)
        if f.bound is not None:
            g2 = self.ev(In(Var(f.var), f.bound), env, inner)
            x, y, ax = self._align(guard, g2)
            guard = x & y, ax
        body = self.ev(f.body, env, inner)
        g, b, ax = self._align(guard, body)
        axis = self.nb + ax.index(f.var)
        rest = tuple(v for v in ax if v != f.var)
        if f.kind == "exists":
            return np.any(g & b, axis=axis), rest
        return np.all(~g | b, axis=axis), rest

    def truth(self, f, env=None, sorts=None, order=None):
        """Evaluate and lay out the axes in ``order`` (default: sorted names)."""
        arr, ax = self.ev(f, env, sorts)
        order = tuple(sorted(ax)) if order is None else tuple(order)
        arr = self._expand(arr, ax, order)
        target = np.broadcast_shapes(arr.shape, self.mem.shape[:self.nb]
                                     + tuple(self.dim((sorts or {}).get(v, "e")) for v in order))
        return np.broadcast_to(arr, target)


def structure_stack(n, with_standard=True, mem_codes=None):
    """Membership stack of shape (R, 1, n, n) and standard stack (1, S, n)."""
    if mem_codes is None:
        mem_codes = np.arange(1 << (n * n), dtype=np.int64)
    bits = (mem_codes[:, None] >> np.arange(n * n)) & 1
    mem = bits.astype(bool).reshape(len(mem_codes), 1, n, n)
    s_codes = np.arange(1 << n) if with_standard else np.zeros(1, dtype=np.int64)
    std = ((s_codes[:, None] >> np.arange(n)) & 1).astype(bool).reshape(1, len(s_codes), n)
    return mem, std

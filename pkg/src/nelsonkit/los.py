"""Finite ultrapowers and the quantifier "for U-many indices".

Everything here is a finite stand-in for an infinitary construction.  On a
finite index set every ultrafilter is principal, so the checks below test the
bookkeeping (ranks, truncation ``F[i]``, the nesting order ``U i_r ... U i_1``)
rather than anything a non-principal ultrafilter would add.

Index vectors are tuples of positions into ``Ultrafilter.index_set``; the
leaves of a U-formula see the index points themselves.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .structures import BatchEvaluator, FiniteStructure, evaluate, structure_stack
from .classify import is_internal
from .syntax import And, Eq, In, Not, Or, Quant, Var, exists, free_vars, show

MAX_ELEMENTS = 1 << 20


class SizeLimitExceeded(ValueError):
    pass


# ------------------------------------------------------------ ultrafilters

def _mask(points, index_set):
    pos = {p: k for k, p in enumerate(index_set)}
    m = 0
    for p in points:
        m |= 1 << pos[p]
    return m


@dataclass(frozen=True)
class Ultrafilter:
    """A family of subsets of a finite index set, stored as position bitmasks."""
    index_set: tuple
    family: frozenset          # bitmasks over positions of index_set

    @classmethod
    def principal(cls, index_set, point):
        index_set = tuple(index_set)
        bit = 1 << index_set.index(point)
        k = len(index_set)
        return cls(index_set, frozenset(m for m in range(1 << k) if m & bit))

    @property
    def size(self):
        return len(self.index_set)

    @property
    def members(self):
        return [frozenset(p for k, p in enumerate(self.index_set) if m >> k & 1)
                for m in sorted(self.family)]

    def contains(self, subset):
        return _mask(subset, self.index_set) in self.family

    def table(self):
        """Boolean lookup ``t[mask]`` for every subset of the index set."""
        t = np.zeros(1 << self.size, dtype=bool)
        t[list(self.family)] = True
        return t

    def generator(self):
        """The point a principal ultrafilter concentrates on, else None."""
        for k, p in enumerate(self.index_set):
            if (1 << k) in self.family:
                return p
        return None

    def is_ultrafilter(self):
        k = self.size
        full = (1 << k) - 1
        fam = self.family
        if 0 in fam:
            return False
        if any((m in fam) == ((full ^ m) in fam) for m in range(1 << k)):
            return False
        if any(a & b not in fam for a in fam for b in fam):
            return False
        return all(b in fam for a in fam for b in range(1 << k) if a & b == a)


def all_ultrafilters(index_set):
    """All ultrafilters on a finite set: one principal ultrafilter per point."""
    return [Ultrafilter.principal(index_set, p) for p in index_set]


def ultrafilters_by_search(index_set):
    """Every ultrafilter found by exhaustive search over families of subsets.

    A family satisfying the ultra condition picks exactly one set from each
    complementary pair, so only those ``2^(2^(k-1))`` families are tried.
    """
    index_set = tuple(index_set)
    k = len(index_set)
    full = (1 << k) - 1
    pairs = [(m, full ^ m) for m in range(1 << k) if m < full ^ m]
    found = []
    for choice in itertools.product((0, 1), repeat=len(pairs)):
        fam = frozenset(p[c] for p, c in zip(pairs, choice))
        u = Ultrafilter(index_set, fam)
        if u.is_ultrafilter():
            found.append(u)
    return found


# ------------------------------------------------------------- U-formulas

class UFormula:
    """Formulas over index variables, closed under ``U i``, negation and conjunction."""


@dataclass(frozen=True)
class UQ(UFormula):
    var: str
    body: UFormula


@dataclass(frozen=True)
class UNot(UFormula):
    body: UFormula


@dataclass(frozen=True)
class UAnd(UFormula):
    left: UFormula
    right: UFormula


@dataclass(frozen=True)
class IndexPred(UFormula):
    """Leaf ``fn(*points)`` over the named index variables."""
    label: str
    vars: tuple
    fn: Callable = field(compare=False, hash=False)


@dataclass(frozen=True)
class Leaf(UFormula):
    """An internal formula evaluated in a base structure.

    ``params`` maps each free variable of ``formula`` to a ``(vars, fn)`` pair:
    its value in the structure is ``fn(*points)`` for the listed index variables.
    """
    formula: object
    params: tuple               # ((name, vars, fn), ...)

    @property
    def vars(self):
        out = []
        for _, vs, _ in self.params:
            out.extend(v for v in vs if v not in out)
        return tuple(out)


@dataclass(frozen=True)
class UPrefixed:
    """``U i_r ... U i_1 matrix``; ``prefix`` lists ``i_1 .. i_r`` in that order."""
    prefix: tuple
    matrix: UFormula

    def __post_init__(self):
        if len(set(self.prefix)) != len(self.prefix):
            raise ValueError("prefix variables must be distinct")
        if _has_u(self.matrix):
            raise ValueError("the matrix must not contain U")

    def to_uformula(self):
        f = self.matrix
        for i in self.prefix:           # i_1 innermost
            f = UQ(i, f)
        return f


def _has_u(f):
    if isinstance(f, UQ):
        return True
    if isinstance(f, UNot):
        return _has_u(f.body)
    if isinstance(f, UAnd):
        return _has_u(f.left) or _has_u(f.right)
    return False


def u_free(f):
    if isinstance(f, UQ):
        return u_free(f.body) - {f.var}
    if isinstance(f, UNot):
        return u_free(f.body)
    if isinstance(f, UAnd):
        return u_free(f.left) | u_free(f.right)
    return set(f.vars)


def u_vars(f):
    """Every index variable in ``f``, free or bound."""
    if isinstance(f, UQ):
        return u_vars(f.body) | {f.var}
    if isinstance(f, UNot):
        return u_vars(f.body)
    if isinstance(f, UAnd):
        return u_vars(f.left) | u_vars(f.right)
    return set(f.vars)


def u_rename(f, old, new):
    """Rename free occurrences of index variable ``old`` (``new`` must be fresh)."""
    if isinstance(f, UQ):
        return f if f.var == old else UQ(f.var, u_rename(f.body, old, new))
    if isinstance(f, UNot):
        return UNot(u_rename(f.body, old, new))
    if isinstance(f, UAnd):
        return UAnd(u_rename(f.left, old, new), u_rename(f.right, old, new))
    if isinstance(f, IndexPred):
        return IndexPred(f.label, tuple(new if v == old else v for v in f.vars), f.fn)
    return Leaf(f.formula, tuple((n, tuple(new if v == old else v for v in vs), fn)
                                 for n, vs, fn in f.params))


def u_semantics(f, U: Ultrafilter, M=None, env=None) -> bool:
    """Truth of a U-formula: ``U i φ`` holds when ``{i : φ(i)}`` is in ``U``."""
    env = env or {}
    if isinstance(f, UPrefixed):
        f = f.to_uformula()
    if isinstance(f, UQ):
        hits = [p for p in U.index_set if u_semantics(f.body, U, M, {**env, f.var: p})]
        return U.contains(hits)
    if isinstance(f, UNot):
        return not u_semantics(f.body, U, M, env)
    if isinstance(f, UAnd):
        return u_semantics(f.left, U, M, env) and u_semantics(f.right, U, M, env)
    if isinstance(f, IndexPred):
        return bool(f.fn(*(env[v] for v in f.vars)))
    values = {name: fn(*(env[v] for v in vs)) for name, vs, fn in f.params}
    return evaluate(M, values, f.formula)


def _u_step(f):
    """One rewrite at the root, or None."""
    if isinstance(f, UQ) and f.var not in u_free(f.body):
        return f.body                                                  # U1
    if isinstance(f, UNot) and isinstance(f.body, UQ):
        return UQ(f.body.var, UNot(f.body.body))                       # U4
    if isinstance(f, UNot) and isinstance(f.body, UNot):
        return f.body.body
    if isinstance(f, UAnd) and isinstance(f.left, UQ) and isinstance(f.right, UQ):
        i, j = f.left.var, f.right.var                                 # U3
        right = f.right.body
        if i != j:
            if i in u_vars(right):
                return None
            right = u_rename(right, j, i)
        return UQ(i, UAnd(f.left.body, right))
    return None


def u_normalize(f):
    """Apply the U1, U3 and U4 rewrites (and double negation) to a fixpoint."""
    if isinstance(f, UPrefixed):
        f = f.to_uformula()
    changed = True
    while changed:
        f, changed = _u_pass(f)
    return f


def _u_pass(f):
    changed = False
    if isinstance(f, UQ):
        body, changed = _u_pass(f.body)
        f = UQ(f.var, body)
    elif isinstance(f, UNot):
        body, changed = _u_pass(f.body)
        f = UNot(body)
    elif isinstance(f, UAnd):
        left, c1 = _u_pass(f.left)
        right, c2 = _u_pass(f.right)
        f, changed = UAnd(left, right), c1 or c2
    new = _u_step(f)
    if new is not None:
        return new, True
    return f, changed


def u_entailment(phi, psi, var, U, M=None, env=None):
    """Monotonicity: if ``phi -> psi`` at every index then ``U var phi -> U var psi``.

    Returns ``(premise, conclusion)``; the law says premise implies conclusion.
    """
    env = env or {}
    premise = all(not u_semantics(phi, U, M, {**env, var: p})
                  or u_semantics(psi, U, M, {**env, var: p}) for p in U.index_set)
    conclusion = (not u_semantics(UQ(var, phi), U, M, env)) or u_semantics(UQ(var, psi), U, M, env)
    return premise, conclusion


# ------------------------------------------------------------ filter stages

def fip(sets, index_set):
    """Finite intersection property of a finite family (over a finite index set)."""
    inter = set(index_set)
    for s in sets:
        inter &= set(s)
        if not inter:
            return False
    return True


@dataclass(frozen=True)
class FilterStage:
    index_set: tuple
    sets: tuple
    label: str = "U_0"
    chosen: tuple = ()          # for each candidate pair: "A" or "C"


def powerset_index(V):
    """All subsets of V, ordered by size, then by position of their elements in V."""
    V = list(V)
    return tuple(frozenset(c) for r in range(len(V) + 1) for c in itertools.combinations(V, r))


def build_filter_greedy(V, candidate_pairs=()):
    """Start from ``{I_a : a in V}`` and add, in order, A when it keeps f.i.p., else C."""
    I = powerset_index(V)
    universe = set(I)
    sets = [frozenset(i for i in I if a in i) for a in V]
    assert fip(sets, I)
    chosen = []
    for A, C in candidate_pairs:
        A, C = frozenset(A), frozenset(C)
        if not (A <= universe and C <= universe):
            raise ValueError("candidate sets must consist of subsets of V")
        if fip(sets + [A], I):
            sets.append(A)
            chosen.append("A")
        elif fip(sets + [C], I):
            sets.append(C)
            chosen.append("C")
        else:
            raise ValueError("neither candidate keeps the finite intersection property")
        assert fip(sets, I), "finite intersection property lost"
    label = f"U_{len(chosen)}" if chosen else "U_0"
    return FilterStage(I, tuple(sets), label, tuple(chosen))


def extend_to_ultrafilter(stage: FilterStage) -> Ultrafilter:
    """Principal ultrafilter at the first point of the intersection of all stage sets."""
    inter = set(stage.index_set)
    for s in stage.sets:
        inter &= set(s)
    for p in stage.index_set:
        if p in inter:
            return Ultrafilter.principal(stage.index_set, p)
    raise RuntimeError("stage has an empty intersection; f.i.p. was violated")


def parse_candidate(spec, V):
    """Subset of P(V) from ``card>=k``, ``card<=k``, ``has:a`` or ``lacks:a``."""
    I = powerset_index(V)
    if spec.startswith("card>="):
        k = int(spec[6:])
        return frozenset(i for i in I if len(i) >= k)
    if spec.startswith("card<="):
        k = int(spec[6:])
        return frozenset(i for i in I if len(i) <= k)
    if spec.startswith("has:"):
        return frozenset(i for i in I if spec[4:] in i)
    if spec.startswith("lacks:"):
        return frozenset(i for i in I if spec[6:] not in i)
    raise ValueError(f"bad candidate spec {spec!r}")


# ------------------------------------------------------- ranked parameters

@dataclass(frozen=True)
class UElement:
    """A function ``I^rank -> M``; ``values`` lists it over index vectors in
    lexicographic order of positions, the last coordinate varying fastest."""
    rank: int
    values: tuple

    def at(self, i, k):
        """``F[i]``: the value at the first ``rank`` coordinates of ``i``."""
        if len(i) < self.rank:
            raise ValueError(f"index vector of length {len(i)} is shorter than rank {self.rank}")
        flat = 0
        for c in i[:self.rank]:
            flat = flat * k + c
        return self.values[flat]


def star(z):
    """``*z``: the rank-0 function with value ``z``."""
    return UElement(0, (z,))


@dataclass(frozen=True)
class RankedSymbol:
    name: str
    rank: int


def rank(f, params):
    """Largest rank of a parameter occurring in ``f``; 0 when there is none.

    ``params`` maps names to objects with a ``rank`` (UElement or RankedSymbol).
    """
    names = set(f) if isinstance(f, (set, frozenset, list, tuple)) else free_vars(f)
    return max((params[n].rank for n in names if n in params), default=0)


def index_subst(f, params, i, k):
    """The base-structure assignment for ``f[i]``: each parameter F becomes ``F[i]``."""
    r = rank(f, params)
    if len(i) < r:
        raise ValueError(f"index vector of length {len(i)} is shorter than rank {r}")
    return {n: params[n].at(i, k) for n in free_vars(f) if n in params}


# -------------------------------------------------------------- ultrapower

def u_reduce(T, ufam, R):
    """Collapse the trailing ``R`` index axes of T, innermost (``i_1``) first."""
    for _ in range(R):
        axis = T.ndim - R
        k = T.shape[axis]
        masks = np.tensordot(np.moveaxis(T, axis, -1).astype(np.int64),
                             1 << np.arange(k, dtype=np.int64), axes=([-1], [0]))
        T = ufam[masks]
        R -= 1
    return T


class Ultrapower:
    """All functions ``I^q -> M`` for ``q <= r`` with ∈*, =* and st*.

    ``F ∈* G`` holds when ``U i_p ... U i_1 (F[i] ∈ G[i])`` for
    ``p = max(rank F, rank G)``; =* likewise.  Both are computed at the top
    rank r, where the extra U quantifiers are vacuous, and st* F means
    ``F =* *x`` for some x.
    """

    def __init__(self, M: FiniteStructure, r: int, U: Ultrafilter):
        self.base, self.r, self.U = M, r, U
        n, k = len(M.universe), U.size
        total = sum(n ** (k ** q) for q in range(r + 1))
        if n ** (k ** r) > MAX_ELEMENTS or total > MAX_ELEMENTS:
            raise SizeLimitExceeded(f"{total} elements exceed the limit {MAX_ELEMENTS}")
        self.k = k
        self.elements = []
        for q in range(r + 1):
            for vals in itertools.product(range(n), repeat=k ** q):
                self.elements.append(UElement(q, tuple(M.universe[v] for v in vals)))
        self.index = {e: j for j, e in enumerate(self.elements)}
        self.lifted = self._lift()
        mem = np.zeros((n, n), dtype=bool)
        pos = {a: j for j, a in enumerate(M.universe)}
        for a, b in M.membership:
            mem[pos[a], pos[b]] = True
        self.base_mem = mem
        ufam = U.table()
        L = self.lifted                                    # (E, k, ..., k)
        E = len(self.elements)
        Lr = L.reshape(E, -1)
        memT = mem[Lr[:, None, :], Lr[None, :, :]].reshape((E, E) + (k,) * r)
        eqT = (Lr[:, None, :] == Lr[None, :, :]).reshape((E, E) + (k,) * r)
        self.mem = u_reduce(memT, ufam, r)
        self.eq = u_reduce(eqT, ufam, r)
        self.stars = [self.index[star(z)] for z in M.universe]
        self.std = self.eq[:, self.stars].any(axis=1)
        self.universe = tuple(range(E))

    def _lift(self):
        """Every element as an array over I^r (axes i_1 .. i_r), by truncation."""
        k, r = self.k, self.r
        pos = {a: j for j, a in enumerate(self.base.universe)}
        out = np.zeros((len(self.elements),) + (k,) * r, dtype=np.int64)
        for j, e in enumerate(self.elements):
            v = np.array([pos[x] for x in e.values], dtype=np.int64)
            v = v.reshape((k,) * e.rank + (1,) * (r - e.rank))
            out[j] = np.broadcast_to(v, (k,) * r)
        return out

    def __len__(self):
        return len(self.elements)

    def element(self, e: UElement) -> int:
        return self.index[e]

    def star(self, z) -> int:
        return self.index[star(z)]

    # the interface evaluate() expects
    def member(self, a, b):
        return bool(self.mem[a, b])

    def equal(self, a, b):
        return bool(self.eq[a, b])

    def is_standard(self, a):
        return bool(self.std[a])

    def exact_member(self, a, b):
        """``∈*`` at the pair's own rank via nested U quantifiers (no lifting)."""
        return self._exact(a, b, lambda x, y: self.base.member(x, y))

    def exact_equal(self, a, b):
        return self._exact(a, b, lambda x, y: x == y)

    def _exact(self, a, b, rel):
        F, G = self.elements[a], self.elements[b]
        p = max(F.rank, G.rank)
        names = tuple(f"i{j}" for j in range(1, p + 1))
        pos = {q: j for j, q in enumerate(self.U.index_set)}

        def fn(*pts):
            i = tuple(pos[q] for q in pts)
            return rel(F.at(i, self.k), G.at(i, self.k))
        return u_semantics(UPrefixed(names, IndexPred("rel", names, fn)), self.U)


def ultrapower(M, r, U):
    return Ultrapower(M, r, U)


# ---------------------------------------------------------------- Łoś check

def los_sides(M, U, r, f, params):
    """Truth of ``f`` in the ultrapower and of ``U i_r ... U i_1 (f[i] in M)``."""
    if not is_internal(f):
        raise ValueError("Łoś applies to internal formulas")
    if rank(f, params) > r:
        raise ValueError("rank of the formula exceeds r")
    P = Ultrapower(M, r, U)
    env = {n: P.element(e) for n, e in params.items()}
    left = evaluate(P, env, f)
    names = tuple(f"i{j}" for j in range(1, r + 1))
    pos = {q: j for j, q in enumerate(U.index_set)}

    def at(*pts):
        i = tuple(pos[q] for q in pts)
        return evaluate(M, index_subst(f, params, i, U.size), f)
    right = u_semantics(UPrefixed(names, IndexPred("f[i]", names, at)), U)
    return left, right


def los_check(M, U, r, f, params) -> bool:
    left, right = los_sides(M, U, r, f, params)
    return left == right


def skolem_witness(M, U, r, f, var, params):
    """Rank-r function picking, at each index, the first witness of ``exists var . f``.

    Returns ``(F, premise, holds)``: ``premise`` is ``U i (exists var . f)[i]`` and
    ``holds`` whether ``f(F)`` is true in the ultrapower.
    """
    k = U.size
    vals = []
    for i in itertools.product(range(k), repeat=r):
        env = index_subst(f, params, i, k)
        pick = next((x for x in M.universe if evaluate(M, {**env, var: x}, f)), M.universe[0])
        vals.append(pick)
    F = UElement(r, tuple(vals))
    P = Ultrapower(M, r, U)
    premise = los_sides(M, U, r, exists(var, f), params)[1]
    env = {n: P.element(e) for n, e in params.items()}
    env[var] = P.element(F)
    return F, premise, evaluate(P, env, f)


# ------------------------------------------------------ vectorized grid

def los_check_all(P: Ultrapower, f, names=("F", "G")):
    """Both sides of the Łoś equivalence for every assignment of ``names``.

    Returns two boolean arrays indexed by the element numbers of the names.
    """
    return _los_batch([P], f, names)


def _los_batch(Ps, f, names):
    first = Ps[0]
    k, r = first.k, first.r
    n = len(first.base.universe)
    E = len(first)
    mem = np.stack([P.mem for P in Ps])
    std = np.zeros((len(Ps), E), dtype=bool)
    ev = BatchEvaluator(E, mem, std, eq=first.eq[None])
    sorts = {v: "e" for v in names}
    left = ev.truth(f, {}, sorts, order=names)
    base = BatchEvaluator(n, np.stack([P.base_mem for P in Ps]), np.zeros((len(Ps), n), bool))
    T = base.truth(f, {}, sorts, order=names)                  # (S, n, ..., n)
    L = first.lifted.reshape(E, -1)                            # (E, k^r)
    # gather T at (F[i], G[i], ...) for every assignment and index vector
    grids = np.meshgrid(*[np.arange(E)] * len(names), indexing="ij")
    gathered = T[(slice(None),) + tuple(L[g] for g in grids)]  # (S, E.., k^r)
    gathered = gathered.reshape(gathered.shape[:-1] + (k,) * r)
    right = u_reduce(gathered, first.U.table(), r)
    return left, right


TERMS0 = ("F", "G")


def _atoms(terms):
    out = []
    for s in terms:
        for t in terms:
            out.append(In(Var(s), Var(t)))
            out.append(Eq(Var(s), Var(t)))
    return out


def enumerate_formulas(max_depth=2, params=TERMS0):
    """Internal formulas over the parameters with up to ``max_depth`` prefix quantifiers.

    Matrices are literals and conjunctions or disjunctions of two distinct
    atoms; every prefix variable occurs in the matrix.
    """
    bound = ("x", "y")
    seen = set()
    for depth in range(max_depth + 1):
        vs = bound[:depth]
        atoms = _atoms(params + vs)
        mats = [a for a in atoms] + [Not(a) for a in atoms]
        for a, b in itertools.combinations(atoms, 2):
            mats.append(And(a, b))
            mats.append(Or(a, b))
        for kinds in itertools.product(("exists", "forall"), repeat=depth):
            for m in mats:
                if not set(vs) <= free_vars(m):
                    continue
                f = m
                for kind, v in reversed(list(zip(kinds, vs))):
                    f = Quant(kind, False, False, v, None, f)
                key = show(f)
                if key not in seen:
                    seen.add(key)
                    yield f


@dataclass(frozen=True)
class GridCell:
    size: int
    index_size: int
    r: int
    u_index: int
    formula: str
    cases: int
    left_true: int
    right_true: int
    mismatches: int

    def to_json(self):
        return {"M": self.size, "I": self.index_size, "r": self.r, "U": self.u_index,
                "formula": self.formula, "cases": self.cases, "left_true": self.left_true,
                "right_true": self.right_true, "mismatches": self.mismatches}


def los_grid(max_size=2, max_index=2, max_rank=2, max_depth=2, formulas=None):
    """Exhaustive Łoś grid; yields one :class:`GridCell` per configuration and formula.

    Each cell covers every base structure of the given size and every
    assignment of ultrapower elements to the parameters F and G.
    """
    formulas = list(formulas if formulas is not None else enumerate_formulas(max_depth))
    for n in range(1, max_size + 1):
        mem, _ = structure_stack(n, with_standard=False)
        bases = [FiniteStructure.from_codes(n, c, 0) for c in range(mem.shape[0])]
        for k in range(1, max_index + 1):
            I = tuple(range(k))
            for r in range(max_rank + 1):
                for ui, U in enumerate(all_ultrafilters(I)):
                    Ps = [Ultrapower(M, r, U) for M in bases]
                    for f in formulas:
                        left, right = _los_batch(Ps, f, TERMS0)
                        yield GridCell(n, k, r, ui, show(f), int(left.size),
                                       int(left.sum()), int(right.sum()),
                                       int((left != right).sum()))


def grid_jsonl(cells):
    return "\n".join(json.dumps(c.to_json()) for c in cells)

"""Acceptance suite: one test per headline criterion, each reporting a PASS/FAIL line.

Run under pytest (the lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""
import itertools
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, random_formula, rng
from nelsonkit.classify import boundedness, is_internal
from nelsonkit.corpus import load, los_manifest
from nelsonkit.los import (IndexPred, Leaf, UAnd, UNot, UQ, Ultrafilter, Ultrapower,
                           all_ultrafilters, build_filter_greedy, extend_to_ultrafilter,
                           los_grid, powerset_index, u_entailment, u_normalize,
                           u_semantics, ultrafilters_by_search)
from nelsonkit.macros import elaborate
from nelsonkit.reduce import Unreducible, reduce
from nelsonkit.structures import FiniteStructure
from nelsonkit.syntax import Eq, In, Var, alpha_equiv, parse, show
from nelsonkit.verify import check_trace, match_axiom


def record(name, ok, detail):
    ACCEPTANCE[name] = (ok, detail)
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


# ------------------------------------------------------------ reduction

def test_reduction_soundness_surrogate():
    start = time.perf_counter()
    entries = load("bounded.txt")
    bounded, failures = 0, []
    for e in entries:
        f = elaborate(parse(e.text))
        if boundedness(f, set(e.ctx)).bounded:
            bounded += 1
        try:
            out, trace = reduce(f, set(e.ctx))
        except Unreducible:
            failures.append((e.line, "unreducible"))
            continue
        if not is_internal(out):
            failures.append((e.line, "output not st-free"))
        report = check_trace(trace, max_size=4)
        if not report.ok:
            failures.append((e.line, [v.to_json() for v in report.steps if v.verdict != "ok"]))
    elapsed = time.perf_counter() - start
    ok = bounded >= 20 and not failures and elapsed < 60
    record("reduction soundness surrogate", ok,
           f"{bounded} bounded sentences, {len(failures)} failures, size <= 4, {elapsed:.1f}s (< 60s)")
    assert bounded >= 20
    assert not failures, failures
    assert elapsed < 60


def test_irreducibility_diagnostic():
    (entry,) = load("star.txt")
    f = elaborate(parse(entry.text))
    report = boundedness(f, set())
    offenders = [o.var for o in report.offenders]
    with pytest.raises(Unreducible) as info:
        reduce(f, set())
    refused = [o.var for o in info.value.report.offenders]
    ok = (not report.bounded and offenders == ["G"] and refused == ["G"])
    record("irreducibility diagnostic", ok,
           f"bounded={report.bounded}, offenders={offenders}, reduce refused with {refused}")
    assert ok


# ------------------------------------------------------------------ Łoś

def test_los_exhaustive():
    start = time.perf_counter()
    manifest = los_manifest()
    assert manifest == {"max_size": 2, "max_index": 2, "max_rank": 2, "max_depth": 2}
    # the grid uses all_ultrafilters; confirm that really is every ultrafilter
    for k in (1, 2):
        found = {u.family for u in ultrafilters_by_search(range(k))}
        assert found == {u.family for u in all_ultrafilters(range(k))}
    cells = failures = cases = 0
    formulas = set()
    for cell in los_grid(**manifest):
        cells += 1
        cases += cell.cases
        failures += cell.mismatches
        formulas.add(cell.formula)
    elapsed = time.perf_counter() - start
    ok = failures == 0 and cells > 0 and elapsed < 300
    record("Łoś exhaustive check", ok,
           f"{len(formulas)} formulas, {cells} cells, {cases} cases, {failures} failures, "
           f"{elapsed:.1f}s (< 300s)")
    assert failures == 0
    assert elapsed < 300


# --------------------------------------------------------------- U laws

def _random_uformula(r, depth, ivars, M, U):
    n = len(M.universe)
    if depth <= 0 or r.random() < 0.25:
        vs = tuple(r.sample(ivars, r.randrange(0, min(2, len(ivars)) + 1)))
        if r.random() < 0.5:
            table = {pts: r.random() < 0.5 for pts in itertools.product(U.index_set, repeat=len(vs))}
            return IndexPred("t", vs, lambda *pts, t=table: t[pts])
        atom = (In if r.random() < 0.5 else Eq)(Var("p"), Var("q"))
        params = []
        for name in ("p", "q"):
            table = {pts: r.randrange(n) for pts in itertools.product(U.index_set, repeat=len(vs))}
            params.append((name, vs, lambda *pts, t=table: t[pts]))
        return Leaf(atom, tuple(params))
    k = r.randrange(3)
    if k == 0:
        return UQ(r.choice(ivars), _random_uformula(r, depth - 1, ivars, M, U))
    if k == 1:
        return UNot(_random_uformula(r, depth - 1, ivars, M, U))
    return UAnd(_random_uformula(r, depth - 1, ivars, M, U),
                _random_uformula(r, depth - 1, ivars, M, U))


def _random_triple(r):
    k = r.randint(1, 4)
    U = r.choice(all_ultrafilters(tuple(range(k))))
    n = r.randint(1, 3)
    M = FiniteStructure.from_codes(n, r.randrange(1 << n * n), 0)
    return U, M


def _lift(f, r):
    """Wrap ``f`` so that U-laws have something to act on."""
    i = r.choice(("i", "j"))
    shape = r.randrange(3)
    if shape == 0:
        return UNot(UQ(i, f))
    if shape == 1:
        return UAnd(UQ(i, f), UQ(i, f))
    return UQ(i, UQ("k", f))


def test_u_law_suite():
    r = rng(4)
    preserved = rewrites = entail_checked = entail_premises = 0
    for _ in range(1000):
        U, M = _random_triple(r)
        f = _lift(_random_uformula(r, 3, ["i", "j", "k"], M, U), r)
        g = u_normalize(f)
        rewrites += g != f
        env = {v: r.choice(U.index_set) for v in ("i", "j", "k")}
        preserved += u_semantics(f, U, M, env) == u_semantics(g, U, M, env)
        phi = _random_uformula(r, 2, ["i", "j"], M, U)
        chi = _random_uformula(r, 2, ["i", "j"], M, U)
        for psi in (UNot(UAnd(UNot(phi), UNot(chi))), chi):
            premise, conclusion = u_entailment(phi, psi, "i", U, M, env)
            entail_premises += premise
            entail_checked += (not premise) or conclusion
    u5 = True
    for size in (1, 2, 3):
        V = "abc"[:size]
        Uf = extend_to_ultrafilter(build_filter_greedy(V))
        for a in V:
            u5 &= u_semantics(UQ("i", IndexPred("a in i", ("i",), lambda i, a=a: a in i)), Uf)
    ok = preserved == 1000 and entail_checked == 2000 and u5 and rewrites > 0
    record("U-law suite", ok,
           f"U1/U3/U4 preserved {preserved}/1000 ({rewrites} rewritten), "
           f"U2 entailment {entail_checked}/2000 ({entail_premises} with premise), U5 {u5}")
    assert ok


# --------------------------------------------------------------- filter

def _fip_oracle(sets, I):
    """f.i.p. by enumerating every nonempty finite subfamily."""
    for size in range(1, len(sets) + 1):
        for fam in itertools.combinations(sets, size):
            if not frozenset.intersection(*fam):
                return False
    return True


def test_greedy_filter():
    r = rng(5)
    runs = 0
    for _ in range(100):
        V = "abcd"[:r.randint(1, 4)]
        I = powerset_index(V)
        pairs = []
        for _ in range(r.randint(0, 6)):
            A = frozenset(i for i in I if r.random() < 0.5)
            pairs.append((A, frozenset(I) - A))
        for cut in range(len(pairs) + 1):
            stage = build_filter_greedy(V, pairs[:cut])
            assert _fip_oracle(stage.sets, I)
        U = extend_to_ultrafilter(stage)
        members = {frozenset(m) for m in U.members}
        for mask in range(1 << len(I)):
            S = frozenset(p for k, p in enumerate(I) if mask >> k & 1)
            assert (S in members) != (frozenset(I) - S in members)
        for a in V:
            assert frozenset(i for i in I if a in i) in members
        assert all(s in members for s in stage.sets)
        runs += 1
    record("greedy filter construction", runs == 100,
           f"{runs}/100 random candidate sequences: f.i.p. after every selection, ultra, property (A)")


# ----------------------------------------------------------- regularity

def test_ultrapower_regularity():
    configs = checked = 0
    for n in (1, 2, 3):
        for code in range(1 << n * n):
            M = FiniteStructure.from_codes(n, code, 0)
            for k in (1, 2, 3):
                for r in (0, 1, 2):
                    if n ** (k ** r) > 1000:
                        continue
                    for U in all_ultrafilters(tuple(range(k))):
                        P = Ultrapower(M, r, U)
                        s = [P.star(z) for z in M.universe]
                        for x in M.universe:
                            for y in M.universe:
                                assert M.member(x, y) == P.member(s[x], s[y])
                                assert (x == y) == P.equal(s[x], s[y])
                        eq, mem = P.eq.astype(int), P.mem.astype(int)
                        assert eq.diagonal().all() and (P.eq == P.eq.T).all()
                        assert ((eq @ eq > 0) <= P.eq).all()
                        assert ((eq @ mem > 0) <= P.mem).all()
                        assert ((mem @ eq > 0) <= P.mem).all()
                        assert (P.std == P.eq[:, s].any(axis=1)).all()
                        assert ((eq @ P.std.astype(int) > 0) <= P.std).all()
                        configs += 1
                        checked += len(P) ** 2
    record("ultrapower regularity", True,
           f"{configs} ultrapowers (|M| <= 3, principal U, r <= 2), {checked} element pairs")


# --------------------------------------------------------------- syntax

def test_syntax_round_trip():
    r = rng(7)
    failures = 0
    for _ in range(10000):
        f = random_formula(r, 5)
        g = parse(show(f))
        if not alpha_equiv(f, g):
            failures += 1
    record("syntax round trip", failures == 0, f"{10000 - failures}/10000 alpha-identical, depth <= 5")
    assert failures == 0


# --------------------------------------------------------------- schemes

MUTANTS = {
    "I": ["(forall st fin A . exists x . forall a in A . Phi(x,a) & st a) <-> "
          "(exists x . forall st a . Phi(x,a) & st a)",
          "(forall st fin A . exists x . forall a in A . Phi(x,a)) <-> "
          "(exists x . forall a . Phi(x,a))"],
    "S": ["forall X . exists st Y . forall st x . (x in Y <-> x in X & Phi(x))",
          "forall st X . exists Y . forall st x . (x in Y <-> x in X & Phi(x))"],
    "T": ["(exists x . Phi(x,b)) -> (exists st x . Phi(x,b))",
          "(exists x . Phi(x) & st x) -> (exists st x . Phi(x) & st x)"],
}


def test_scheme_matcher():
    matched, rejected = [], []
    for e in load("schemes.txt"):
        scheme, text = e.text.split(":", 1)
        matched.append(match_axiom(parse(text), scheme))
    for scheme, texts in MUTANTS.items():
        for text in texts:
            rejected.append(not match_axiom(parse(text), scheme))
    ok = len(matched) == 3 and all(matched) and all(rejected)
    record("scheme matcher", ok,
           f"{sum(matched)}/3 transcribed instances match, {sum(rejected)}/{len(rejected)} mutants rejected")
    assert ok


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            try:
                fn()
            except AssertionError as exc:
                if name not in {k.replace(" ", "_") for k in ACCEPTANCE}:
                    print(f"[FAIL] {name}: {exc}")

import itertools

import numpy as np
import pytest

from conftest import random_formula, rng
from nelsonkit.macros import elaborate
from nelsonkit.reduce import reduce
from nelsonkit.structures import (BatchEvaluator, EvaluationError, FiniteStructure,
                                  all_structures, evaluate)
from nelsonkit.syntax import (And, Eq, Iff, Implies, In, Not, Or, Quant, St, Var,
                              free_vars, parse)
from nelsonkit.trace import Trace, TraceStep
from nelsonkit.verify import (check_trace, countermodel, iso_representatives,
                              match_axiom, match_scheme)

M0 = FiniteStructure(("a", "b"), {("a", "b")}, {"a"})


def test_eval_examples():
    assert evaluate(M0, {"a": "a", "b": "b"}, parse("a in b"))
    assert not evaluate(M0, {"x": "b"}, parse("st x"))
    assert evaluate(M0, {"x": "b"}, parse("exists st y . y in x"))


def test_eval_unbound_variable():
    with pytest.raises(EvaluationError):
        evaluate(M0, {}, parse("x in y"))


def test_structure_validation():
    with pytest.raises(ValueError):
        FiniteStructure((0,), {(0, 1)}, ())
    with pytest.raises(ValueError):
        FiniteStructure((0,), (), {1})


# ------------------------------------------- independent second evaluator

def _oracle(M, env, f):
    """Plain re-implementation used only to cross-check the library evaluators."""
    U = list(M.universe)
    std = [u for u in U if u in M.standard]

    def val(t):
        return env[t.name]

    def memb(x, y):
        if isinstance(x, frozenset):
            return False
        return x in y if isinstance(y, frozenset) else (x, y) in M.membership

    t = type(f).__name__
    if t == "In":
        return memb(val(f.left), val(f.right))
    if t == "Eq":
        return val(f.left) == val(f.right)
    if t == "St":
        return val(f.term) in std and not isinstance(val(f.term), frozenset)
    if t == "Not":
        return not _oracle(M, env, f.body)
    if t in ("And", "Or", "Implies", "Iff"):
        p, q = _oracle(M, env, f.left), _oracle(M, env, f.right)
        return {"And": p and q, "Or": p or q, "Implies": (not p) or q, "Iff": p == q}[t]
    base = std if f.external else U
    dom = ([frozenset(c) for r in range(len(base) + 1) for c in itertools.combinations(base, r)]
           if f.finite else base)
    if f.bound is not None:
        dom = [d for d in dom if memb(d, val(f.bound))]
    vals = [_oracle(M, {**env, f.var: d}, f.body) for d in dom]
    return any(vals) if f.kind == "exists" else all(vals)


def test_evaluators_agree_on_small_structures():
    g = rng(31)
    names = ["x", "y", "z"]
    formulas = [random_formula(g, 3, names=names, preds=False) for _ in range(40)]
    for f in formulas:
        free = sorted(free_vars(f))
        for n in (1, 2, 3):
            codes = range(1 << n * n) if n < 3 else g.sample(range(1 << 9), 24)
            for code in codes:
                for s in range(1 << n):
                    M = FiniteStructure.from_codes(n, code, s)
                    ev = BatchEvaluator(n, np.array(M_mem(M, n)), np.array(M_std(M, n)))
                    table = ev.truth(f, {}, {v: "e" for v in free}, order=free)
                    for env_vals in itertools.product(range(n), repeat=len(free)):
                        env = dict(zip(free, env_vals))
                        want = _oracle(M, env, f)
                        assert evaluate(M, env, f) == want
                        assert bool(table[env_vals]) == want


def M_mem(M, n):
    return [[M.member(i, j) for j in range(n)] for i in range(n)]


def M_std(M, n):
    return [M.is_standard(i) for i in range(n)]


def test_finite_sort_semantics():
    M = FiniteStructure((0, 1), {(0, 1)}, {0, 1})
    # some finite set of standard elements is not a member of anything
    assert evaluate(M, {}, parse("exists st fin A . forall y . ~ A in y"))
    assert evaluate(M, {}, parse("forall st fin A . exists x . forall a in A . a = a"))
    assert not evaluate(M, {}, parse("forall st fin A . exists x . forall a in A . a in x"))


# ------------------------------------------------------------ countermodel

def test_isomorphism_class_counts():
    assert len(iso_representatives(2, False)[0]) == 10
    assert len(iso_representatives(3, False)[0]) == 104
    # Burnside: (64 + 8) / 2 classes of size-2 structures with a standard part
    assert len(iso_representatives(2, True)[0]) == 36


def test_countermodel_for_quantifier_swap():
    found = countermodel(parse("exists x . forall y . y in x"),
                         parse("forall y . exists x . y in x"), 2)
    assert found is not None
    M, env = found
    assert len(M.universe) == 2
    lhs, rhs = parse("exists x . forall y . y in x"), parse("forall y . exists x . y in x")
    assert evaluate(M, env, lhs) != evaluate(M, env, rhs)


def test_countermodel_for_illegal_capture():
    # pulling a standard existential past a conjunct that mentions its variable
    lhs = parse("(exists st x . x in y) & x in x")
    rhs = parse("exists st x . x in y & x in x")
    M, env = countermodel(lhs, rhs, 4)
    assert len(M.universe) <= 2
    assert evaluate(M, env, lhs) != evaluate(M, env, rhs)


def test_no_countermodel_for_valid_pairs():
    f = parse("exists st x . x in y")
    assert countermodel(f, f, 4) is None
    assert countermodel(parse("~ (x in y & y in z)"), parse("~ x in y | ~ y in z"), 4) is None
    assert countermodel(parse("~ (exists st x in A . x in B)"),
                        parse("forall st x in A . ~ x in B"), 4) is None


def test_countermodel_soundness_random():
    g = rng(33)
    found = 0
    for _ in range(40):
        a = random_formula(g, 2, names=["x", "y"], preds=False)
        b = random_formula(g, 2, names=["x", "y"], preds=False)
        res = countermodel(a, b, 2)
        if res is not None:
            found += 1
            M, env = res
            full = {v: env.get(v, 0) for v in free_vars(a) | free_vars(b)}
            assert evaluate(M, full, a) != evaluate(M, full, b)
    assert found > 0


def test_countermodel_with_set_sorted_free_variable():
    lhs = parse("exists a in A . a in a")
    rhs = parse("forall a in A . a in a")
    M, env = countermodel(lhs, rhs, 2, sorts={"A": "s"})
    assert isinstance(env["A"], frozenset)
    assert evaluate(M, env, lhs) != evaluate(M, env, rhs)


# ------------------------------------------------------------ schemes

def _trace(text, ctx=()):
    return reduce(elaborate(parse(text)), set(ctx))[1]


def test_match_scheme_i_swap():
    t = _trace("exists x . forall st a . a in x")
    step = t.steps[0]
    assert step.just == "I" and match_scheme(step, "I")
    assert not match_scheme(step, "T")


def test_match_scheme_t_rejects_st_matrix():
    step = TraceStep("T-elim", (), parse("exists st x . st x"), parse("exists x . st x"), "T")
    assert not match_scheme(step, "T")


def test_match_scheme_t_requires_standard_parameters():
    step = TraceStep("T-elim", (), parse("exists st x . x in A"), parse("exists x . x in A"), "T")
    assert match_scheme(step, "T", {"A"})
    assert not match_scheme(step, "T", set())


def test_match_scheme_s_shape():
    t = _trace("exists z . forall st x in A . exists st y in B . x in z & y in z", ("A", "B"))
    step = next(s for s in t.steps if s.just == "S")
    assert match_scheme(step, "S", {"A", "B"})
    broken = parse("forall st X . exists st Y . forall st z . (z in Y -> z in X & z = z)")
    assert not match_scheme(TraceStep(step.rule, step.path, step.before, step.after, "S",
                                      broken), "S", {"A", "B"})
    assert not match_scheme(TraceStep(step.rule, step.path, step.before, step.after, "S",
                                      None), "S", {"A", "B"})


def test_match_scheme_s_dual():
    t = _trace("forall z . exists st x in A . forall st y in B . x in z | y in z", ("A", "B"))
    step = next(s for s in t.steps if s.just == "S")
    assert step.rule == "S-fun-dual" and match_scheme(step, "S", {"A", "B"})


def test_match_axiom_t_direction():
    assert match_axiom(parse("(exists x . x in A) -> (exists st x . x in A)"), "T", {"A"})
    assert not match_axiom(parse("(exists x . x in A) -> (exists st x . x in A)"), "T")


# ------------------------------------------------------------ check_trace

def test_corpus_style_trace_checks():
    t = _trace("forall st x in A . exists st y in B . x in y", ("A", "B"))
    assert check_trace(t).ok


def test_swapped_step_breaks_chain():
    t = _trace("exists x . forall st a . a in x")
    s = t.steps[0]
    t.steps[0] = TraceStep(s.rule, s.path, s.after, s.before, s.just)
    report = check_trace(t)
    assert report.steps[0].verdict == "chain-mismatch"
    assert not report.ok


def test_invalid_fo_step_gets_countermodel():
    before = parse("exists x . forall y . y in x")
    after = parse("forall y . exists x . y in x")
    t = Trace(before, [TraceStep("bogus", (), before, after, "FO")], after)
    report = check_trace(t, max_size=2)
    assert report.steps[0].verdict == "countermodel"
    cm = report.steps[0].countermodel
    assert cm["universe"] == 2 and "env" in cm


def test_output_must_be_internal():
    f = parse("exists st x . x = x")
    t = Trace(f, [], f, status="reduced")
    assert not check_trace(t).ok


def test_report_json_round():
    t = _trace("exists x . forall st a . a in x")
    doc = check_trace(t).to_json()
    assert doc["ok"] and len(doc["steps"]) == len(t.steps)
    assert Trace.loads(t.dumps()).to_json() == t.to_json()

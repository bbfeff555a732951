import os
import random

import pytest

from nelsonkit.syntax import (And, Eq, Iff, Implies, In, Not, Or, Pred, Quant, St, Var)

SEED = int(os.environ.get("NELSONKIT_SEED", "20240101"))

NAMES = ["x", "y", "z", "a", "A", "F", "x'", "y''", "n_1"]

# criterion name -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def rng(salt=0):
    return random.Random(SEED * 1000003 + salt)


def random_formula(r, depth, names=NAMES, preds=True):
    """Random formula of depth at most ``depth`` over every constructor."""
    if depth <= 0 or r.random() < 0.2:
        k = r.randrange(4 if preds else 3)
        if k == 0:
            return In(Var(r.choice(names)), Var(r.choice(names)))
        if k == 1:
            return Eq(Var(r.choice(names)), Var(r.choice(names)))
        if k == 2:
            return St(Var(r.choice(names)))
        return Pred("P", tuple(Var(r.choice(names)) for _ in range(r.randrange(1, 3))))
    k = r.randrange(7)
    if k == 0:
        return Not(random_formula(r, depth - 1, names, preds))
    if k <= 4:
        cls = (And, Or, Implies, Iff)[k - 1]
        return cls(random_formula(r, depth - 1, names, preds),
                   random_formula(r, depth - 1, names, preds))
    var = r.choice(names)
    bound = None
    if r.random() < 0.4:
        bound = Var(r.choice([v for v in names if v != var]))
    external = r.random() < 0.5
    finite = r.random() < 0.2
    return Quant(r.choice(("exists", "forall")), external, finite, var, bound,
                 random_formula(r, depth - 1, names, preds))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


@pytest.fixture
def seeded():
    return rng

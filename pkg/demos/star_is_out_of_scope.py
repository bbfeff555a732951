"""The function-standardness sentence has an unbounded standard existential.

The classifier names the offender and the reducer refuses, rather than
producing an internal formula that would be wrong.
"""
from nelsonkit.classify import boundedness
from nelsonkit.macros import elaborate
from nelsonkit.reduce import Unreducible, reduce
from nelsonkit.syntax import parse

STAR = ("forall F . (forall st n . Nat(n) -> st app(F,n)) -> "
        "(exists st G . forall st n . Nat(n) -> app(F,n) = app(G,n))")

f = elaborate(parse(STAR))
report = boundedness(f, set())
print("bounded:", report.bounded)
for o in report.offenders:
    print(f"offender: {o.var} at {list(o.path)} ({o.reason})")

try:
    reduce(f, set())
except Unreducible as exc:
    print(f"reduce refused ({exc.reason}) after {len(exc.trace.steps)} steps")

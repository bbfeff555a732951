"""Reduce a few external sentences to internal ones and check every step."""
from nelsonkit.macros import elaborate
from nelsonkit.reduce import reduce
from nelsonkit.syntax import parse, show
from nelsonkit.verify import check_trace

SENTENCES = [
    ("exists st x . x = x", ()),
    ("exists x . forall st a . a in x", ()),
    ("forall st x in A . exists st y in B . x in y", ("A", "B")),
    ("exists z . forall st x in A . exists st y in B . x in z & y in z", ("A", "B")),
]

for text, ctx in SENTENCES:
    print(f"input:  {text}   (standard: {', '.join(ctx) or 'none'})")
    out, trace = reduce(elaborate(parse(text)), set(ctx))
    for step in trace.steps:
        print(f"  {step.rule:<12} [{step.just}]  {show(step.after)}")
    report = check_trace(trace)
    print(f"output: {show(out)}")
    print(f"check:  {'ok' if report.ok else 'FAILED'}\n")

"""Build a filter over the powerset of V by greedy choice, then extend it."""
from nelsonkit.los import (build_filter_greedy, extend_to_ultrafilter, parse_candidate,
                           powerset_index)

V = "abc"
I = frozenset(powerset_index(V))
specs = ["card>=2", "lacks:a", "has:b"]
pairs = [(parse_candidate(s, V), I - parse_candidate(s, V)) for s in specs]
stage = build_filter_greedy(V, pairs)
for s, c in zip(specs, stage.chosen):
    print(f"{s:<8} -> {'kept' if c == 'A' else 'complement'}")
U = extend_to_ultrafilter(stage)
print("ultrafilter generated by", sorted(U.generator()))

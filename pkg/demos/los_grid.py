"""Exhaustive Łoś check over small ultrapowers.

Every internal formula from the enumerated family is evaluated two ways:
in the ultrapower directly, and as an ultrafilter quantification of its
truth in the base structure. The two must agree on every parameter tuple.
"""
from nelsonkit.los import (UElement, Ultrafilter, Ultrapower, los_grid, los_sides,
                           skolem_witness)
from nelsonkit.structures import FiniteStructure
from nelsonkit.syntax import parse

M = FiniteStructure((0, 1), {(0, 1), (1, 1)}, ())
U = Ultrafilter.principal((0, 1), 1)
P = Ultrapower(M, 1, U)
print(f"base of size {len(M.universe)}, rank-1 ultrapower of size {len(P)}")

F = UElement(1, (0, 1))
print("F in F  (ultrapower, base under U):", los_sides(M, U, 1, parse("F in F"), {"F": F}))
W, premise, holds = skolem_witness(M, U, 1, parse("F in x"), "x", {"F": F})
print(f"witness for exists x . F in x: {W.values} (premise {premise}, holds {holds})")

cells = list(los_grid(2, 2, 1, 1))
print(f"grid: {len(cells)} cells, {sum(c.cases for c in cells)} cases, "
      f"{sum(c.mismatches for c in cells)} mismatches")

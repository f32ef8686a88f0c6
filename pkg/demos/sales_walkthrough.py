"""Dice the six-product, five-store sales cube step by step.

Run: python demos/sales_walkthrough.py
"""

from diamondcube import Agg, dice, kappa, slice_totals
from diamondcube.fixtures import sales_cube

cube = sales_cube()
print(cube, "total sales", round(cube.total_sum, 1))

# slice sums before any pruning
for i, dim in enumerate(cube.dims):
    totals = slice_totals(cube, i, Agg.SUM)
    print(dim.name, {v: round(t, 1) for v, t in zip(dim.values, totals)})

# products need 4 in sales, stores need 10
res = dice(cube, (4, 10), Agg.SUM)
for (p, cells), gone in zip(res.trace, res.evicted):
    print(f"pass {p}: {cells} cells written, evicted {gone or 'nothing'}")

print()
for labels, m in res.diamond.cells():
    print(*labels, m, sep="\t")
print("diamond sum", round(res.diamond.total_sum, 1))

# largest uniform threshold that leaves something behind
print("COUNT kappa", kappa(cube).kappa)
k = kappa(cube, Agg.SUM)
print("SUM kappa ~", round(k.kappa, 4), "within", k.tolerance, "diamond", k.diamond.shape)

"""How many passes does pruning take?

Skewed synthetic cubes settle in a handful of passes; the zig-zag chain
cube needs a pass per pair of peeled cells. Writes one trace CSV per run
into ./traces for plotting elsewhere.

Run: python demos/iteration_traces.py
"""

from pathlib import Path

from diamondcube import dice
from diamondcube.datagen import PowerGenSpec, gen_adversarial_chain, gen_power_cube

out = Path("traces")
out.mkdir(exist_ok=True)

shape = (10, 100, 1000, 10000)
for skew in (1.0, 0.2):
    cube = gen_power_cube(PowerGenSpec(shape, skew, 250_000, seed=0))
    print(f"skew {skew}: observed shape {cube.shape}")
    for k in (5, 15, 40):
        res = dice(cube, k)
        cells = [c for _, c in res.trace]
        print(f"  k={k:3d} passes={res.passes:3d} cells: {cells[:6]}{' ...' if len(cells) > 6 else ''}")
        (out / f"power_a{skew}_k{k}.csv").write_text(res.trace_csv())

for n in (16, 64, 256):
    res = dice(gen_adversarial_chain(n), 2)
    print(f"chain n={n}: {res.passes} passes down to {res.diamond.n_cells} cells")
    (out / f"chain_{n}.csv").write_text(res.trace_csv())

"""Carat numbers of synthetic cubes against the closed-form bounds, and
what binary search saves over stepping k by one.

Run: python demos/kappa_vs_bounds.py
"""

from diamondcube.bounds import kappa_lower_bound, kappa_lower_bound_printed, kappa_upper_bound
from diamondcube.datagen import PowerGenSpec, gen_power_cube
from diamondcube.kappa import kappa_binary, kappa_sequential

print("skew  shape                 lower(exact) lower(loose)  kappa  upper  dices(bin/seq)")
for skew in (1.0, 0.5, 0.2, 0.05, 0.02):
    cube = gen_power_cube(PowerGenSpec((100, 200, 400), skew, 40_000, seed=1))
    stats = cube.stats()
    b = kappa_binary(cube)
    s = kappa_sequential(cube)
    assert b.kappa == s.kappa
    print(f"{skew:<5} {str(cube.shape):21s} {kappa_lower_bound(stats):12d} {kappa_lower_bound_printed(stats):12d}"
          f" {b.kappa:6d} {kappa_upper_bound(stats):6d}  {b.dice_count}/{s.dice_count}")

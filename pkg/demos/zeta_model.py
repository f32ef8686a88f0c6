"""Share of slices marked for deletion before the first pass, when slice
sizes follow a zeta(s) law.

Run: python demos/zeta_model.py
"""

import numpy as np

from diamondcube.bounds import expected_marked_fraction

shape = (1000, 1000, 1000)
grid = np.linspace(1.1, 4.0, 30)
for k in (2, 5, 10, 50):
    fr = [expected_marked_fraction(shape, k, s) for s in grid]
    bar = "".join(" .:-=+*#%@"[min(9, int(f * 10))] for f in fr)
    print(f"k={k:3d} |{bar}| {fr[0]:.3f} -> {fr[-1]:.3f}")

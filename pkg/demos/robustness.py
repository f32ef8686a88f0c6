"""Does kappa survive a few percent of missing cells?

Prints a histogram: rows are kappa values, columns the probability that
any one cell goes missing, entries the number of trials out of 30.

Run: python demos/robustness.py
"""

from diamondcube.datagen import PowerGenSpec, gen_power_cube, robustness_experiment

cube = gen_power_cube(PowerGenSpec((100, 100), 1.5, 2000, seed=0))
table = robustness_experiment(cube, [0.01, 0.02, 0.03, 0.04, 0.05], trials=30, seed=0)
print("unperturbed kappa", table.baseline)
print(table.to_text())

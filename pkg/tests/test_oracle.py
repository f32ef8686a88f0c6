import numpy as np
import pytest

from diamondcube.cube import Agg, Cube, restrict
from diamondcube.datagen import gen_random_cube
from diamondcube.dicing import dice
from diamondcube.fixtures import alternating_matrix_cube
from diamondcube.oracle import (
    NonUniqueDiamond,
    OracleBudget,
    OracleBudgetExceeded,
    brute_force_dcld,
    brute_force_diamond,
    maximal_witnesses,
)


def test_sales(sales):
    expected = dice(sales, (4, 10), Agg.SUM).diamond
    assert brute_force_diamond(sales, (4, 10), Agg.SUM) == expected


def test_zero_carats(sales):
    assert brute_force_diamond(sales, 0, Agg.SUM) == sales


def test_non_unique_report():
    cube = alternating_matrix_cube()
    with pytest.raises(ValueError):
        brute_force_diamond(cube, 2, Agg.SUM)
    with pytest.raises(NonUniqueDiamond) as info:
        brute_force_diamond(cube, 2, Agg.SUM, allow_negative=True)
    report = info.value
    assert len(report.witnesses) == 2 and not report.union_verifies
    shapes = sorted(w.shape for w in report.witnesses)
    assert shapes == [(2, 2), (2, 2)]
    assert len(maximal_witnesses(cube, 2, Agg.SUM)) == 2


def test_budget():
    cube = gen_random_cube((5, 5, 5), 0.5, 0)
    with pytest.raises(OracleBudgetExceeded):
        brute_force_diamond(cube, 1)
    with pytest.raises(OracleBudgetExceeded):
        brute_force_dcld(gen_random_cube((20, 20), 0.5, 0), 10)
    with pytest.raises(ValueError):
        OracleBudget(0)


def test_dcld_two_block(two_block):
    best = brute_force_dcld(two_block, 5)
    assert best.subcube.n_cells == 16
    assert best.subcube.shape == (5, 5)


def test_dcld_whole_and_symmetric(sales):
    assert brute_force_dcld(sales, (6, 5)).subcube == sales
    ones = Cube.from_codes(np.argwhere(np.ones((3, 3))))
    best = brute_force_dcld(ones, 2)
    assert best.objective == 1.0
    assert best.subcube == restrict(ones, [[0, 1], [0, 1]])  # smallest ids win ties


def test_dcld_three_dims_tie_break():
    cube = Cube.from_codes(np.argwhere(np.ones((3, 2, 2))))
    best = brute_force_dcld(cube, (2, 1, 1))
    assert best.subcube.attribute_sets() == [frozenset({"0", "1"}), frozenset({"0"}), frozenset({"0"})]

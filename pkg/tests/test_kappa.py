import math

import pytest

from diamondcube.bounds import kappa_lower_bound, kappa_upper_bound
from diamondcube.cube import Agg, Cube, ingest_facts
from diamondcube.datagen import PowerGenSpec, gen_full_binary_cube, gen_power_cube, gen_random_cube
from diamondcube.dicing import dice, verify_carats
from diamondcube.kappa import kappa, kappa_binary, kappa_sequential
from diamondcube.oracle import brute_force_kappa


def test_sales_count(sales):
    assert kappa_sequential(sales).kappa == 5
    assert kappa_binary(sales).kappa == 5


@pytest.mark.parametrize("d", range(1, 7))
def test_full_binary(d):
    cube = gen_full_binary_cube(d)
    assert kappa_sequential(cube).kappa == kappa_binary(cube).kappa == 2 ** (d - 1)


def test_empty():
    cube = Cube.empty(["a", "b"])
    for method in ("binary", "sequential"):
        res = kappa(cube, method=method)
        assert res.kappa == 0 and res.diamond.n_cells == 0


def test_single_cell_sum():
    cube = ingest_facts([("site", "year", "85")], ["place", "when"])
    for method in ("binary", "sequential"):
        res = kappa(cube, Agg.SUM, method)
        assert res.kappa == 85
        assert res.diamond == cube


def test_power_cube_methods_agree():
    for seed in range(4):
        cube = gen_power_cube(PowerGenSpec((30, 30, 30), 1.5, 2000, seed))
        b, s = kappa_binary(cube), kappa_sequential(cube)
        assert b.kappa == s.kappa
        assert b.diamond == s.diamond


def test_result_invariants():
    for seed in range(10):
        cube = gen_random_cube((7, 6, 5), 0.5, seed, max_measure=5)
        for agg in (Agg.COUNT, Agg.SUM):
            res = kappa_binary(cube, agg)
            k = res.kappa
            assert res.diamond.n_cells > 0
            assert verify_carats(res.diamond, k, agg)
            assert dice(cube, k + 1, agg).empty
            stats = cube.stats()
            assert kappa_lower_bound(stats, agg) <= k <= kappa_upper_bound(stats, agg)
            span = res.upper - res.lower + 1
            assert len(res.probes) <= math.ceil(math.log2(span)) + 1


def test_matches_oracle():
    for seed in range(30):
        cube = gen_random_cube((4, 3, 4), 0.6, seed, max_measure=3)
        for agg in (Agg.COUNT, Agg.SUM):
            assert kappa_binary(cube, agg).kappa == brute_force_kappa(cube, agg)


def test_real_sum(sales):
    b = kappa_binary(sales, Agg.SUM)
    s = kappa_sequential(sales, Agg.SUM)
    assert not b.exact
    assert s.kappa == math.floor(b.kappa)
    assert verify_carats(b.diamond, b.kappa, Agg.SUM)
    assert dice(sales, b.kappa + b.tolerance, Agg.SUM).empty
    with pytest.raises(ValueError):
        kappa_binary(sales, Agg.SUM, tolerance=0)


def test_doubling_bracket():
    cube = gen_power_cube(PowerGenSpec((40, 40), 1.5, 800, 0))
    closed = kappa_binary(cube, bracket="closed")
    doubled = kappa_binary(cube, bracket="doubling")
    assert closed.kappa == doubled.kappa
    with pytest.raises(ValueError):
        kappa_binary(cube, bracket="sideways")


def test_probe_log_recorded(sales):
    res = kappa_binary(sales)
    assert res.probes and all(isinstance(ne, bool) for _, ne in res.probes)
    d = res.to_dict()
    assert d["kappa"] == 5 and d["probes"][0]["k"] == res.probes[0][0]


def test_unknown_method(sales):
    with pytest.raises(ValueError):
        kappa(sales, method="guess")

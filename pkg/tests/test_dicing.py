import os

import numpy as np
import pytest

from diamondcube.cube import Agg, contains, ingest_facts, restrict, union, write_csv
from diamondcube.datagen import PowerGenSpec, gen_adversarial_chain, gen_full_binary_cube, gen_power_cube, gen_random_cube
from diamondcube.dicing import (
    TMPDIR_ENV,
    DiceRunError,
    NonMonotoneError,
    as_carats,
    dice,
    dice_file,
    verify_carats,
)
from diamondcube.fixtures import SALES_DIAMOND_PRODUCTS, SALES_DIAMOND_STORES, alternating_matrix_cube, sales_rows


def test_sales(sales):
    res = dice(sales, (4, 10), Agg.SUM)
    assert res.diamond == restrict(sales, [SALES_DIAMOND_PRODUCTS, SALES_DIAMOND_STORES])
    assert res.trace == [(1, 21), (2, 9), (3, 9)]
    assert res.deleting_passes == 2
    assert res.converged


def test_sales_file_storage_matches(sales, tmp_path):
    mem = dice(sales, (4, 10), Agg.SUM)
    disk = dice(sales, (4, 10), Agg.SUM, storage="file", chunk_rows=7, workdir=tmp_path)
    assert disk.diamond == mem.diamond
    assert disk.trace == mem.trace
    assert disk.evicted == mem.evicted
    assert list(tmp_path.iterdir()) == []  # run directory removed on success


def test_tmpdir_env(sales, tmp_path, monkeypatch):
    monkeypatch.setenv(TMPDIR_ENV, str(tmp_path / "scratch"))
    dice(sales, 2, storage="file")
    assert (tmp_path / "scratch").is_dir()


def test_zero_carats_whole_cube(sales):
    res = dice(sales, 0, Agg.SUM)
    assert res.diamond == sales and res.passes == 1


def test_full_cube_thresholds():
    cube = gen_full_binary_cube(3)
    assert dice(cube, 4).diamond == cube
    assert dice(cube, 5).empty


def test_chain_64():
    res = dice(gen_adversarial_chain(64), 2)
    assert res.diamond.n_cells == 4
    assert res.passes >= 31


@pytest.mark.parametrize("n", [3, 4, 5, 17, 100, 256])
def test_chain_diamond_is_block(n):
    res = dice(gen_adversarial_chain(n), 2)
    assert set(res.diamond.cell_map()) == {(a, b) for a in "01" for b in "01"}


def test_negative_sum_rejected():
    cube = alternating_matrix_cube()
    with pytest.raises(NonMonotoneError):
        dice(cube, 1, Agg.SUM)
    dice(cube, 1, Agg.SUM, allow_negative=True)
    dice(cube, 1, Agg.COUNT)  # counting ignores measure signs


def test_as_carats():
    assert as_carats(3, 2, Agg.COUNT).tolist() == [3, 3]
    with pytest.raises(ValueError):
        as_carats([1, 2, 3], 2)
    with pytest.raises(ValueError):
        as_carats(1.5, 2, Agg.COUNT)
    with pytest.raises(ValueError):
        as_carats(-1, 2, Agg.SUM)


def test_verify_carats(sales):
    diamond = dice(sales, (4, 10), Agg.SUM).diamond
    assert verify_carats(diamond, (4, 10), Agg.SUM)
    assert not verify_carats(sales, (4, 10), Agg.SUM)
    assert verify_carats(diamond.take(np.zeros(0, dtype=np.int64)), (100, 100), Agg.SUM)


def test_fixpoint(sales):
    first = dice(sales, (4, 10), Agg.SUM)
    again = dice(first.diamond, (4, 10), Agg.SUM)
    assert again.diamond == first.diamond and again.passes == 1


def test_trace_non_increasing_and_confirmed():
    for seed in range(20):
        res = dice(gen_random_cube((8, 9, 7), 0.3, seed), 3)
        cells = [c for _, c in res.trace]
        assert cells == sorted(cells, reverse=True)
        if res.passes > 1:
            assert cells[-1] == cells[-2]


def test_row_order_invariance(sales):
    reordered = ingest_facts(list(reversed(sales_rows())), ["product", "store"])
    assert dice(reordered, (4, 10), Agg.SUM).diamond == dice(sales, (4, 10), Agg.SUM).diamond
    rng = np.random.default_rng(0)
    cube = gen_random_cube((6, 6, 6), 0.4, 1)
    for _ in range(5):
        shuffled = cube.take(rng.permutation(cube.n_cells))
        assert dice(shuffled, 3).diamond == dice(cube, 3).diamond


def test_threads_same_diamond(sales):
    for k in [(4, 10), (2, 5), (1, 1)]:
        assert dice(sales, k, Agg.SUM, threads=3).diamond == dice(sales, k, Agg.SUM).diamond
    cube = gen_power_cube(PowerGenSpec((50, 60, 40), 1.5, 5000, 2))
    assert dice(cube, 6, threads=4).diamond == dice(cube, 6).diamond


def test_union_closure():
    rng = np.random.default_rng(3)
    cube = gen_random_cube((6, 6), 0.7, 4)
    found = 0
    for _ in range(200):
        keep = [rng.choice(6, size=int(rng.integers(2, 7)), replace=False) for _ in range(2)]
        a = dice(restrict(cube, keep), 2).diamond
        keep = [rng.choice(6, size=int(rng.integers(2, 7)), replace=False) for _ in range(2)]
        b = dice(restrict(cube, keep), 2).diamond
        if a.n_cells and b.n_cells:
            found += 1
            assert verify_carats(union(a, b), 2)
    assert found > 20


def test_nesting_componentwise():
    cube = gen_random_cube((7, 8, 6), 0.5, 9)
    lo, hi = (2, 3, 2), (3, 3, 4)
    small = dice(cube, hi).diamond
    big = dice(cube, lo).diamond
    assert contains(big, small)
    assert dice(big, hi).diamond == small


def test_tolerance():
    # 0.7 + 0.1 rounds to just under 0.8 in binary floating point
    cube = ingest_facts([("a", "x", "0.7"), ("a", "y", "0.1")], ["p", "q"])
    assert dice(cube, (0.8, 0.1), Agg.SUM).empty
    assert dice(cube, (0.8, 0.1), Agg.SUM, tolerance=1e-9).diamond.n_cells == 2


def test_dice_file(tmp_path, sales):
    path = tmp_path / "s.csv"
    write_csv(sales, path, "sales")
    res = dice_file(path, (4, 10), Agg.SUM, measure="sales")
    assert res.diamond.n_cells == 9


def test_io_failure_reports_pass(sales, tmp_path, monkeypatch):
    import diamondcube.dicing as dicing

    real = dicing._FilePasses.run_pass

    def boom(self, scan):
        if self.pass_no == 2:
            raise OSError("disk full")
        return real(self, scan)

    monkeypatch.setattr(dicing._FilePasses, "run_pass", boom)
    with pytest.raises(DiceRunError) as info:
        dice(sales, (4, 10), Agg.SUM, storage="file", workdir=tmp_path)
    assert info.value.pass_no == 2
    assert os.path.isdir(info.value.run_dir)  # kept for debugging


def test_stats_and_trace_csv(sales):
    res = dice(sales, (4, 10), Agg.SUM)
    assert res.trace_csv().splitlines() == ["pass,cells_remaining", "1,21", "2,9", "3,9"]
    s = res.stats()
    assert s["retained"] == {"product": 3, "store": 3}
    assert s["cell_count"] == 9 and s["passes"] == 3 and s["deleting_passes"] == 2

"""Acceptance suite: one test per primary criterion, each printing a
PASS/FAIL line (also summarised at the end of the pytest run)."""

import math
import tempfile
import time
import tracemalloc
from pathlib import Path

import numpy as np
import pytest

from conftest import DIAMONDS, size_bound_violations
from diamondcube.bounds import (
    expected_marked_fraction,
    kappa_lower_bound,
    kappa_upper_bound,
    max_cells_without_diamond,
    max_sum_without_diamond,
)
from diamondcube.cube import Agg, contains, restrict, write_csv
from diamondcube.datagen import (
    PowerGenSpec,
    gen_adversarial_chain,
    gen_full_binary_cube,
    gen_power_cube,
    gen_random_cube,
    robustness_experiment,
)
from diamondcube.dcld import dcld_local_search, objective
from diamondcube.dicing import _FilePasses, _Tables, dice, dice_file, stream_passes
from diamondcube.fixtures import (
    SALES_DIAMOND_PRODUCTS,
    SALES_DIAMOND_STORES,
    two_block_cube,
    sales_cube,
)
from diamondcube.kappa import kappa_binary, kappa_sequential
from diamondcube.oracle import brute_force_dcld, brute_force_diamond


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    assert ok, f"{name}: {detail}"


def test_sales_reproduction():
    t0 = time.perf_counter()
    res = dice(sales_cube(), (4, 10), Agg.SUM)
    elapsed = time.perf_counter() - t0
    d = res.diamond
    ok = (
        d.attribute_sets() == [frozenset(SALES_DIAMOND_PRODUCTS), frozenset(SALES_DIAMOND_STORES)]
        and d.n_cells == 9
        and set(res.evicted[0]) == {("store", "Chicago"), ("product", "TV")}
        and set(res.evicted[1]) == {("store", "Berlin"), ("product", "Game console"), ("product", "DVD Player")}
        and all(not ev for ev in res.evicted[2:])
        and elapsed < 1.0
    )
    report("sales_reproduction", ok, f"evicted={res.evicted} t={elapsed:.3f}s")


def test_full_binary_cube_kappa():
    t0 = time.perf_counter()
    got = {}
    for d in range(2, 7):
        cube = gen_full_binary_cube(d)
        got[d] = (kappa_sequential(cube).kappa, kappa_binary(cube).kappa)
    elapsed = time.perf_counter() - t0
    ok = all(s == b == 2 ** (d - 1) for d, (s, b) in got.items()) and elapsed < 1.0
    report("full_binary_cube_kappa", ok, f"{got} t={elapsed:.3f}s")


def test_two_block_suite():
    t0 = time.perf_counter()
    cube = two_block_cube()
    diamond = dice(cube, 3).diamond
    quadrant = [str(i) for i in range(5, 10)]
    top_left = restrict(cube, [[str(i) for i in range(5)]] * 2)
    bottom_right = restrict(cube, [quadrant, quadrant])
    local = dcld_local_search(cube, 5)
    best = brute_force_dcld(cube, 5)
    elapsed = time.perf_counter() - t0
    ok = (
        diamond == bottom_right
        and diamond.n_cells == 15
        and objective(top_left)[0] == pytest.approx(0.64)
        and objective(diamond)[0] == pytest.approx(0.60)
        and local.subcube.n_cells == 16 == best.subcube.n_cells
        and elapsed < 1.0
    )
    report("two_block_suite", ok, f"diamond={diamond.n_cells} local={local.subcube.n_cells} "
           f"oracle={best.subcube.n_cells} t={elapsed:.3f}s")


ORACLE_CONFIGS = [
    ((2, 2), None), ((3, 4), None), ((4, 4), None), ((2, 3, 2), None), ((4, 4, 4), None),
    ((3, 4), 3), ((4, 4), 3), ((2, 3, 2), 3), ((4, 4, 4), 3),
]


def test_oracle_equivalence():
    t0 = time.perf_counter()
    mismatches, checked = [], 0
    for shape, max_measure in ORACLE_CONFIGS:
        agg = Agg.COUNT if max_measure is None else Agg.SUM
        for seed in range(100):
            rng = np.random.default_rng([seed, len(shape), max_measure or 0])
            cube = gen_random_cube(shape, float(rng.uniform(0.3, 0.9)), seed, max_measure)
            top = max(1, int(max(cube.weights(agg).sum(), 1)) // max(shape))
            k = [int(rng.integers(0, top + 1)) for _ in shape]
            if brute_force_diamond(cube, k, agg) != dice(cube, k, agg).diamond:
                mismatches.append((shape, max_measure, seed, k))
            checked += 1
    elapsed = time.perf_counter() - t0
    report("oracle_equivalence", not mismatches and elapsed < 60,
           f"{checked} cubes, {len(mismatches)} mismatches t={elapsed:.1f}s")


def _bound_corpus():
    cubes = [sales_cube(), two_block_cube(), gen_adversarial_chain(20)]
    cubes += [gen_full_binary_cube(d) for d in range(2, 7)]
    cubes += [gen_random_cube((5, 6), 0.5, s) for s in range(40)]
    cubes += [gen_random_cube((4, 4, 5), 0.4, s, max_measure=3) for s in range(40)]
    cubes += [gen_power_cube(PowerGenSpec((20, 30, 15), 1.5, 800, s)) for s in range(5)]
    return cubes


def test_bound_suite():
    violations = []
    recorded = len(DIAMONDS)
    rng = np.random.default_rng(7)
    for cube in _bound_corpus():
        aggs = [Agg.COUNT] + ([Agg.SUM] if not cube.has_negative else [])
        for agg in aggs:
            stats = cube.stats()
            kap = kappa_binary(cube, agg).kappa
            if not kappa_lower_bound(stats, agg) <= kap <= kappa_upper_bound(stats, agg):
                violations.append(("kappa range", cube, agg, kap))
    # threshold guarantees on random cubes
    for seed in range(300):
        shape = tuple(int(x) for x in rng.integers(2, 7, size=int(rng.integers(2, 4))))
        k = [int(x) for x in rng.integers(1, 4, size=len(shape))]
        cube = gen_random_cube(shape, float(rng.uniform(0.2, 1.0)), seed, max_measure=4)
        if cube.n_cells > max_cells_without_diamond(shape, k) and dice(cube, k).empty:
            violations.append(("cell threshold", shape, k, seed))
        if cube.total_sum >= max_sum_without_diamond(shape, k) and dice(cube, k, Agg.SUM).empty:
            violations.append(("sum threshold", shape, k, seed))
    bad = size_bound_violations()
    ok = not violations and not bad
    report("bound_suite", ok, f"{len(violations)} violations, size bound on {len(DIAMONDS)} diamonds "
           f"({len(DIAMONDS) - recorded} new) with {len(bad)} failures")


def test_worst_case_convergence():
    t0 = time.perf_counter()
    res = dice(gen_adversarial_chain(64), 2)
    elapsed = time.perf_counter() - t0
    cells = [c for _, c in res.trace]
    expected = {(str(a), str(b)) for a in (0, 1) for b in (0, 1)}
    ok = (
        set(res.diamond.cell_map()) == expected
        and res.passes >= 31
        and all(a > b for a, b in zip(cells[:-2], cells[1:-1]))
        and cells[-1] == cells[-2]
        and elapsed < 5
    )
    report("worst_case_convergence", ok, f"I={res.passes} trace_head={cells[:4]} t={elapsed:.2f}s")


def test_lattice_nesting():
    t0 = time.perf_counter()
    failures, checks = [], 0
    for seed in range(20):
        cube = gen_power_cube(PowerGenSpec((30, 40, 50), 1.3, 3000, seed))
        kap = kappa_binary(cube).kappa
        for k in sorted({1, 2, kap // 2, kap - 1, kap, kap + 1} - {0}):
            lower = dice(cube, k).diamond
            upper = dice(cube, k + 1).diamond
            checks += 1
            if not contains(lower, upper) or dice(lower, k + 1).diamond != upper:
                failures.append((seed, k))
    elapsed = time.perf_counter() - t0
    report("lattice_nesting", not failures and elapsed < 60,
           f"{checks} pairs, {len(failures)} failures t={elapsed:.1f}s")


def test_performance_smoke(tmp_path):
    spec = PowerGenSpec((10, 100, 1000, 10000), 1.0, 1_000_000, 0)
    t0 = time.perf_counter()
    cube = gen_power_cube(spec)
    path = tmp_path / "facts.csv"
    write_csv(cube, path)
    res = dice_file(path, 8, Agg.COUNT, measure="measure", storage="file", workdir=tmp_path)
    elapsed = time.perf_counter() - t0

    # streaming working set: O(sum n_i) slice tables plus chunk buffers. The
    # peak must fit that budget and must not grow with the number of facts.
    quarter = gen_power_cube(PowerGenSpec(spec.shape, 1.0, 250_000, 0))
    peaks = [_stream_peak(c, tmp_path) for c in (quarter, cube)]
    budget = 64 * sum(cube.shape) + 6 * 65536 * (cube.d + 1) * 8
    fact_bytes = cube.coords.nbytes + cube.measures.nbytes
    ok = (
        res.diamond.n_cells > 0
        and elapsed < 60
        and max(peaks) <= budget
        and peaks[1] < 1.25 * peaks[0]
    )
    report("performance_smoke", ok, f"cells={res.diamond.n_cells} passes={res.passes} t={elapsed:.1f}s "
           f"peak(250k,1M)=({peaks[0] / 2**20:.1f},{peaks[1] / 2**20:.1f})MiB "
           f"budget={budget / 2**20:.1f}MiB facts={fact_bytes / 2**20:.0f}MiB")


def _stream_peak(cube, tmp_path) -> int:
    run_dir = Path(tempfile.mkdtemp(dir=tmp_path))
    passes = _FilePasses(cube.d, cube.measures.dtype, run_dir, 65536)
    passes.write_initial(cube.coords, cube.measures)
    tables = _Tables(cube.shape, np.full(cube.d, 8.0), True)
    tracemalloc.start()
    stream_passes(passes, tables, unit=True)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    passes.close(ok=True)
    return peak


def _economics_fixtures():
    yield "binary5", gen_full_binary_cube(5)
    yield "binary6", gen_full_binary_cube(6)
    yield "dense40", gen_random_cube((40, 40), 0.7, 3)
    yield "power", gen_power_cube(PowerGenSpec((60, 60), 1.0, 2500, 1))
    yield "dense3d", gen_random_cube((12, 12, 12), 0.5, 5)


def test_binary_vs_sequential_probes():
    rows, ok = [], True
    for name, cube in _economics_fixtures():
        b = kappa_binary(cube, bracket="closed")
        s = kappa_sequential(cube)
        span = b.upper - b.lower + 1
        good = (
            b.kappa == s.kappa >= 16
            and len(b.probes) <= math.ceil(math.log2(span)) + 1
            and s.dice_count == s.kappa - s.lower + 1
            and b.dice_count < s.dice_count
        )
        ok &= good
        rows.append(f"{name}:k={s.kappa},lb={s.lower},bin={b.dice_count},seq={s.dice_count}")
    report("binary_vs_sequential_probes", ok, " ".join(rows))


def test_robustness_harness():
    t0 = time.perf_counter()
    cube = gen_power_cube(PowerGenSpec((100, 100), 1.5, 2000, 0))
    probs = [0.01, 0.02, 0.03, 0.04, 0.05]
    table = robustness_experiment(cube, probs, 30, seed=0)
    values, counts = table.histogram()
    elapsed = time.perf_counter() - t0
    ok = (
        len(counts[0]) == 5
        and [sum(col) for col in zip(*counts)] == [30] * 5
        and table.mode(0) == table.baseline
        and elapsed < 120
    )
    print(table.to_text())
    report("robustness_harness", ok, f"baseline={table.baseline} modes={[table.mode(j) for j in range(5)]} "
           f"t={elapsed:.1f}s")


def test_zeta_model():
    t0 = time.perf_counter()
    p22 = expected_marked_fraction((10, 20), 2, 2.0)
    grid = np.linspace(1.1, 6.0, 40)
    fracs = [expected_marked_fraction((10, 20), 5, s) for s in grid]
    elapsed = time.perf_counter() - t0
    ok = abs(p22 - 6 / math.pi**2) < 1e-9 and all(np.diff(fracs) > 0) and elapsed < 1
    report("zeta_model", ok, f"P22={p22:.12f} err={abs(p22 - 6 / math.pi**2):.1e} t={elapsed:.3f}s")

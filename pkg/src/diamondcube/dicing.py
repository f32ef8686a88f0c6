"""Multi-pass diamond dicing.

The engine keeps one table of slice totals per dimension (dense arrays
indexed by attribute id, so memory is O(sum n_i)) and streams the surviving
fact rows pass after pass. A row whose attribute values are all still alive
is written to the next pass; any other row is dropped and its contribution
is subtracted from every still-alive slice it belongs to. A value is evicted
the moment its total falls below its threshold, so later rows of the same
pass already see the eviction. The run stops after a pass that drops nothing.

Passes are held in memory for small cubes and in a pair of binary scratch
files otherwise; both routes run the same scan kernel.
"""

from __future__ import annotations

import logging
import os
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .cube import Agg, Cube, Dimension, read_csv, slice_totals

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


__all__ = [
    "DiamondResult",
    "DiceRunError",
    "NonMonotoneError",
    "as_carats",
    "dice",
    "dice_file",
    "verify_carats",
]

log = logging.getLogger(__name__)

TMPDIR_ENV = "DIAMONDCUBE_TMPDIR"
DEFAULT_MEMORY_BUDGET = 20_000_000
DEFAULT_CHUNK_ROWS = 1 << 16


class NonMonotoneError(ValueError):
    """SUM dicing was asked for on a cube holding negative measures."""


class DiceRunError(RuntimeError):
    """A pass failed (typically I/O on the scratch files)."""

    def __init__(self, message: str, pass_no: int, run_dir: str | None = None):
        super().__init__(f"pass {pass_no}: {message}")
        self.pass_no = pass_no
        self.run_dir = run_dir


def as_carats(carats, d: int, agg: Agg | str = Agg.COUNT) -> np.ndarray:
    """Normalise a scalar or length-d carat spec to a float64 vector."""
    agg = Agg.parse(agg)
    k = np.atleast_1d(np.asarray(carats, dtype=np.float64))
    if k.size == 1 and d != 1:
        k = np.full(d, k[0])
    if k.shape != (d,):
        raise ValueError(f"expected 1 or {d} carat values, got {k.size}")
    if not np.all(np.isfinite(k)) or (k < 0).any():
        raise ValueError("carats must be finite and non-negative")
    if agg is Agg.COUNT and not np.all(k == np.floor(k)):
        raise ValueError("COUNT carats must be integers")
    return k


@dataclass
class DiamondResult:
    diamond: Cube
    passes: int
    trace: list[tuple[int, int]]
    evicted: list[list[tuple[str, str]]] = field(default_factory=list)
    carats: tuple[float, ...] = ()
    agg: Agg = Agg.COUNT
    converged: bool = True

    @property
    def empty(self) -> bool:
        return self.diamond.n_cells == 0

    @property
    def deleting_passes(self) -> int:
        """Passes that evicted at least one attribute value."""
        return sum(1 for ev in self.evicted if ev)

    def trace_csv(self) -> str:
        lines = ["pass,cells_remaining"]
        lines += [f"{p},{c}" for p, c in self.trace]
        return "\n".join(lines) + "\n"

    def stats(self) -> dict:
        cube = self.diamond
        return {
            "passes": self.passes,
            "deleting_passes": self.deleting_passes,
            "retained": {dim.name: len(dim) for dim in cube.dims},
            "cell_count": cube.n_cells,
            "density": cube.density,
            "total_sum": cube.total_sum,
            "carats": [float(k) for k in self.carats],
            "agg": self.agg.value,
        }


# scan kernels ----------------------------------------------------------------


@njit(cache=True, nogil=True)
def _scan(coords, weights, offsets, alive, totals, thresholds, keep, evicted, n_evicted):
    d = coords.shape[1]
    dropped = 0
    for r in range(coords.shape[0]):
        ok = True
        for i in range(d):
            if not alive[offsets[i] + coords[r, i]]:
                ok = False
                break
        keep[r] = ok
        if ok:
            continue
        dropped += 1
        w = weights[r]
        for i in range(d):
            slot = offsets[i] + coords[r, i]
            if alive[slot]:
                totals[slot] -= w
                if totals[slot] < thresholds[i]:
                    alive[slot] = False
                    evicted[n_evicted] = slot
                    n_evicted += 1
    return dropped, n_evicted


class _Tables:
    """Slice totals and liveness for every attribute value, flattened."""

    def __init__(self, shape: Sequence[int], thresholds: np.ndarray, integral: bool):
        self.shape = tuple(shape)
        self.offsets = np.zeros(len(shape), dtype=np.int64)
        self.offsets[1:] = np.cumsum(shape)[:-1]
        size = int(sum(shape))
        self.totals = np.zeros(size, dtype=np.int64 if integral else np.float64)
        self.alive = np.zeros(size, dtype=np.bool_)
        self.thresholds = thresholds
        self.evicted = np.zeros(size, dtype=np.int64)
        self.n_evicted = 0

    def accumulate(self, coords: np.ndarray, measures: np.ndarray, unit: bool) -> None:
        for i in range(coords.shape[1]):
            slots = coords[:, i] + self.offsets[i]
            if unit:
                self.totals += np.bincount(slots, minlength=self.totals.size).astype(self.totals.dtype)
            elif self.totals.dtype.kind == "i":
                np.add.at(self.totals, slots, measures)
            else:
                self.totals += np.bincount(slots, weights=measures, minlength=self.totals.size)

    def weights(self, measures: np.ndarray, unit: bool) -> np.ndarray:
        if unit:
            return np.ones(measures.shape[0], dtype=self.totals.dtype)
        return measures.astype(self.totals.dtype, copy=False)

    def seed(self) -> None:
        """Admit exactly the values whose full-cube slice meets its threshold."""
        per_slot = np.repeat(self.thresholds, self.shape)
        self.alive[:] = self.totals >= per_slot
        dead = np.flatnonzero(~self.alive)
        self.evicted[: dead.size] = dead
        self.n_evicted = dead.size

    def split(self, slot: int) -> tuple[int, int]:
        dim = int(np.searchsorted(self.offsets, slot, side="right") - 1)
        return dim, int(slot - self.offsets[dim])

    def alive_ids(self, dim: int) -> np.ndarray:
        lo = self.offsets[dim]
        return np.flatnonzero(self.alive[lo: lo + self.shape[dim]])


# pass storage --------------------------------------------------------------


class _MemoryPasses:
    def __init__(self, coords: np.ndarray, measures: np.ndarray):
        self.coords = coords
        self.measures = measures

    def chunks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        yield self.coords, self.measures

    def run_pass(self, scan) -> tuple[int, int]:
        keep = np.empty(self.coords.shape[0], dtype=np.bool_)
        dropped = scan(self.coords, self.measures, keep)
        if dropped:
            self.coords = self.coords[keep]
            self.measures = self.measures[keep]
        return dropped, self.coords.shape[0]

    def load(self) -> tuple[np.ndarray, np.ndarray]:
        return self.coords, self.measures

    def close(self, ok: bool) -> None:
        pass


class _FilePasses:
    """Two scratch files used alternately as pass input and output."""

    def __init__(self, d: int, mdtype, run_dir: Path, chunk_rows: int):
        self.record = np.dtype([("c", np.int64, (d,)), ("m", mdtype)])
        self.run_dir = run_dir
        self.chunk_rows = chunk_rows
        self.paths = [run_dir / "pass_a.bin", run_dir / "pass_b.bin"]
        self.current = 0
        self.pass_no = 0

    def write_initial(self, coords: np.ndarray, measures: np.ndarray) -> None:
        with open(self.paths[0], "wb") as out:
            for lo in range(0, coords.shape[0], self.chunk_rows):
                hi = lo + self.chunk_rows
                rec = np.empty(min(hi, coords.shape[0]) - lo, dtype=self.record)
                rec["c"] = coords[lo:hi]
                rec["m"] = measures[lo:hi]
                rec.tofile(out)

    def _records(self, path) -> Iterator[np.ndarray]:
        with open(path, "rb") as fh:
            while True:
                rec = np.fromfile(fh, dtype=self.record, count=self.chunk_rows)
                if rec.size == 0:
                    return
                yield rec

    def chunks(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for rec in self._records(self.paths[self.current]):
            yield np.ascontiguousarray(rec["c"]), np.ascontiguousarray(rec["m"])

    def run_pass(self, scan) -> tuple[int, int]:
        src, dst = self.paths[self.current], self.paths[1 - self.current]
        dropped = written = 0
        with open(dst, "wb") as out:
            for rec in self._records(src):
                coords = np.ascontiguousarray(rec["c"])
                measures = np.ascontiguousarray(rec["m"])
                keep = np.empty(rec.size, dtype=np.bool_)
                dropped += scan(coords, measures, keep)
                kept = rec[keep]
                kept.tofile(out)
                written += kept.size
        self.current = 1 - self.current
        return dropped, written

    def load(self) -> tuple[np.ndarray, np.ndarray]:
        rec = np.fromfile(self.paths[self.current], dtype=self.record)
        return np.ascontiguousarray(rec["c"]), np.ascontiguousarray(rec["m"])

    def close(self, ok: bool) -> None:
        if ok:
            shutil.rmtree(self.run_dir, ignore_errors=True)


def _run_dir(workdir) -> Path:
    base = workdir or os.environ.get(TMPDIR_ENV) or None
    if base is not None:
        Path(base).mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix="dice-run-", dir=base))


# driver --------------------------------------------------------------------


def dice(
    cube: Cube,
    carats,
    agg: Agg | str = Agg.COUNT,
    *,
    tolerance: float = 0.0,
    allow_negative: bool = False,
    storage: str = "auto",
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
    chunk_rows: int = DEFAULT_CHUNK_ROWS,
    workdir=None,
    threads: int = 1,
) -> DiamondResult:
    """Compute the diamond of ``cube`` for the given carats.

    ``carats`` is one threshold for every dimension or one per dimension.
    Returns the unique maximal subcube whose every order-1 slice along
    dimension i aggregates to at least ``carats[i]`` (within ``tolerance``),
    together with the per-pass trace. An empty diamond is a normal result.

    ``storage`` picks where passes live: ``"memory"``, ``"file"`` or
    ``"auto"`` (memory when the cube has at most ``memory_budget`` cells).
    ``threads > 1`` switches to a synchronous pass where evictions take
    effect at pass boundaries; the final diamond is the same, the pass
    count may differ.
    """
    agg = Agg.parse(agg)
    k = as_carats(carats, cube.d, agg)
    if agg is Agg.SUM and cube.has_negative and not allow_negative:
        raise NonMonotoneError(
            "SUM dicing needs non-negative measures; the diamond is not unique otherwise "
            "(pass allow_negative=True to proceed anyway)"
        )
    unit = agg is Agg.COUNT
    integral = unit or cube.integral
    tables = _Tables(cube.shape, k - tolerance, integral)

    if storage == "auto":
        storage = "memory" if cube.n_cells <= memory_budget else "file"
    if storage == "memory":
        passes = _MemoryPasses(cube.coords, cube.measures)
    elif storage == "file":
        passes = _FilePasses(cube.d, cube.measures.dtype, _run_dir(workdir), chunk_rows)
        try:
            passes.write_initial(cube.coords, cube.measures)
        except OSError as exc:
            raise DiceRunError(str(exc), 0, str(passes.run_dir)) from exc
    else:
        raise ValueError(f"unknown storage mode {storage!r}")

    try:
        result = _run(passes, tables, unit, threads)
    except OSError as exc:
        passes.close(ok=False)
        run_dir = getattr(passes, "run_dir", None)
        raise DiceRunError(str(exc), getattr(passes, "pass_no", 0), str(run_dir) if run_dir else None) from exc
    trace, evicted_slots = result
    coords, measures = passes.load()
    passes.close(ok=True)

    diamond = _materialize(cube.dims, tables, coords, measures)
    evicted = [[(cube.dims[dim].name, cube.dims[dim].values[vid]) for dim, vid in map(tables.split, slots)]
               for slots in evicted_slots]
    log.debug("dice k=%s agg=%s: %d passes, %d cells", k.tolist(), agg.value, len(trace), diamond.n_cells)
    return DiamondResult(diamond, len(trace), trace, evicted, tuple(k.tolist()), agg)


def stream_passes(passes, tables: _Tables, unit: bool, threads: int = 1):
    """Preprocess and run passes to stability over an existing pass store.

    Exposed separately from :func:`dice` so callers can inspect the
    working-set of the streaming loop on its own.
    """
    return _run(passes, tables, unit, threads)


def _run(passes, tables: _Tables, unit: bool, threads: int):
    for coords, measures in passes.chunks():
        tables.accumulate(coords, measures, unit)
    tables.seed()

    trace: list[tuple[int, int]] = []
    evicted_slots: list[list[int]] = []
    mark = 0
    pass_no = 0

    if threads > 1:
        pool = ThreadPoolExecutor(max_workers=threads)
    while True:
        pass_no += 1
        if hasattr(passes, "pass_no"):
            passes.pass_no = pass_no
        if threads > 1:
            dropped, written = _sync_pass(passes, tables, unit, pool, threads)
        else:
            def scan(coords, measures, keep):
                dropped, tables.n_evicted = _scan(
                    coords, tables.weights(measures, unit), tables.offsets, tables.alive, tables.totals,
                    tables.thresholds, keep, tables.evicted, tables.n_evicted,
                )
                return dropped

            dropped, written = passes.run_pass(scan)
        trace.append((pass_no, int(written)))
        evicted_slots.append(tables.evicted[mark: tables.n_evicted].tolist())
        mark = tables.n_evicted
        if dropped == 0:
            break
    if threads > 1:
        pool.shutdown()
    return trace, evicted_slots


def _sync_pass(passes, tables: _Tables, unit: bool, pool, threads: int):
    """One pass against a frozen snapshot of the live sets.

    Rows are split into ``threads`` parts whose decrement tallies are merged
    at the end of the pass; evictions are applied afterwards.
    """
    snapshot = tables.alive.copy()

    def part(args):
        coords, measures = args
        slots = coords + tables.offsets
        live = snapshot[slots]
        keep = live.all(axis=1)
        delta = np.zeros_like(tables.totals)
        drop = ~keep
        if drop.any():
            w = np.ones(int(drop.sum()), dtype=delta.dtype) if unit else measures[drop].astype(delta.dtype)
            for i in range(slots.shape[1]):
                hit = live[drop, i]
                np.add.at(delta, slots[drop, i][hit], w[hit])
        return keep, delta

    def scan(coords, measures, keep):
        bounds = np.linspace(0, coords.shape[0], threads + 1).astype(int)
        jobs = [(coords[a:b], measures[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
        dropped = 0
        for (a, b), (kp, delta) in zip(zip(bounds[:-1], bounds[1:]), pool.map(part, jobs)):
            keep[a:b] = kp
            dropped += int((~kp).sum())
            tables.totals -= delta
        return dropped

    dropped, written = passes.run_pass(scan)
    per_slot = np.repeat(tables.thresholds, tables.shape)
    newly = np.flatnonzero(tables.alive & (tables.totals < per_slot))
    tables.alive[newly] = False
    tables.evicted[tables.n_evicted: tables.n_evicted + newly.size] = newly
    tables.n_evicted += newly.size
    return dropped, written


def _materialize(dims: Sequence[Dimension], tables: _Tables, coords, measures) -> Cube:
    new_dims, remaps = [], []
    for i, dim in enumerate(dims):
        ids = tables.alive_ids(i)
        remap = np.full(len(dim), -1, dtype=np.int64)
        remap[ids] = np.arange(ids.size)
        new_dims.append(Dimension(dim.name, tuple(dim.values[j] for j in ids.tolist())))
        remaps.append(remap)
    out = np.empty_like(coords)
    for i, remap in enumerate(remaps):
        out[:, i] = remap[coords[:, i]]
    return Cube(new_dims, out, measures)


def dice_file(path, carats, agg: Agg | str = Agg.COUNT, dims=None, measure=None, **kwargs) -> DiamondResult:
    """Read a fact-table CSV and dice it (see :func:`dice` for keywords)."""
    return dice(read_csv(path, dims=dims, measure=measure), carats, agg, **kwargs)


def verify_carats(cube: Cube, carats, agg: Agg | str = Agg.COUNT, tolerance: float = 0.0) -> bool:
    """Does every order-1 slice along dimension i reach ``carats[i]``?

    A cube without cells verifies vacuously.
    """
    k = as_carats(carats, cube.d, agg)
    if cube.n_cells == 0:
        return True
    for i in range(cube.d):
        totals = slice_totals(cube, i, agg)
        if totals.size and (totals < k[i] - tolerance).any():
            return False
    return True

"""Immutable fact-table cubes: ingestion, slice aggregation and the
restriction / union / containment algebra.

Attribute values are interned per dimension to dense integer ids at
ingestion time; everything downstream works on ids and only maps back to
the original strings on output.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "Agg",
    "Dimension",
    "Cube",
    "CubeStats",
    "IngestError",
    "IncompatibleCubesError",
    "ingest_facts",
    "read_csv",
    "write_csv",
    "slice_sigma",
    "slice_totals",
    "restrict",
    "union",
    "contains",
]


class IngestError(ValueError):
    """Raised for malformed fact rows (ragged rows, unparseable measures)."""


class IncompatibleCubesError(ValueError):
    """Raised when two cubes cannot be restrictions of a common parent."""


class Agg(str, enum.Enum):
    """Linear, monotone aggregators supported by the engine."""

    COUNT = "count"
    SUM = "sum"

    @classmethod
    def parse(cls, value: "Agg | str") -> "Agg":
        if isinstance(value, Agg):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown aggregator {value!r}; expected 'count' or 'sum'") from None


@dataclass(frozen=True)
class Dimension:
    name: str
    values: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        index = {v: i for i, v in enumerate(self.values)}
        if len(index) != len(self.values):
            raise ValueError(f"dimension {self.name!r} has duplicate attribute values")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.values)

    def id_of(self, value: str) -> int:
        try:
            return self._index[value]
        except KeyError:
            raise KeyError(f"{value!r} is not an attribute of dimension {self.name!r}") from None

    def __contains__(self, value) -> bool:
        return value in self._index


@dataclass(frozen=True)
class CubeStats:
    cell_count: int
    shape: tuple[int, ...]
    volume: int
    density: float
    total_sum: float

    @property
    def d(self) -> int:
        return len(self.shape)

    def to_dict(self) -> dict:
        return {
            "cell_count": self.cell_count,
            "shape": list(self.shape),
            "volume": self.volume,
            "density": self.density,
            "total_sum": self.total_sum,
        }


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, order="C", copy=True)
    a.setflags(write=False)
    return a


class Cube:
    """A d-dimensional cube: dimensions plus allocated cells with measures.

    ``coords`` is an ``(|C|, d)`` int64 array of attribute ids and
    ``measures`` is int64 when every measure is an integer, float64
    otherwise. Instances are never mutated after construction.
    """

    __slots__ = ("dims", "coords", "measures")

    def __init__(self, dims: Sequence[Dimension], coords, measures):
        dims = tuple(dims)
        if not dims:
            raise ValueError("a cube needs at least one dimension")
        d = len(dims)
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, d)
        measures = np.asarray(measures)
        if measures.dtype.kind in "iub":
            measures = measures.astype(np.int64)
        else:
            measures = measures.astype(np.float64)
        if measures.shape != (coords.shape[0],):
            raise ValueError("measures must have one entry per cell")
        for i, dim in enumerate(dims):
            col = coords[:, i]
            if col.size and (col.min() < 0 or col.max() >= len(dim)):
                raise ValueError(f"coordinate out of range in dimension {dim.name!r}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "coords", _readonly(coords))
        object.__setattr__(self, "measures", _readonly(measures))

    def __setattr__(self, name, value):
        raise AttributeError("Cube is immutable")

    # construction helpers

    @classmethod
    def from_codes(cls, codes, measures=None, names=None, labels=None, compact=True) -> "Cube":
        """Build a cube from raw integer codes per dimension.

        ``labels[i]`` maps code -> attribute string (defaults to ``str(code)``).
        With ``compact`` only codes that occur become attribute values, in
        ascending code order; otherwise ``labels`` declares the full domain.
        Codes must already be distinct tuples.
        """
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim != 2:
            raise ValueError("codes must be a 2-D array")
        m, d = codes.shape
        if names is None:
            names = [f"d{i}" for i in range(d)]
        if measures is None:
            measures = np.ones(m, dtype=np.int64)
        dims, cols = [], []
        for i in range(d):
            col = codes[:, i]
            if compact or labels is None:
                domain, inverse = np.unique(col, return_inverse=True)
            else:
                domain = np.arange(len(labels[i]))
                inverse = col
            lab = labels[i] if labels is not None else None
            values = [str(lab[c]) if lab is not None else str(c) for c in domain.tolist()]
            dims.append(Dimension(names[i], tuple(values)))
            cols.append(inverse.reshape(-1))
        coords = np.stack(cols, axis=1) if m else np.zeros((0, d), dtype=np.int64)
        return cls(dims, coords, measures)

    @classmethod
    def empty(cls, names: Sequence[str]) -> "Cube":
        return cls([Dimension(n, ()) for n in names], np.zeros((0, len(names))), np.zeros(0, np.int64))

    # basic shape

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(dim.name for dim in self.dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(dim) for dim in self.dims)

    @property
    def volume(self) -> int:
        return math.prod(self.shape)

    @property
    def n_cells(self) -> int:
        return int(self.coords.shape[0])

    def __len__(self) -> int:
        return self.n_cells

    @property
    def integral(self) -> bool:
        return self.measures.dtype.kind == "i"

    @property
    def has_negative(self) -> bool:
        return bool(self.measures.size) and bool((self.measures < 0).any())

    @property
    def total_sum(self):
        if self.integral:
            return int(self.measures.sum())
        return float(self.measures.sum())

    @property
    def density(self) -> float:
        vol = self.volume
        return self.n_cells / vol if vol else 0.0

    def stats(self) -> CubeStats:
        return CubeStats(self.n_cells, self.shape, self.volume, self.density, self.total_sum)

    # views

    def weights(self, agg: Agg | str) -> np.ndarray:
        """Per-cell contribution to a slice under ``agg``."""
        if Agg.parse(agg) is Agg.COUNT:
            return np.ones(self.n_cells, dtype=np.int64)
        return self.measures

    def cells(self) -> Iterator[tuple[tuple[str, ...], float]]:
        """Yield ``(attribute labels, measure)`` per allocated cell, in storage order."""
        values = [dim.values for dim in self.dims]
        for row, m in zip(self.coords.tolist(), self.measures.tolist()):
            yield tuple(values[i][c] for i, c in enumerate(row)), m

    def cell_map(self) -> dict[tuple[str, ...], float]:
        return dict(self.cells())

    def attribute_sets(self) -> list[frozenset[str]]:
        return [frozenset(dim.values) for dim in self.dims]

    def to_dense(self, agg: Agg | str = Agg.SUM) -> np.ndarray:
        """Dense array of shape ``self.shape``; unallocated cells are 0."""
        dense = np.zeros(self.shape, dtype=self.weights(agg).dtype)
        if self.n_cells:
            dense[tuple(self.coords.T)] = self.weights(agg)
        return dense

    def mask(self) -> np.ndarray:
        dense = np.zeros(self.shape, dtype=bool)
        if self.n_cells:
            dense[tuple(self.coords.T)] = True
        return dense

    def take(self, rows: np.ndarray) -> "Cube":
        """Same dimensions, keeping only the cells at the given row positions."""
        return Cube(self.dims, self.coords[rows], self.measures[rows])

    def compact(self) -> "Cube":
        """Drop attribute values whose slices hold no cells."""
        keep = [np.unique(self.coords[:, i]) for i in range(self.d)]
        return restrict(self, keep)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cube):
            return NotImplemented
        return (
            self.names == other.names
            and self.attribute_sets() == other.attribute_sets()
            and self.cell_map() == other.cell_map()
        )

    __hash__ = None

    def __repr__(self) -> str:
        shape = "x".join(map(str, self.shape))
        return f"Cube(dims={list(self.names)}, shape={shape}, cells={self.n_cells})"


# ingestion -----------------------------------------------------------------


def _parse_measure(text: str, rowno: int):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        value = float(text)
    except ValueError:
        raise IngestError(f"row {rowno}: cannot parse measure {text!r}") from None
    if not math.isfinite(value):
        raise IngestError(f"row {rowno}: measure {text!r} is not finite")
    return value


def ingest_facts(rows: Iterable[Sequence], dims: Sequence[str] | int) -> Cube:
    """Roll a stream of fact rows up into a cube.

    Each row holds the d attribute values followed by an optional measure
    (default 1). Rows sharing coordinates are merged by summing measures.
    ``dims`` is the list of dimension names, or just d.
    """
    names = [f"d{i}" for i in range(dims)] if isinstance(dims, int) else list(dims)
    return _ingest(enumerate(rows, start=1), names)


def _ingest(numbered_rows, names) -> Cube:
    d = len(names)
    index: list[dict[str, int]] = [{} for _ in range(d)]
    cells: dict[tuple[int, ...], object] = {}
    for rowno, row in numbered_rows:
        if len(row) == d:
            measure = 1
        elif len(row) == d + 1:
            raw = row[d]
            if raw is None or (isinstance(raw, str) and not raw.strip()):
                measure = 1
            elif isinstance(raw, str):
                measure = _parse_measure(raw, rowno)
            else:
                measure = raw
        else:
            raise IngestError(f"row {rowno}: expected {d} or {d + 1} fields, got {len(row)}")
        key = []
        for i in range(d):
            value = str(row[i])
            ids = index[i]
            vid = ids.get(value)
            if vid is None:
                vid = ids[value] = len(ids)
            key.append(vid)
        key = tuple(key)
        prev = cells.get(key)
        cells[key] = measure if prev is None else prev + measure

    dim_objs = [Dimension(names[i], tuple(index[i])) for i in range(d)]
    if not cells:
        return Cube(dim_objs, np.zeros((0, d)), np.zeros(0, np.int64))
    coords = np.array(list(cells.keys()), dtype=np.int64)
    vals = list(cells.values())
    if all(isinstance(v, (int, np.integer)) for v in vals):
        measures = np.array(vals, dtype=np.int64)
    else:
        measures = np.array(vals, dtype=np.float64)
    return Cube(dim_objs, coords, measures)


def _column_index(header: list[str], col) -> int:
    if isinstance(col, int):
        if not 0 <= col < len(header):
            raise IngestError(f"column index {col} out of range")
        return col
    if isinstance(col, str) and col.isdigit() and col not in header:
        return _column_index(header, int(col))
    try:
        return header.index(col)
    except ValueError:
        raise IngestError(f"no column named {col!r} in header {header}") from None


def read_csv(source, dims: Sequence[str | int] | None = None, measure: str | int | None = None) -> Cube:
    """Read a fact-table CSV (header row, RFC-4180 quoting) into a cube.

    ``dims`` selects dimension columns by name or index (default: every
    column except the measure). ``measure`` selects the measure column; if it
    is omitted every fact counts 1. A row that stops before the measure
    column also gets measure 1.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_csv(fh, dims, measure)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("empty CSV: missing header row") from None
    header = [h.strip() for h in header]
    m_idx = _column_index(header, measure) if measure is not None else None
    if dims is None:
        d_idx = [i for i in range(len(header)) if i != m_idx]
    else:
        d_idx = [_column_index(header, c) for c in dims]
    if m_idx is not None and m_idx in d_idx:
        raise IngestError("measure column is also listed as a dimension")
    names = [header[i] for i in d_idx]
    width = len(header)

    def rows():
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) > width or any(i >= len(row) for i in d_idx):
                raise IngestError(f"row {lineno}: expected {width} fields, got {len(row)}")
            out = [row[i] for i in d_idx]
            if m_idx is not None and m_idx < len(row):
                out.append(row[m_idx])
            yield lineno, out

    return _ingest(rows(), names)


def _format_measure(m) -> str:
    if isinstance(m, int):
        return str(m)
    return repr(float(m))


def write_csv(cube: Cube, dest, measure_name: str = "measure") -> None:
    """Write ``cube`` in the fact-table CSV schema read by :func:`read_csv`."""
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_csv(cube, fh, measure_name)
        return
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow([*cube.names, measure_name])
    for labels, m in cube.cells():
        writer.writerow([*labels, _format_measure(m)])


def to_csv_string(cube: Cube, measure_name: str = "measure") -> str:
    buf = io.StringIO()
    write_csv(cube, buf, measure_name)
    return buf.getvalue()


# aggregation ---------------------------------------------------------------


def slice_totals(cube: Cube, dim: int, agg: Agg | str) -> np.ndarray:
    """sigma of every order-1 slice along ``dim``, indexed by attribute id."""
    n = cube.shape[dim]
    idx = cube.coords[:, dim]
    if Agg.parse(agg) is Agg.COUNT:
        return np.bincount(idx, minlength=n).astype(np.int64)
    if cube.integral:
        return _int_bincount(idx, cube.measures, n)
    return np.bincount(idx, weights=cube.measures, minlength=n)


def _int_bincount(idx: np.ndarray, w: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, dtype=np.int64)
    np.add.at(out, idx, w)
    return out


def slice_sigma(cube: Cube, dim: int, value: int, agg: Agg | str):
    """sigma of the order-1 slice fixing attribute id ``value`` on ``dim``."""
    if not 0 <= dim < cube.d:
        raise IndexError(f"dimension {dim} out of range for a {cube.d}-d cube")
    if not 0 <= value < cube.shape[dim]:
        raise KeyError(f"attribute id {value} not in dimension {cube.dims[dim].name!r}")
    sel = cube.coords[:, dim] == value
    if Agg.parse(agg) is Agg.COUNT:
        return int(sel.sum())
    total = cube.measures[sel].sum()
    return int(total) if cube.integral else float(total)


# algebra -------------------------------------------------------------------


def _ids_for(dim: Dimension, keep) -> np.ndarray:
    ids = []
    for v in keep:
        if isinstance(v, (int, np.integer)):
            if not 0 <= v < len(dim):
                raise KeyError(f"attribute id {v} not in dimension {dim.name!r}")
            ids.append(int(v))
        else:
            ids.append(dim.id_of(v))
    return np.unique(np.asarray(ids, dtype=np.int64))


def restrict(cube: Cube, keep: Sequence[Iterable]) -> Cube:
    """Keep the cells whose every coordinate lies in the per-dimension keep sets.

    Keep sets may hold attribute ids or attribute labels. Kept attribute
    values stay declared in the result even if their slice becomes empty.
    """
    if len(keep) != cube.d:
        raise ValueError(f"expected {cube.d} keep sets, got {len(keep)}")
    dims, remaps = [], []
    row_ok = np.ones(cube.n_cells, dtype=bool)
    for i, (dim, kset) in enumerate(zip(cube.dims, keep)):
        ids = _ids_for(dim, kset)
        remap = np.full(len(dim), -1, dtype=np.int64)
        remap[ids] = np.arange(len(ids))
        dims.append(Dimension(dim.name, tuple(dim.values[j] for j in ids.tolist())))
        remaps.append(remap)
        if cube.n_cells:
            row_ok &= remap[cube.coords[:, i]] >= 0
    coords = cube.coords[row_ok]
    new = np.empty_like(coords)
    for i, remap in enumerate(remaps):
        new[:, i] = remap[coords[:, i]]
    return Cube(dims, new, cube.measures[row_ok])


def union(a: Cube, b: Cube) -> Cube:
    """Union of two restrictions of a common parent.

    Attribute sets are unioned per dimension; the cells are those of either
    operand. A coordinate present in both with different measures means the
    operands cannot share a parent.
    """
    if a.names != b.names:
        raise IncompatibleCubesError("cubes have different dimensions")
    dims = []
    for da, db in zip(a.dims, b.dims):
        extra = tuple(v for v in db.values if v not in da)
        dims.append(Dimension(da.name, da.values + extra))
    cells = a.cell_map()
    for key, m in b.cells():
        prev = cells.get(key)
        if prev is not None and prev != m:
            raise IncompatibleCubesError(f"measure conflict at {key}: {prev} vs {m}")
        cells[key] = m
    if not cells:
        return Cube(dims, np.zeros((0, len(dims))), np.zeros(0, np.int64))
    coords = np.array([[dims[i].id_of(v) for i, v in enumerate(key)] for key in cells], dtype=np.int64)
    measures = np.array(list(cells.values()))
    if a.integral and b.integral:
        measures = measures.astype(np.int64)
    return Cube(dims, coords, measures)


def contains(outer: Cube, inner: Cube) -> bool:
    """True when every attribute and cell of ``inner`` also appears in ``outer``."""
    if outer.d != inner.d:
        raise ValueError("containment needs cubes of equal dimensionality")
    for do, di in zip(outer.dims, inner.dims):
        if not all(v in do for v in di.values):
            return False
    cells = outer.cell_map()
    for key, m in inner.cells():
        if key not in cells or cells[key] != m:
            return False
    return True


def cube_from_matrix(matrix, row_labels=None, col_labels=None, names=("row", "col"), skip_zero=True) -> Cube:
    """2-D cube from a dense matrix; zero entries are unallocated unless
    ``skip_zero`` is false."""
    arr = np.asarray(matrix)
    r, c = arr.shape
    row_labels = list(row_labels) if row_labels is not None else [str(i) for i in range(r)]
    col_labels = list(col_labels) if col_labels is not None else [str(j) for j in range(c)]
    rows = []
    for i in range(r):
        for j in range(c):
            v = arr[i, j]
            if skip_zero and v == 0:
                continue
            rows.append((row_labels[i], col_labels[j], v.item()))
    cube = ingest_facts(rows, list(names))
    # declare every label, even ones whose slice is empty
    dims = [Dimension(names[0], tuple(row_labels)), Dimension(names[1], tuple(col_labels))]
    coords = np.array([[dims[0].id_of(a), dims[1].id_of(b)] for (a, b), _ in cube.cells()],
                      dtype=np.int64).reshape(-1, 2)
    return Cube(dims, coords, cube.measures)

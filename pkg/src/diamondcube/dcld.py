"""Heuristics for picking at most p_i attribute values per dimension so the
selected subcube is as dense (COUNT) or as heavy (SUM) as possible.

Two heuristics are offered: trim a suitably-shaped diamond down to size,
or run a steepest-ascent swap search from the most frequent values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bounds import kappa_upper_bound
from .cube import Agg, Cube, restrict, slice_totals
from .dicing import dice

__all__ = [
    "DcldResult",
    "BudgetExceeded",
    "shape_limit",
    "objective",
    "dcld_diamond_heuristic",
    "dcld_local_search",
]

log = logging.getLogger(__name__)


class BudgetExceeded(RuntimeError):
    """The requested search would exceed its configured work budget."""


@dataclass
class DcldResult:
    subcube: Cube
    objective: float
    average: float
    agg: Agg
    method: str
    deletions: int = 0
    insertions: int = 0
    swap_evaluations: int = 0
    carats: float | None = None
    fallback: bool = False
    history: list[float] = field(default_factory=list)

    @property
    def modifications(self) -> int:
        return self.deletions + self.insertions

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "agg": self.agg.value,
            "objective": self.objective,
            "average": self.average,
            "shape": list(self.subcube.shape),
            "cell_count": self.subcube.n_cells,
            "total_sum": self.subcube.total_sum,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "swap_evaluations": self.swap_evaluations,
            "carats": self.carats,
            "fallback": self.fallback,
            "selection": {dim.name: list(dim.values) for dim in self.subcube.dims},
        }


def shape_limit(limit, shape: Sequence[int]) -> tuple[int, ...]:
    """Broadcast p (scalar or per-dimension) and cap it by the cube's shape."""
    p = np.atleast_1d(np.asarray(limit, dtype=np.int64))
    if p.size == 1:
        p = np.full(len(shape), p[0])
    if p.size != len(shape):
        raise ValueError(f"expected 1 or {len(shape)} limits, got {p.size}")
    if (p < 1).any():
        raise ValueError("shape limits must be at least 1")
    return tuple(int(min(a, b)) for a, b in zip(p, shape))


def objective(cube: Cube, agg: Agg | str = Agg.COUNT) -> tuple[float, float]:
    """``(objective, average)``: density for COUNT, total sum for SUM."""
    agg = Agg.parse(agg)
    vol = cube.volume
    if vol == 0:
        return 0.0, 0.0
    if agg is Agg.COUNT:
        dens = cube.n_cells / vol
        return dens, dens
    total = float(cube.total_sum)
    return total, total / vol


def _top_values(cube: Cube, dim: int, keep: int, agg: Agg) -> np.ndarray:
    """Ids of the ``keep`` heaviest slices; ties go to the smaller id."""
    totals = slice_totals(cube, dim, agg)
    order = np.lexsort((np.arange(totals.size), -totals.astype(np.float64)))
    return np.sort(order[:keep])


def _trim(cube: Cube, p: Sequence[int], agg: Agg) -> tuple[Cube, int]:
    """Keep the top p_i slices of each dimension in turn, re-ranking after each cut."""
    deletions = 0
    for i in range(cube.d):
        if cube.shape[i] <= p[i]:
            continue
        ids = _top_values(cube, i, p[i], agg)
        deletions += cube.shape[i] - p[i]
        keep = [range(n) for n in cube.shape]
        keep[i] = ids
        cube = restrict(cube, keep)
    return cube, deletions


def dcld_diamond_heuristic(cube: Cube, limit, agg: Agg | str = Agg.COUNT, **dice_kwargs) -> DcldResult:
    """Start from the diamond with the most carats that is still at least
    ``min(n_i, p_i)`` wide in every dimension, then trim it to exactly that shape."""
    agg = Agg.parse(agg)
    p = shape_limit(limit, cube.shape)

    def wide_enough(diamond: Cube) -> bool:
        return diamond.n_cells > 0 and all(a >= b for a, b in zip(diamond.shape, p))

    integer = agg is Agg.COUNT or cube.integral
    lo, hi = 0, kappa_upper_bound(cube.stats(), agg)
    best, best_k = None, 0
    if integer:
        hi = int(hi)
        while lo < hi:
            mid = (lo + hi + 1) // 2
            start = best if best is not None else cube
            diamond = dice(start, mid, agg, **dice_kwargs).diamond
            if wide_enough(diamond):
                lo, best, best_k = mid, diamond, mid
            else:
                hi = mid - 1
    else:
        lo, hi = 0.0, float(hi)
        tol = 1e-9 * max(hi, 1.0)
        while hi - lo > tol:
            mid = (lo + hi) / 2
            start = best if best is not None else cube
            diamond = dice(start, mid, agg, **dice_kwargs).diamond
            if wide_enough(diamond):
                lo, best, best_k = mid, diamond, mid
            else:
                hi = mid
    fallback = best is None or best_k < 1
    if best is None:
        log.warning("no diamond with k >= 1 is wide enough; trimming the whole cube")
        best = dice(cube, 0, agg, **dice_kwargs).diamond
    trimmed, deletions = _trim(best, p, agg)
    obj, avg = objective(trimmed, agg)
    return DcldResult(trimmed, obj, avg, agg, "diamond", deletions=deletions, carats=best_k,
                      fallback=fallback)


def _selection_totals(cube: Cube, selected: list[np.ndarray], dim: int, weights: np.ndarray) -> np.ndarray:
    """sigma of every dim-``dim`` slice with the other dimensions held to ``selected``."""
    inside = np.ones(cube.n_cells, dtype=bool)
    for j, sel in enumerate(selected):
        if j == dim:
            continue
        member = np.zeros(cube.shape[j], dtype=bool)
        member[sel] = True
        inside &= member[cube.coords[:, j]]
    return np.bincount(cube.coords[inside, dim], weights=weights[inside], minlength=cube.shape[dim])


def dcld_local_search(cube: Cube, limit, agg: Agg | str = Agg.COUNT, max_swap_evaluations: int = 10**9,
                      max_rounds: int = 100_000) -> DcldResult:
    """Steepest-ascent swap search over fixed-size selections.

    The start state keeps the top p_i values per dimension (ranked the same
    way as the diamond trimmer). Moves cycle through the dimensions; in
    dimension i every (kept v, dropped w) exchange is scored and the best
    strictly improving one is applied. Stops after a full cycle without
    a move.
    """
    agg = Agg.parse(agg)
    p = shape_limit(limit, cube.shape)
    per_cycle = sum(pi * (n - pi) for pi, n in zip(p, cube.shape))
    if per_cycle > max_swap_evaluations:
        raise BudgetExceeded(f"one sweep needs {per_cycle} swap evaluations, budget is {max_swap_evaluations}")

    start, _ = _trim(cube, p, agg)
    selected = [np.array(sorted(cube.dims[i].id_of(v) for v in start.dims[i].values), dtype=np.int64)
                for i in range(cube.d)]
    weights = cube.weights(agg).astype(np.float64)
    current = float(start.n_cells) if agg is Agg.COUNT else float(start.total_sum)
    history = [current]
    evaluations = 0
    deletions = insertions = 0
    idle = 0
    rounds = 0
    i = 0
    while idle < cube.d and rounds < max_rounds:
        rounds += 1
        n = cube.shape[i]
        members = selected[i]
        outside = np.setdiff1d(np.arange(n), members)
        moved = False
        if outside.size and members.size:
            evaluations += members.size * outside.size
            if evaluations > max_swap_evaluations:
                raise BudgetExceeded(f"swap evaluations exceeded {max_swap_evaluations}")
            tally = _selection_totals(cube, selected, i, weights)
            t_in, t_out = tally[members], tally[outside]
            gain = t_out.max() - t_in.min()
            if gain > 0:
                v = members[np.flatnonzero(t_in == t_in.min())[0]]
                w = outside[np.flatnonzero(t_out == t_out.max())[0]]
                selected[i] = np.sort(np.append(members[members != v], w))
                current += gain
                history.append(current)
                deletions += 1
                insertions += 1
                moved = True
        idle = 0 if moved else idle + 1
        i = (i + 1) % cube.d

    result = restrict(cube, selected)
    obj, avg = objective(result, agg)
    return DcldResult(result, obj, avg, agg, "local", deletions=deletions, insertions=insertions,
                      swap_evaluations=evaluations, history=history)


def selection_count(shape: Sequence[int], limit) -> int:
    """Number of distinct shape-limited selections."""
    p = shape_limit(limit, shape)
    return math.prod(math.comb(n, k) for n, k in zip(shape, p))

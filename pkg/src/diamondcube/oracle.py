"""Exhaustive reference answers for tiny cubes.

Nothing here shares code with the streaming dicer or the heuristics: the
diamond is found as the union of every attribute selection whose restriction
has the requested carats, and DCLD by scoring every shape-limited selection.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
import numpy as np

from .cube import Agg, Cube, restrict
from .dcld import DcldResult, objective, shape_limit

__all__ = [
    "OracleBudget",
    "OracleBudgetExceeded",
    "NonUniqueDiamond",
    "brute_force_diamond",
    "maximal_witnesses",
    "brute_force_dcld",
    "brute_force_kappa",
]


class OracleBudgetExceeded(RuntimeError):
    pass


class NonUniqueDiamond(ValueError):
    """Several maximal k-carat cubes exist (non-monotone aggregation)."""

    def __init__(self, witnesses: list[Cube], union_verifies: bool):
        super().__init__(f"{len(witnesses)} maximal witnesses; union of their attributes "
                         f"{'has' if union_verifies else 'lacks'} the requested carats")
        self.witnesses = witnesses
        self.union_verifies = union_verifies


@dataclass(frozen=True)
class OracleBudget:
    max_volume: int = 64
    max_selections: int = 10**6

    def __post_init__(self):
        if self.max_volume < 1 or self.max_selections < 1:
            raise ValueError("oracle budgets must be positive")


DEFAULT_BUDGET = OracleBudget()


def _masks(n: int) -> np.ndarray:
    """All 2**n subsets of range(n) as a (2**n, n) boolean matrix."""
    return ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(bool)


def _witness_masks(dense: np.ndarray, k: np.ndarray, tol: float) -> list[tuple[np.ndarray, ...]]:
    """Every per-dimension attribute selection whose restriction has k carats.

    Enumerates selections on the leading dimensions explicitly and handles
    every subset of the last dimension at once with a matrix product.
    """
    shape = dense.shape
    d = dense.ndim
    last = _masks(shape[-1]).astype(dense.dtype)  # (L, n_last)
    lead_masks = [_masks(n) for n in shape[:-1]]
    found = []
    for lead in itertools.product(*[range(2**n) for n in shape[:-1]]):
        sel = [lead_masks[i][m] for i, m in enumerate(lead)]
        sub = dense[np.ix_(*sel, np.ones(shape[-1], dtype=bool))] if d > 1 else dense
        # sub: (a_1, ..., a_{d-1}, n_last); project onto every last-dim subset
        proj = sub @ last.T  # (a_1..a_{d-1}, L)
        ok = np.ones(last.shape[0], dtype=bool)
        for i in range(d - 1):
            axes = tuple(j for j in range(d - 1) if j != i)
            sums = proj.sum(axis=axes) if axes else proj  # (a_i, L)
            if sums.shape[0]:
                ok &= (sums >= k[i] - tol).all(axis=0)
        # last-dimension slices: only the selected ones need to pass
        last_sums = sub.reshape(-1, shape[-1]).sum(axis=0)
        passing = last_sums >= k[-1] - tol
        ok &= ~(last.astype(bool) & ~passing).any(axis=1)
        for j in np.flatnonzero(ok):
            found.append((*sel, last[j].astype(bool)))
    return found


def _check_budget(cube: Cube, budget: OracleBudget) -> None:
    if cube.volume > budget.max_volume:
        raise OracleBudgetExceeded(f"volume {cube.volume} exceeds oracle budget {budget.max_volume}")


def _carats(carats, d) -> np.ndarray:
    k = np.atleast_1d(np.asarray(carats, dtype=np.float64))
    return np.full(d, k[0]) if k.size == 1 else k


def _dense(cube: Cube, agg: Agg) -> np.ndarray:
    dense = np.zeros(cube.shape, dtype=np.float64)
    w = np.ones(cube.n_cells) if agg is Agg.COUNT else cube.measures.astype(np.float64)
    for row, m in zip(cube.coords.tolist(), w.tolist()):
        dense[tuple(row)] += m
    return dense


def maximal_witnesses(cube: Cube, carats, agg: Agg | str = Agg.COUNT, tolerance: float = 1e-9,
                      budget: OracleBudget = DEFAULT_BUDGET) -> list[Cube]:
    """All inclusion-maximal attribute selections whose restriction has the carats."""
    agg = Agg.parse(agg)
    _check_budget(cube, budget)
    found = _witness_masks(_dense(cube, agg), _carats(carats, cube.d), tolerance)
    sets = [tuple(frozenset(np.flatnonzero(m).tolist()) for m in w) for w in found]
    maximal = [s for s in sets
               if not any(t != s and all(a <= b for a, b in zip(s, t)) for t in sets)]
    return [restrict(cube, [sorted(a) for a in s]) for s in maximal]


def brute_force_diamond(cube: Cube, carats, agg: Agg | str = Agg.COUNT, *, allow_negative: bool = False,
                        tolerance: float = 1e-9, budget: OracleBudget = DEFAULT_BUDGET) -> Cube:
    """The k-carat diamond as the union of all qualifying selections.

    With negative SUM measures (``allow_negative=True``) uniqueness can
    fail; then :class:`NonUniqueDiamond` is raised carrying the maximal
    witnesses.
    """
    agg = Agg.parse(agg)
    _check_budget(cube, budget)
    k = _carats(carats, cube.d)
    negative = agg is Agg.SUM and cube.has_negative
    if negative and not allow_negative:
        raise ValueError("SUM over negative measures has no unique diamond")
    dense = _dense(cube, agg)
    found = _witness_masks(dense, k, tolerance)
    union = [np.zeros(n, dtype=bool) for n in cube.shape]
    for w in found:
        for i, m in enumerate(w):
            union[i] |= m
    keep = [np.flatnonzero(m) for m in union]
    result = restrict(cube, keep)
    if negative:
        witnesses = maximal_witnesses(cube, carats, agg, tolerance, budget)
        if len(witnesses) > 1:
            sub = dense[np.ix_(*union)]
            verifies = all(
                (sub.sum(axis=tuple(j for j in range(cube.d) if j != i)) >= k[i] - tolerance).all()
                for i in range(cube.d)
            )
            raise NonUniqueDiamond(witnesses, bool(verifies))
    return result


def brute_force_kappa(cube: Cube, agg: Agg | str = Agg.COUNT, budget: OracleBudget = DEFAULT_BUDGET) -> int:
    """Largest integer k with a nonempty brute-force diamond."""
    agg = Agg.parse(agg)
    if cube.n_cells == 0:
        return 0
    k = 0
    while brute_force_diamond(cube, k + 1, agg, budget=budget).n_cells:
        k += 1
    return k


def brute_force_dcld(cube: Cube, limit, agg: Agg | str = Agg.COUNT,
                     budget: OracleBudget = DEFAULT_BUDGET) -> DcldResult:
    """Best selection of exactly ``min(n_i, p_i)`` values per dimension.

    Ties keep the lexicographically first selection.
    """
    agg = Agg.parse(agg)
    p = shape_limit(limit, cube.shape)
    count = math.prod(math.comb(n, q) for n, q in zip(cube.shape, p))
    if count > budget.max_selections:
        raise OracleBudgetExceeded(f"{count} selections exceed oracle budget {budget.max_selections}")
    dense = _dense(cube, agg)
    best, best_val = None, -math.inf
    combos = [list(itertools.combinations(range(n), q)) for n, q in zip(cube.shape, p)]
    if cube.d == 2:
        # score all column choices for a row choice at once
        cols = np.zeros((len(combos[1]), cube.shape[1]))
        for j, c in enumerate(combos[1]):
            cols[j, list(c)] = 1
        for rows in combos[0]:
            scores = cols @ dense[list(rows)].sum(axis=0)
            j = int(np.argmax(scores))
            if scores[j] > best_val:
                best_val, best = scores[j], (rows, combos[1][j])
    else:
        for sel in itertools.product(*combos):
            val = dense[np.ix_(*[list(s) for s in sel])].sum()
            if val > best_val:
                best_val, best = val, sel
    sub = restrict(cube, [list(s) for s in best])
    obj, avg = objective(sub, agg)
    return DcldResult(sub, obj, avg, agg, "exhaustive", swap_evaluations=count)

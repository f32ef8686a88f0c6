"""Closed-form size, sum and carat bounds, and the zeta-skew pruning model."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .cube import Agg, Cube, CubeStats
from .dicing import as_carats, dice

__all__ = [
    "BoundReport",
    "min_size_for_carats",
    "max_cells_without_diamond",
    "kappa_lower_bound",
    "kappa_lower_bound_printed",
    "kappa_upper_bound",
    "max_sum_without_diamond",
    "hcld_average_threshold",
    "dcld_density_threshold",
    "perfect_prefilter",
    "PrefilterResult",
    "zeta_partial",
    "expected_marked_fraction",
]

ZETA_TAIL_TOL = 1e-12


@dataclass
class BoundReport:
    name: str
    value: float
    kind: str  # "lower" | "upper"
    guarantee: str  # "existence" | "non-existence"
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _vec(x, d=None) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if d is not None and v.size == 1 and d != 1:
        v = np.full(d, v[0])
    return v


def min_size_for_carats(carats, shape: Sequence[int]) -> float:
    """Fewest cells any cube of this shape with these carats can have.

    Returns ``max(max_i k_i n_i, (prod k_i)^(1/(d-1)))``.
    """
    n = _vec(shape)
    d = n.size
    if d <= 1:
        raise ValueError("the size bound needs at least two dimensions")
    k = _vec(carats, d)
    if k.size != d:
        raise ValueError("carats and shape disagree on d")
    if (k == 0).any():
        return 0.0
    return float(max((k * n).max(), math.exp(np.log(k).sum() / (d - 1))))


def max_cells_without_diamond(shape: Sequence[int], carats) -> int:
    """Most cells a cube of this shape can hold with no k-carat subcube.

    ``1 + sum_i (k_i - 1)(n_i - 1)``; anything larger contains a nonempty
    COUNT diamond. Zero carats are treated like one (no slice can fall
    short of zero).
    """
    n = np.asarray(shape, dtype=np.int64)
    k = np.asarray(as_carats(carats, n.size, Agg.COUNT), dtype=np.int64)
    return int(1 + (np.maximum(k - 1, 0) * np.maximum(n - 1, 0)).sum())


def max_sum_without_diamond(shape: Sequence[int], carats) -> float:
    """Sum below which a non-negative cube may lack a k-sum-carat subcube.

    ``sum_i (n_i + 1) k_i + max_i k_i``: a cube whose total reaches this
    value is guaranteed a nonempty SUM diamond.
    """
    n = _vec(shape)
    k = _vec(carats, n.size)
    return float(((n + 1) * k).sum() + k.max())


def hcld_average_threshold(shape: Sequence[int], carats) -> float:
    """Average above which an HCLD solution must meet the SUM diamond."""
    vol = math.prod(int(x) for x in shape)
    return max_sum_without_diamond(shape, carats) / vol if vol else math.inf


def dcld_density_threshold(shape: Sequence[int], p, k: int) -> float:
    """Density above which a DCLD solution must meet the k-carat diamond."""
    n = np.asarray(shape, dtype=np.int64)
    pv = np.broadcast_to(np.asarray(p, dtype=np.int64), n.shape)
    if (pv < 1).any():
        raise ValueError("p must be at least 1")
    m = np.minimum(n, pv)
    return float((1 + (k - 1) * (m - 1).sum()) / np.prod(m.astype(np.float64)))


def kappa_lower_bound(stats: CubeStats, agg: Agg | str = Agg.COUNT, total_sum=None):
    """A carat count guaranteed to have a nonempty diamond.

    COUNT: the largest k with ``1 + (k-1) sum_i (n_i - 1) < |C|`` (and at
    least 1 for a nonempty cube). SUM: the largest k whose guaranteed-sum
    threshold ``k (sum_i (n_i + 1) + 1)`` is reached by the total sum.
    """
    agg = Agg.parse(agg)
    if stats.cell_count == 0:
        return 0
    n = np.asarray(stats.shape, dtype=np.int64)
    if agg is Agg.COUNT:
        spread = int((n - 1).sum())
        if spread == 0:
            return 1
        # 1 + (k-1)*spread < |C|  <=>  k - 1 < (|C| - 1) / spread
        return max(1, (stats.cell_count - 2) // spread + 1)
    total = stats.total_sum if total_sum is None else total_sum
    denom = int((n + 1).sum()) + 1
    if isinstance(total, (int, np.integer)):
        return int(total) // denom
    return float(total) / denom


def kappa_lower_bound_printed(stats: CubeStats) -> int:
    """The looser closed form ``|C| / sum_i (n_i - 1) - 3``, floored at 0."""
    spread = sum(n - 1 for n in stats.shape)
    if stats.cell_count == 0 or spread == 0:
        return 0
    return max(0, math.floor(stats.cell_count / spread - 3))


def kappa_upper_bound(stats: CubeStats, agg: Agg | str = Agg.COUNT):
    """No diamond with more carats than this can be nonempty.

    COUNT: ``min(prod of the d-1 smallest n_i, |C|)``. SUM: the total sum.
    """
    agg = Agg.parse(agg)
    if stats.cell_count == 0:
        return 0
    if agg is Agg.COUNT:
        smallest = sorted(stats.shape)[:-1]
        return int(min(math.prod(smallest), stats.cell_count))
    return stats.total_sum


@dataclass
class PrefilterResult:
    feasible: bool
    region: Cube
    carats: tuple[int, ...]


def perfect_prefilter(cube: Cube, target_shape: Sequence[int]) -> PrefilterResult:
    """Region that must contain every perfect subcube of ``target_shape``.

    Dices with ``k_i = prod_{j != i} m_j`` under COUNT; a perfect subcube
    of that shape is itself such a diamond, so it lies inside the result.
    """
    m = [int(x) for x in target_shape]
    if len(m) != cube.d or min(m) < 1:
        raise ValueError("target shape needs d entries, each at least 1")
    vol = math.prod(m)
    k = tuple(vol // mi for mi in m)
    if cube.n_cells < vol:
        return PrefilterResult(False, Cube.empty(cube.names), k)
    region = dice(cube, k, Agg.COUNT).diamond
    feasible = region.n_cells > 0 and all(a >= b for a, b in zip(region.shape, m))
    return PrefilterResult(feasible, region, k)


# zeta model ----------------------------------------------------------------


def _zeta(s: float, n_terms: int) -> float:
    """Riemann zeta by a direct sum plus an Euler-Maclaurin tail.

    The number of explicit terms grows until the remainder bound of the
    tail expansion drops below ``ZETA_TAIL_TOL``.
    """
    n = max(int(n_terms), 8)
    while True:
        j = np.arange(1, n, dtype=np.float64)
        head = float(np.sum(j ** -s))
        N = float(n)
        # sum_{j>=N} j^-s ~ N^(1-s)/(s-1) + N^-s/2 + s N^(-s-1)/12 - s(s+1)(s+2) N^(-s-3)/720
        tail = N ** (1 - s) / (s - 1) + 0.5 * N ** -s + s * N ** (-s - 1) / 12
        tail -= s * (s + 1) * (s + 2) * N ** (-s - 3) / 720
        err = s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * N ** (-s - 5) / 30240
        if err < ZETA_TAIL_TOL:
            return head + tail
        n *= 2


def zeta_partial(k: int, s: float, truncation: int = 1000) -> float:
    """Probability that a zeta(s)-distributed slice count is below k."""
    if s <= 1:
        raise ValueError("zeta distribution diverges for s <= 1")
    if k <= 1:
        return 0.0
    j = np.arange(1, int(k), dtype=np.float64)
    return float(np.sum(j ** -s)) / _zeta(s, max(truncation, int(k)))


def expected_marked_fraction(shape: Sequence[int], carats, s: float, truncation: int = 1000) -> float:
    """Expected share of slices below threshold before any deletion.

    Slice counts are modelled as zeta(s) distributed; the result is
    ``sum_i n_i P(count < k_i) / sum_i n_i``.
    """
    if s <= 1:
        raise ValueError("zeta distribution diverges for s <= 1")
    n = _vec(shape)
    k = _vec(carats, n.size)
    if truncation < k.max():
        raise ValueError("truncation must be at least the largest carat")
    probs = np.array([zeta_partial(int(ki), s, truncation) for ki in k])
    total = n.sum()
    return float((n * probs).sum() / total) if total else 0.0

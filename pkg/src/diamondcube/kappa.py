"""Carat-number search: the largest uniform k with a nonempty diamond.

Both searches lean on diamond nesting: the diamond for a larger k lies
inside the diamond for a smaller one, so every probe can start from the
most recent nonempty witness instead of the full cube.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .bounds import kappa_lower_bound, kappa_upper_bound
from .cube import Agg, Cube, slice_totals
from .dicing import dice

__all__ = ["KappaResult", "kappa", "kappa_sequential", "kappa_binary"]

log = logging.getLogger(__name__)


@dataclass
class KappaResult:
    kappa: float
    diamond: Cube
    probes: list[tuple[float, bool]] = field(default_factory=list)
    method: str = "binary"
    tolerance: float = 0.0
    exact: bool = True
    lower: float = 0
    upper: float = 0
    dice_count: int = 0
    passes: int = 0

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "exact": self.exact,
            "method": self.method,
            "tolerance": self.tolerance,
            "lower_bound": self.lower,
            "upper_bound": self.upper,
            "dice_count": self.dice_count,
            "passes": self.passes,
            "probes": [{"k": k, "nonempty": ne} for k, ne in self.probes],
            "diamond": {
                "shape": list(self.diamond.shape),
                "cell_count": self.diamond.n_cells,
                "total_sum": self.diamond.total_sum,
            },
        }


def _integer_domain(cube: Cube, agg: Agg) -> bool:
    return agg is Agg.COUNT or cube.integral


class _Prober:
    def __init__(self, cube: Cube, agg: Agg, dice_kwargs):
        self.cube = cube
        self.agg = agg
        self.kwargs = dice_kwargs
        self.probes: list[tuple[float, bool]] = []
        self.dices = 0
        self.passes = 0

    def __call__(self, start: Cube, k) -> Cube:
        res = dice(start, k, self.agg, **self.kwargs)
        self.dices += 1
        self.passes += res.passes
        nonempty = res.diamond.n_cells > 0
        self.probes.append((k, nonempty))
        log.debug("probe k=%s -> %s (%d passes)", k, "nonempty" if nonempty else "empty", res.passes)
        return res.diamond


def _finish(method, prober, kappa, witness, lo_bound, hi_bound, tol, exact):
    if witness is None:
        # the lower bound itself was never probed; materialise its diamond
        witness = prober(prober.cube, kappa) if prober.cube.n_cells else prober.cube
    return KappaResult(kappa, witness, prober.probes, method, tol, exact, lo_bound, hi_bound,
                       prober.dices, prober.passes)


def kappa_sequential(cube: Cube, agg: Agg | str = Agg.COUNT, **dice_kwargs) -> KappaResult:
    """Step k up by one from just above the lower bound until the diamond empties.

    For SUM over non-integer measures this finds ``floor(kappa)``.
    """
    agg = Agg.parse(agg)
    if cube.n_cells == 0:
        return KappaResult(0, cube, method="sequential")
    stats = cube.stats()
    lo = kappa_lower_bound(stats, agg)
    if not _integer_domain(cube, agg):
        lo = math.floor(lo)
    hi = kappa_upper_bound(stats, agg)
    prober = _Prober(cube, agg, dice_kwargs)
    current, witness, k = cube, None, lo
    while True:
        probe = prober(current, k + 1)
        if probe.n_cells == 0:
            break
        k += 1
        current = witness = probe
    exact = _integer_domain(cube, agg)
    return _finish("sequential", prober, k, witness, lo, hi, 0.0, exact)


def kappa_binary(
    cube: Cube,
    agg: Agg | str = Agg.COUNT,
    tolerance: float | None = None,
    bracket: str = "auto",
    **dice_kwargs,
) -> KappaResult:
    """Binary search for kappa between the closed-form bounds.

    Integer domains (COUNT, or SUM over integer measures) converge exactly.
    Real-valued SUM stops once the bracket is narrower than ``tolerance``
    (default ``1e-6`` times the total sum) and reports the carat level
    actually reached by the last nonempty witness, flagged inexact.

    ``bracket="doubling"`` replaces the closed-form upper bound by
    repeatedly doubling the lower bound until a probe comes back empty;
    ``"auto"`` does so only when the closed form is more than 2**20 times
    the lower bound.
    """
    agg = Agg.parse(agg)
    if cube.n_cells == 0:
        return KappaResult(0, cube, method="binary")
    stats = cube.stats()
    integer = _integer_domain(cube, agg)
    lo = kappa_lower_bound(stats, agg)
    hi = kappa_upper_bound(stats, agg)
    lo_bound, hi_bound = lo, hi
    if tolerance is None:
        tolerance = 0.0 if integer else 1e-6 * float(stats.total_sum)
    if not integer and tolerance <= 0:
        raise ValueError("a positive tolerance is required for real-valued SUM")
    prober = _Prober(cube, agg, dice_kwargs)
    witness = None

    def start():
        return witness if witness is not None else cube

    if bracket == "doubling" or (bracket == "auto" and hi > (1 << 20) * max(lo, 1)):
        step = max(lo, 1)
        while True:
            k = min(2 * step, hi)
            if k <= lo:
                break
            probe = prober(start(), k)
            if probe.n_cells == 0:
                hi = k - 1 if integer else k
                break
            lo, witness, step = k, probe, k
            if k == hi:
                break
    elif bracket not in ("auto", "closed"):
        raise ValueError(f"unknown bracket mode {bracket!r}")

    if integer:
        lo, hi = int(lo), int(hi)
        while lo < hi:
            mid = (lo + hi + 1) // 2
            probe = prober(start(), mid)
            if probe.n_cells:
                lo, witness = mid, probe
            else:
                hi = mid - 1
        return _finish("binary", prober, lo, witness, lo_bound, hi_bound, tolerance, True)

    lo, hi = float(lo), float(hi)
    while hi - lo > tolerance:
        mid = (lo + hi) / 2
        probe = prober(start(), mid)
        if probe.n_cells:
            lo, witness = mid, probe
        else:
            hi = mid
    result = _finish("binary", prober, lo, witness, lo_bound, hi_bound, tolerance, False)
    # the witness carries at least lo carats; report the level it actually has
    result.kappa = max(lo, _min_slice(result.diamond, agg))
    return result


def _min_slice(cube: Cube, agg: Agg) -> float:
    if cube.n_cells == 0:
        return 0.0
    return float(min(slice_totals(cube, i, agg).min() for i in range(cube.d)))


def kappa(cube: Cube, agg: Agg | str = Agg.COUNT, method: str = "binary", **kwargs) -> KappaResult:
    if method == "binary":
        return kappa_binary(cube, agg, **kwargs)
    if method == "sequential":
        kwargs.pop("tolerance", None)
        return kappa_sequential(cube, agg, **kwargs)
    raise ValueError(f"unknown kappa method {method!r}")

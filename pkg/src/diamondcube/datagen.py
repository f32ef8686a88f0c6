"""Synthetic cubes and perturbations: power-law fact tables, the slow-peeling
chain, full binary cubes, random cell deallocation and the robustness sweep.

Every generator draws from numpy's PCG64 stream seeded explicitly, so the
output is a pure function of its arguments.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .cube import Agg, Cube, Dimension
from .kappa import kappa as find_kappa

__all__ = [
    "PowerGenSpec",
    "PerturbSpec",
    "RobustnessTable",
    "gen_power_cube",
    "gen_adversarial_chain",
    "gen_full_binary_cube",
    "gen_random_cube",
    "perturb_missing",
    "robustness_experiment",
]


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class PowerGenSpec:
    shape: tuple[int, ...]
    skew: float = 1.0
    facts: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        if self.skew <= 0:
            raise ValueError("skew must be positive")
        if min(self.shape, default=0) < 1:
            raise ValueError("every dimension needs at least one value")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shape"] = list(self.shape)
        return d


@dataclass(frozen=True)
class PerturbSpec:
    p_missing: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_missing <= 1.0:
            raise ValueError("p_missing must lie in [0, 1]")


def power_values(rng: np.random.Generator, n: int, skew: float, size: int) -> np.ndarray:
    """Draw ``ceil(n * u**(1/skew))`` with u uniform on (0, 1]; values in 1..n."""
    u = 1.0 - rng.random(size)
    v = np.ceil(n * u ** (1.0 / skew)).astype(np.int64)
    return np.clip(v, 1, n)


def gen_power_cube(spec: PowerGenSpec, names: Sequence[str] | None = None) -> Cube:
    """Collect the first ``spec.facts`` distinct power-law facts (measure 1).

    Dimensions are drawn independently. Attribute labels are the 1-based
    drawn values; only values that occur become attributes, so observed
    cardinalities can fall short of ``spec.shape``.
    """
    shape = spec.shape
    volume = math.prod(shape)
    if spec.facts > volume:
        raise ValueError(f"cannot draw {spec.facts} distinct facts from a volume of {volume}")
    d = len(shape)
    names = list(names) if names is not None else [f"d{i}" for i in range(d)]
    if spec.facts == 0:
        return Cube([Dimension(n, ()) for n in names], np.zeros((0, d)), np.zeros(0, np.int64))

    rng = _rng(spec.seed)
    radix = np.array([math.prod(shape[i + 1:]) for i in range(d)], dtype=object)
    use_int_keys = volume < 2**62
    kept = np.zeros((0, d), dtype=np.int64)
    batch = max(1024, spec.facts)
    while kept.shape[0] < spec.facts:
        draw = np.stack([power_values(rng, n, spec.skew, batch) for n in shape], axis=1)
        codes = np.concatenate([kept, draw - 1])
        if use_int_keys:
            k = codes @ radix.astype(np.int64)
            _, first = np.unique(k, return_index=True)
        else:  # pragma: no cover - only for astronomically large volumes
            _, first = np.unique(codes, axis=0, return_index=True)
        first.sort()
        kept = codes[first[: spec.facts]]
        batch = min(batch * 2, 1 << 24)
    labels = [np.arange(1, n + 1) for n in shape]
    return Cube.from_codes(kept, names=names, labels=labels, compact=True)


def gen_adversarial_chain(n: int) -> Cube:
    """n x n COUNT cube with 2n cells whose 2-carat diamond is the top-left 2x2.

    Two zig-zag paths hang off the block, one from row 1 ending in a
    column with a single cell, one from column 1 ending in a row with a
    single cell. Every slice holds two cells except row 1 and column 1
    (three each) and the two path ends (one each). Cells are emitted from
    the block outwards, so a pass of the streaming dicer peels only the
    outermost cell of each path and I grows linearly in n.
    """
    if n < 3:
        raise ValueError("the chain needs n >= 3")
    cells = [(0, 0), (0, 1), (1, 0), (1, 1)]
    spare = 2 * n - 4
    long_path = n - 1 if n % 2 == 0 else n - 2
    nxt = {"row": 2, "col": 2}
    for start, length in ((("row", 1), long_path), (("col", 1), spare - long_path)):
        axis, at = start
        for _ in range(length):
            other = "col" if axis == "row" else "row"
            new = nxt[other]
            nxt[other] += 1
            cells.append((at, new) if axis == "row" else (new, at))
            axis, at = other, new
    codes = np.array(cells, dtype=np.int64)
    labels = [np.arange(n), np.arange(n)]
    return Cube.from_codes(codes, names=["row", "col"], labels=labels, compact=False)


def gen_full_binary_cube(d: int) -> Cube:
    """All 2**d cells of a d-dimensional cube with two values per dimension."""
    if not 1 <= d <= 20:
        raise ValueError("d must lie in 1..20")
    grid = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T
    return Cube.from_codes(grid, names=[f"d{i}" for i in range(d)], compact=True)


def gen_random_cube(shape: Sequence[int], density: float = 0.5, seed: int = 0,
                    max_measure: int | None = None) -> Cube:
    """Bernoulli(density) allocation over a small dense grid.

    With ``max_measure`` the cells carry uniform integer measures in
    ``0..max_measure``. All declared values stay in the dimensions.
    """
    rng = _rng(seed)
    shape = tuple(int(s) for s in shape)
    mask = rng.random(shape) < density
    codes = np.argwhere(mask)
    if max_measure is None:
        measures = np.ones(codes.shape[0], dtype=np.int64)
    else:
        measures = rng.integers(0, max_measure + 1, size=codes.shape[0])
    labels = [np.arange(s) for s in shape]
    return Cube.from_codes(codes.reshape(-1, len(shape)), measures, labels=labels, compact=False)


def perturb_missing(cube: Cube, spec: PerturbSpec) -> Cube:
    """Drop each cell independently with probability ``spec.p_missing``.

    Dimensions are left untouched, so some slices may end up empty.
    """
    rng = _rng(spec.seed)
    keep = rng.random(cube.n_cells) >= spec.p_missing
    return cube.take(np.flatnonzero(keep))


@dataclass
class RobustnessTable:
    probs: list[float]
    trials: int
    baseline: float
    kappas: list[list[float]] = field(default_factory=list)

    def histogram(self) -> tuple[list[float], list[list[int]]]:
        """Rows are observed kappa values (descending), columns follow ``probs``."""
        values = sorted({k for col in self.kappas for k in col}, reverse=True)
        counts = []
        for v in values:
            counts.append([Counter(col)[v] for col in self.kappas])
        return values, counts

    def column_totals(self) -> list[int]:
        return [len(col) for col in self.kappas]

    def mode(self, j: int) -> float:
        counts = Counter(self.kappas[j])
        top = max(counts.values())
        return max(k for k, c in counts.items() if c == top)

    def to_text(self) -> str:
        values, counts = self.histogram()
        head = ["kappa"] + [f"{p:.0%}" if p >= 0.01 else f"{p:g}" for p in self.probs]
        lines = ["\t".join(head)]
        for v, row in zip(values, counts):
            cells = [str(c) if c else "" for c in row]
            lines.append("\t".join([_fmt(v)] + cells))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        values, counts = self.histogram()
        return {
            "probs": self.probs,
            "trials": self.trials,
            "baseline_kappa": self.baseline,
            "kappa_values": values,
            "counts": counts,
            "samples": self.kappas,
        }


def _fmt(v) -> str:
    return str(int(v)) if float(v).is_integer() else f"{v:g}"


def robustness_experiment(cube: Cube, probs: Sequence[float], trials: int, seed: int = 0,
                          agg: Agg | str = Agg.COUNT, method: str = "binary") -> RobustnessTable:
    """kappa under random cell loss: ``trials`` perturbations per probability."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    agg = Agg.parse(agg)
    baseline = find_kappa(cube, agg, method).kappa
    seeds = np.random.SeedSequence(seed).spawn(len(probs))
    table = RobustnessTable([float(p) for p in probs], trials, baseline)
    for p, ss in zip(probs, seeds):
        col = []
        for child in ss.spawn(trials):
            sub_seed = int(child.generate_state(1, dtype=np.uint64)[0])
            damaged = perturb_missing(cube, PerturbSpec(float(p), sub_seed))
            col.append(find_kappa(damaged, agg, method).kappa)
        table.kappas.append(col)
    return table

"""Diamond dicing for OLAP fact tables.

A diamond is the largest subcube in which every attribute value's slice
aggregates (by COUNT or SUM) to at least a per-dimension threshold. The
package computes diamonds by streaming multi-pass pruning, searches for the
carat number, offers dense-subcube heuristics and ships closed-form bounds,
synthetic generators and brute-force reference answers.
"""

__version__ = "0.1.0"

from .cube import (
    Agg,
    Cube,
    CubeStats,
    Dimension,
    IncompatibleCubesError,
    IngestError,
    contains,
    cube_from_matrix,
    ingest_facts,
    read_csv,
    restrict,
    slice_sigma,
    slice_totals,
    union,
    write_csv,
)
from .dicing import DiamondResult, DiceRunError, NonMonotoneError, dice, dice_file, verify_carats
from .kappa import KappaResult, kappa, kappa_binary, kappa_sequential
from .dcld import DcldResult, dcld_diamond_heuristic, dcld_local_search, objective

__all__ = [
    "Agg", "Cube", "CubeStats", "Dimension", "IncompatibleCubesError", "IngestError",
    "contains", "cube_from_matrix", "ingest_facts", "read_csv", "restrict", "slice_sigma",
    "slice_totals", "union", "write_csv",
    "DiamondResult", "DiceRunError", "NonMonotoneError", "dice", "dice_file", "verify_carats",
    "KappaResult", "kappa", "kappa_binary", "kappa_sequential",
    "DcldResult", "dcld_diamond_heuristic", "dcld_local_search", "objective",
]

"""Command-line front end: ``diamondcube <subcommand> [flags]``.

Exit status is 0 on success (an empty diamond included), 2 on usage or
input errors and 3 on runtime failures such as I/O or exceeded budgets.
Every run leaves a JSON manifest describing inputs, flags and outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    dcld_density_threshold,
    expected_marked_fraction,
    hcld_average_threshold,
    kappa_lower_bound,
    kappa_lower_bound_printed,
    kappa_upper_bound,
    max_cells_without_diamond,
    max_sum_without_diamond,
    min_size_for_carats,
    BoundReport,
)
from .cube import Agg, CubeStats, IngestError, read_csv, to_csv_string
from .datagen import (
    PerturbSpec,
    PowerGenSpec,
    gen_adversarial_chain,
    gen_full_binary_cube,
    gen_power_cube,
    gen_random_cube,
    perturb_missing,
    robustness_experiment,
)
from .dcld import BudgetExceeded, dcld_diamond_heuristic, dcld_local_search
from .dicing import DiceRunError, NonMonotoneError, dice
from .kappa import kappa as find_kappa
from .oracle import OracleBudget, OracleBudgetExceeded, brute_force_dcld, brute_force_diamond

log = logging.getLogger("diamondcube")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def stats_schema() -> dict:
    text = resources.files("diamondcube").joinpath("schemas/dice_stats.schema.json").read_text()
    return json.loads(text)


# output helpers ------------------------------------------------------------


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_atomic(path: Path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _sidecar(output: Path, suffix: str) -> Path:
    return output.with_name(output.stem + suffix)


class Run:
    """Collects outputs and counters for the manifest of one invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.started = time.perf_counter()
        self.outputs: list[str] = []
        self.counters: dict = {}
        self.stdout_json = None

    def emit(self, path: Path | None, text: str) -> None:
        if path is None:
            sys.stdout.write(text)
            return
        write_atomic(path, text)
        self.outputs.append(str(path))

    def manifest(self) -> dict:
        flags = {k: v for k, v in vars(self.args).items() if k != "func"}
        inputs = {}
        src = getattr(self.args, "input", None)
        if src:
            inputs[str(src)] = _digest(Path(src))
        return {
            "tool_version": __version__,
            "subcommand": self.args.command,
            "flags": flags,
            "inputs": inputs,
            "outputs": self.outputs,
            "wall_clock_s": round(time.perf_counter() - self.started, 6),
            "counters": self.counters,
        }


# argument parsing ----------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _carat_vector(values: list[float], d: int, agg: Agg):
    if len(values) not in (1, d):
        raise UsageError(f"--carats needs 1 or {d} values, got {len(values)}")
    if agg is Agg.COUNT:
        if any(not float(v).is_integer() for v in values):
            raise UsageError("COUNT carats must be integers")
        values = [int(v) for v in values]
    return values[0] if len(values) == 1 else values


def _load(args) -> "Cube":  # noqa: F821
    return read_csv(args.input, dims=args.dims, measure=args.measure)


def _cube_io(p: argparse.ArgumentParser, output_help: str) -> None:
    p.add_argument("--input", type=Path, required=True, help="fact-table CSV")
    p.add_argument("--dims", type=_names, help="dimension columns, comma-separated (default: all but measure)")
    p.add_argument("--measure", help="measure column name or index (default: every fact counts 1)")
    p.add_argument("--output", type=Path, help=output_help)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diamondcube", description="Diamond dicing of fact-table cubes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--manifest", type=Path, help="manifest path (default: beside --output, else stderr)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalise a fact table (intern values, roll up duplicates)")
    _cube_io(p, "normalised CSV (default: stdout)")
    p.add_argument("--stats", type=Path, help="cube statistics JSON")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("dice", help="compute the diamond for the given carats")
    _cube_io(p, "diamond CSV (default: stdout)")
    p.add_argument("--agg", type=Agg.parse, default=Agg.COUNT, help="count or sum")
    p.add_argument("--carats", type=_floats, required=True, help="one value or one per dimension")
    p.add_argument("--tolerance", type=float, default=0.0, help="absolute slack on thresholds")
    p.add_argument("--allow-negative", action="store_true", help="permit SUM over negative measures")
    p.add_argument("--storage", choices=["auto", "memory", "file"], default="auto")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--trace", type=Path, help="per-pass trace CSV (default: beside --output)")
    p.add_argument("--stats", type=Path, help="stats JSON (default: beside --output)")
    p.add_argument("--oracle", action="store_true", help="cross-check against brute force (tiny cubes only)")
    p.set_defaults(func=cmd_dice)

    p = sub.add_parser("kappa", help="largest uniform carat count with a nonempty diamond")
    _cube_io(p, "KappaResult JSON (default: stdout)")
    p.add_argument("--agg", type=Agg.parse, default=Agg.COUNT)
    p.add_argument("--method", choices=["binary", "sequential"], default="binary")
    p.add_argument("--tolerance", type=float, help="bracket width for real-valued SUM")
    p.add_argument("--diamond", type=Path, help="also write the diamond at kappa as CSV")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("dcld", help="dense (or heavy) subcube of bounded shape")
    _cube_io(p, "subcube CSV (default: stdout)")
    p.add_argument("--agg", type=Agg.parse, default=Agg.COUNT)
    p.add_argument("--p", type=_ints, required=True, help="shape limit, one value or one per dimension")
    p.add_argument("--method", choices=["diamond", "local"], default="diamond")
    p.add_argument("--stats", type=Path, help="DcldResult JSON (default: beside --output)")
    p.add_argument("--oracle", action="store_true", help="also report the exhaustive optimum")
    p.set_defaults(func=cmd_dcld)

    p = sub.add_parser("bounds", help="closed-form bounds for a shape and carat vector")
    p.add_argument("--input", type=Path, help="derive shape, cell count and sum from this CSV")
    p.add_argument("--dims", type=_names)
    p.add_argument("--measure")
    p.add_argument("--shape", type=_ints, help="n_1,...,n_d (when no --input)")
    p.add_argument("--cells", type=int, help="allocated cell count (when no --input)")
    p.add_argument("--sum", type=float, dest="total", help="total measure (when no --input)")
    p.add_argument("--carats", type=_floats)
    p.add_argument("--p", type=_ints, help="DCLD shape limit")
    p.add_argument("--s", type=float, help="zeta exponent for the pruning model")
    p.add_argument("--output", type=Path, help="BoundReport list JSON (default: stdout)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("gen", help="generate a synthetic fact table")
    p.add_argument("--kind", choices=["power", "chain", "binary", "random"], default="power")
    p.add_argument("--shape", type=_ints, help="cardinalities (power, random)")
    p.add_argument("--skew", type=float, default=1.0, help="power-law exponent a")
    p.add_argument("--facts", type=int, default=1000)
    p.add_argument("--n", type=int, help="chain size")
    p.add_argument("--d", type=int, help="binary cube dimension")
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--max-measure", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path, required=True, help="fact-table CSV; a .spec.json echo goes beside it")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("perturb", help="drop each cell independently at random")
    _cube_io(p, "perturbed CSV")
    p.add_argument("--prob", type=float, required=True, help="probability a cell goes missing")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("robustness", help="kappa histogram under random cell loss")
    _cube_io(p, "histogram JSON; a .txt table goes beside it (default: stdout)")
    p.add_argument("--agg", type=Agg.parse, default=Agg.COUNT)
    p.add_argument("--method", choices=["binary", "sequential"], default="binary")
    p.add_argument("--probs", type=_floats, default=[0.01, 0.02, 0.03, 0.04, 0.05])
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_robustness)
    return parser


# subcommands ---------------------------------------------------------------


def cmd_ingest(args, run: Run) -> str:
    cube = _load(args)
    run.emit(args.output, to_csv_string(cube, args.measure or "measure"))
    if args.stats:
        run.emit(args.stats, dumps(cube.stats().to_dict()))
    run.counters["cells"] = cube.n_cells
    return f"ingested {cube.n_cells} cells, shape {cube.shape}"


def cmd_dice(args, run: Run) -> str:
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    cube = _load(args)
    carats = _carat_vector(args.carats, cube.d, args.agg)
    workdir = args.output.parent if args.output else None
    res = dice(cube, carats, args.agg, tolerance=args.tolerance, allow_negative=args.allow_negative,
               storage=args.storage, threads=args.threads, workdir=workdir)
    stats = res.stats()
    if args.oracle:
        truth = brute_force_diamond(cube, carats, args.agg, allow_negative=args.allow_negative,
                                    tolerance=max(args.tolerance, 1e-9), budget=OracleBudget())
        stats["oracle"] = {"agrees": truth == res.diamond, "cells": truth.n_cells}
        if truth != res.diamond:
            raise DiceRunError("oracle disagrees with the streaming result", res.passes)
    run.emit(args.output, to_csv_string(res.diamond, args.measure or "measure"))
    trace = args.trace or (_sidecar(args.output, ".trace.csv") if args.output else None)
    stats_path = args.stats or (_sidecar(args.output, ".stats.json") if args.output else None)
    if trace:
        run.emit(trace, res.trace_csv())
    if stats_path:
        run.emit(stats_path, dumps(stats))
    run.counters.update(passes=res.passes, deleting_passes=res.deleting_passes, cells=res.diamond.n_cells)
    state = "empty diamond" if res.empty else f"diamond of {res.diamond.n_cells} cells, shape {res.diamond.shape}"
    return f"{state} after {res.passes} passes ({res.deleting_passes} deleting)"


def cmd_kappa(args, run: Run) -> str:
    cube = _load(args)
    kw = {"threads": args.threads}
    if args.tolerance is not None:
        kw["tolerance"] = args.tolerance
    res = find_kappa(cube, args.agg, args.method, **kw)
    run.emit(args.output, dumps(res.to_dict()))
    if args.diamond:
        run.emit(args.diamond, to_csv_string(res.diamond, args.measure or "measure"))
    run.counters.update(probes=len(res.probes), dices=res.dice_count, passes=res.passes)
    approx = "" if res.exact else " (approximate)"
    return f"kappa = {res.kappa}{approx} after {len(res.probes)} probes"


def cmd_dcld(args, run: Run) -> str:
    cube = _load(args)
    if len(args.p) not in (1, cube.d):
        raise UsageError(f"--p needs 1 or {cube.d} values")
    limit = args.p[0] if len(args.p) == 1 else args.p
    if args.method == "diamond":
        res = dcld_diamond_heuristic(cube, limit, args.agg)
    else:
        res = dcld_local_search(cube, limit, args.agg)
    report = res.to_dict()
    if args.oracle:
        best = brute_force_dcld(cube, limit, args.agg, budget=OracleBudget())
        report["oracle"] = {"objective": best.objective, "cell_count": best.subcube.n_cells,
                            "gap": best.objective - res.objective}
    run.emit(args.output, to_csv_string(res.subcube, args.measure or "measure"))
    stats_path = args.stats or (_sidecar(args.output, ".dcld.json") if args.output else None)
    if stats_path:
        run.emit(stats_path, dumps(report))
    elif args.output is None:
        sys.stderr.write(dumps(report))
    run.counters.update(modifications=res.modifications, swap_evaluations=res.swap_evaluations)
    return f"{args.method}: objective {res.objective:g} on shape {res.subcube.shape}"


def cmd_bounds(args, run: Run) -> str:
    if args.input:
        stats = _load(args).stats()
    else:
        if not args.shape or args.cells is None:
            raise UsageError("bounds needs --input or both --shape and --cells")
        total = args.total if args.total is not None else args.cells
        if float(total).is_integer():
            total = int(total)
        stats = CubeStats(args.cells, tuple(args.shape), int(np.prod(args.shape)), 0.0, total)
    shape = list(stats.shape)
    d = len(shape)
    reports = [
        BoundReport("kappa_lower_bound_count", kappa_lower_bound(stats, Agg.COUNT), "lower", "existence",
                    {"cells": stats.cell_count, "shape": shape}),
        BoundReport("kappa_lower_bound_count_printed", kappa_lower_bound_printed(stats), "lower", "existence",
                    {"cells": stats.cell_count, "shape": shape}),
        BoundReport("kappa_upper_bound_count", kappa_upper_bound(stats, Agg.COUNT), "upper", "non-existence",
                    {"cells": stats.cell_count, "shape": shape}),
        BoundReport("kappa_lower_bound_sum", kappa_lower_bound(stats, Agg.SUM), "lower", "existence",
                    {"total_sum": stats.total_sum, "shape": shape}),
        BoundReport("kappa_upper_bound_sum", kappa_upper_bound(stats, Agg.SUM), "upper", "non-existence",
                    {"total_sum": stats.total_sum}),
    ]
    if args.carats:
        k = args.carats if len(args.carats) == d else args.carats * d
        if len(k) != d:
            raise UsageError(f"--carats needs 1 or {d} values")
        inputs = {"shape": shape, "carats": k}
        if d > 1:
            reports.append(BoundReport("min_diamond_cells", min_size_for_carats(k, shape), "lower",
                                       "non-existence", inputs))
        if all(float(x).is_integer() for x in k):
            reports.append(BoundReport("max_cells_without_diamond", max_cells_without_diamond(shape, [int(x) for x in k]),
                                       "upper", "existence", inputs))
        reports.append(BoundReport("max_sum_without_diamond", max_sum_without_diamond(shape, k), "upper",
                                   "existence", inputs))
        reports.append(BoundReport("hcld_average_threshold", hcld_average_threshold(shape, k), "upper",
                                   "existence", inputs))
        if args.s is not None:
            reports.append(BoundReport("expected_marked_fraction", expected_marked_fraction(shape, k, args.s),
                                       "model", "expectation", {**inputs, "s": args.s}))
        if args.p:
            p = args.p if len(args.p) == d else args.p * d
            reports.append(BoundReport("dcld_density_threshold", dcld_density_threshold(shape, p, int(max(k))),
                                       "upper", "existence", {**inputs, "p": p}))
    run.emit(args.output, dumps([r.to_dict() for r in reports]))
    return f"{len(reports)} bounds for shape {tuple(shape)}"


def cmd_gen(args, run: Run) -> str:
    if args.kind == "power":
        if not args.shape:
            raise UsageError("--kind power needs --shape")
        spec = PowerGenSpec(tuple(args.shape), args.skew, args.facts, args.seed)
        cube, echo = gen_power_cube(spec), spec.to_dict()
    elif args.kind == "chain":
        if args.n is None:
            raise UsageError("--kind chain needs --n")
        cube, echo = gen_adversarial_chain(args.n), {"n": args.n}
    elif args.kind == "binary":
        if args.d is None:
            raise UsageError("--kind binary needs --d")
        cube, echo = gen_full_binary_cube(args.d), {"d": args.d}
    else:
        if not args.shape:
            raise UsageError("--kind random needs --shape")
        cube = gen_random_cube(args.shape, args.density, args.seed, args.max_measure)
        echo = {"shape": args.shape, "density": args.density, "seed": args.seed, "max_measure": args.max_measure}
    echo = {"kind": args.kind, **echo, "observed_shape": list(cube.shape), "cells": cube.n_cells}
    run.emit(args.output, to_csv_string(cube))
    run.emit(_sidecar(args.output, ".spec.json"), dumps(echo))
    run.counters["cells"] = cube.n_cells
    return f"generated {cube.n_cells} cells, shape {cube.shape}"


def cmd_perturb(args, run: Run) -> str:
    cube = _load(args)
    spec = PerturbSpec(args.prob, args.seed)
    out = perturb_missing(cube, spec)
    run.emit(args.output, to_csv_string(out, args.measure or "measure"))
    if args.output:
        run.emit(_sidecar(args.output, ".spec.json"),
                 dumps({"p_missing": spec.p_missing, "seed": spec.seed, "cells_before": cube.n_cells,
                        "cells_after": out.n_cells}))
    run.counters["cells"] = out.n_cells
    return f"kept {out.n_cells} of {cube.n_cells} cells"


def cmd_robustness(args, run: Run) -> str:
    cube = _load(args)
    table = robustness_experiment(cube, args.probs, args.trials, args.seed, args.agg, args.method)
    run.emit(args.output, dumps(table.to_dict()))
    if args.output:
        run.emit(_sidecar(args.output, ".txt"), table.to_text())
    else:
        sys.stderr.write(table.to_text())
    run.counters["kappa_runs"] = 1 + len(args.probs) * args.trials
    return f"baseline kappa {table.baseline}; {len(args.probs)} x {args.trials} perturbed runs"


# entry point ---------------------------------------------------------------

_INPUT_ERRORS = (UsageError, IngestError, NonMonotoneError, ValueError, KeyError)
_RUNTIME_ERRORS = (OSError, DiceRunError, OracleBudgetExceeded, BudgetExceeded, RuntimeError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    run = Run(args)
    try:
        summary = args.func(args, run)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _RUNTIME_ERRORS as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    manifest = run.manifest()
    target = args.manifest or (_sidecar(Path(run.outputs[0]), ".manifest.json") if run.outputs else None)
    if target is None:
        sys.stderr.write(dumps(manifest))
        print(summary, file=sys.stderr)
    else:
        write_atomic(target, dumps(manifest))
        print(f"{summary}; manifest {target}", file=sys.stderr if args.output is None else sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

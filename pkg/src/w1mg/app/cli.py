"""Command line front end: ``w1mg solve | oracle | validate | bench | gen``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..grid import GridSpec
from ..multilevel import ALGORITHMS, default_tolerance, make_schedule, ml_run
from ..oracle import validate_assumptions, w1_1d_cdf, w1_exact_p1
from ..prox import PNorm
from ..solver_cp import SolverParams, cp_run
from ..solver_pdhg import pdhg_run
from . import io as fio
from .instances import KINDS, DensityImage, InputError, cells_for_image, discretize, source_for, synth_instance

log = logging.getLogger("w1mg")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _levels_arg(text: str):
    if text == "auto":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None


def _tol_arg(text: str):
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a real or 'auto', got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return value


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="w1mg", description="Wasserstein-1 distances on square grids.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-level progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="distance, flux and potential between two images")
    s.add_argument("--a", required=True, help="source density (PGM P2/P5 or CSV)")
    s.add_argument("--b", required=True, help="target density (PGM P2/P5 or CSV)")
    s.add_argument("--p", default="1", choices=["1", "2", "inf"])
    s.add_argument("--algo", default="ml-pdhg", choices=ALGORITHMS)
    s.add_argument("--levels", type=_levels_arg, default=None, help="integer or 'auto'")
    s.add_argument("--alpha", type=float, default=-1.0)
    s.add_argument("--tol", type=_tol_arg, default=None, help="finest tolerance or 'auto'")
    s.add_argument("--max-iters", type=int, default=100_000)
    s.add_argument("--safe-steps", action="store_true", help="use the provably convergent step sizes")
    s.add_argument("--cells", type=int, default=None, help="override the finest grid size N")
    s.add_argument("--out", help="write the JSON report here instead of stdout")
    s.add_argument("--export-flux")
    s.add_argument("--export-potential")
    s.add_argument("--export-quiver")

    o = sub.add_parser("oracle", help="exact p=1 min-cost flow or 1D closed form on small inputs")
    o.add_argument("--a", required=True)
    o.add_argument("--b", required=True)
    o.add_argument("--method", choices=["exact", "1d"], default="exact",
                   help="'1d' compares the x1-marginals")
    o.add_argument("--cells", type=int, default=None)

    v = sub.add_parser("validate", help="assumption check over synthetic pairs, CSV output")
    v.add_argument("--kind", choices=KINDS, default="two_blobs")
    v.add_argument("--pairs", type=int, default=5)
    v.add_argument("--cells", type=_int_list, default=[16, 32, 64, 128])
    v.add_argument("--p", default="1", choices=["1", "2", "inf"])
    v.add_argument("--eps", type=float, default=1e-8)
    v.add_argument("--out")

    b = sub.add_parser("bench", help="iteration and timing sweeps, CSV output")
    b.add_argument("--kind", choices=KINDS, default="two_blobs")
    b.add_argument("--cells", type=int, default=128)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--p", default="1", choices=["1", "2", "inf"])
    b.add_argument("--algos", default="ml-pdhg", help="comma-separated")
    b.add_argument("--levels", type=_int_list, default=None, help="comma-separated level counts")
    b.add_argument("--alphas", type=_float_list, default=[-1.0])
    b.add_argument("--max-iters", type=int, default=100_000)
    b.add_argument("--out")

    g = sub.add_parser("gen", help="write a synthetic image pair")
    g.add_argument("--kind", choices=KINDS, default="two_blobs")
    g.add_argument("--cells", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-a", required=True, help=".pgm or .csv")
    g.add_argument("--out-b", required=True, help=".pgm or .csv")
    return parser


# -- commands --------------------------------------------------------------------------


def _load_pair(path_a: str, path_b: str, cells: Optional[int]) -> tuple[DensityImage, DensityImage, int]:
    a, b = fio.read_image(path_a), fio.read_image(path_b)
    if a.pixels.shape != b.pixels.shape:
        raise InputError(f"image sizes differ: {a.pixels.shape} vs {b.pixels.shape}")
    if not a.is_square:
        raise InputError(f"density image must be square, got {a.height}x{a.width}")
    return a, b, cells if cells is not None else cells_for_image(a.width)


def run_solve(a: DensityImage, b: DensityImage, cells: int, algo: str, p, levels=None,
              alpha: float = -1.0, tol: Optional[float] = None, max_iters: int = 100_000,
              safe_steps: bool = False):
    """Solve one configuration; used by ``solve`` and ``bench``."""
    step_mode = "safe" if safe_steps else "practical"
    tol = tol if tol is not None else default_tolerance(algo, cells)
    if algo in ("cp", "pdhg"):
        if levels not in (None, 1):
            raise UsageError(f"--levels applies to ml-cp and ml-pdhg, not {algo}")
        rho = source_for(a, b, GridSpec(cells))
        params = SolverParams(p=PNorm.of(p), tol=tol, max_iters=max_iters, step_mode=step_mode)
        solve = cp_run if algo == "cp" else pdhg_run
        return solve(rho, None, params, record_history=False)
    try:
        schedule = make_schedule(cells, levels, tol, alpha, algo)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return ml_run(lambda grid: source_for(a, b, grid), p, schedule, algo[3:], step_mode, max_iters)


def _cmd_solve(args) -> int:
    a, b, cells = _load_pair(args.a, args.b, args.cells)
    report = run_solve(a, b, cells, args.algo, args.p, args.levels, args.alpha, args.tol,
                       args.max_iters, args.safe_steps)
    text = json.dumps(fio.report_json(report), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.export_flux:
        fio.write_flux_csv(args.export_flux, report.flux)
    if args.export_potential:
        fio.write_scalar_csv(args.export_potential, report.potential)
    if args.export_quiver:
        fio.write_quiver_csv(args.export_quiver, report.flux)
    if not report.converged:
        log.error("max_iters reached before the tolerance was met")
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_oracle(args) -> int:
    a, b, cells = _load_pair(args.a, args.b, args.cells)
    grid = GridSpec(cells)
    if args.method == "exact":
        if cells > 16:
            raise UsageError(f"the exact oracle is limited to N <= 16, got N={cells}")
        value = w1_exact_p1(source_for(a, b, grid))
    else:
        r0, r1 = discretize(a, grid), discretize(b, grid)
        value = w1_1d_cdf(r0.values.sum(axis=0) * grid.step, r1.values.sum(axis=0) * grid.step, grid.step)
    print(json.dumps({"distance": value, "method": args.method, "cells": cells}, indent=2))
    return EXIT_OK


def _write_rows(rows: list[dict], out: Optional[str]) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out:
            fh.close()


def _cmd_validate(args) -> int:
    cells = args.cells
    instances = []
    for seed in range(args.pairs):
        a, b = synth_instance(args.kind, cells[-1], seed=seed)
        instances.append(lambda grid, a=a, b=b: source_for(a, b, grid))
    try:
        report = validate_assumptions(instances, cells, args.p, args.eps)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write_rows(report.rows(), args.out)
    return EXIT_OK


def bench_threads() -> int:
    try:
        return max(1, int(os.environ.get("W1MG_THREADS", "1")))
    except ValueError:
        return 1


def _cmd_bench(args) -> int:
    a, b = synth_instance(args.kind, args.cells, seed=args.seed)
    algos = [s for s in args.algos.split(",") if s]
    for algo in algos:
        if algo not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {algo!r}")
    configs = []
    for algo in algos:
        level_list = [1] if not algo.startswith("ml-") else (args.levels or [None])
        alphas = [None] if not algo.startswith("ml-") else args.alphas
        for levels in level_list:
            for alpha in alphas:
                configs.append((algo, levels, alpha))

    def one(cfg):
        algo, levels, alpha = cfg
        rep = run_solve(a, b, args.cells, algo, args.p, levels if algo.startswith("ml-") else None,
                        -1.0 if alpha is None else alpha, None, args.max_iters)
        return {
            "algo": algo,
            "levels": len(rep.levels),
            "alpha": "" if alpha is None else alpha,
            "cells": args.cells,
            "p": rep.p,
            "eps_finest": rep.levels[-1].eps,
            "iters_finest": rep.levels[-1].iters,
            "iters_per_level": " ".join(str(i) for i in rep.iterations),
            "distance": repr(rep.distance),
            "seconds": rep.total_seconds,
            "converged": rep.converged,
        }

    threads = min(bench_threads(), len(configs))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, configs))
    else:
        rows = [one(c) for c in configs]
    rows.sort(key=lambda r: (r["algo"], r["levels"], str(r["alpha"])))
    _write_rows(rows, args.out)
    return EXIT_OK


def _cmd_gen(args) -> int:
    a, b = synth_instance(args.kind, args.cells, seed=args.seed)
    for img, path in ((a, args.out_a), (b, args.out_b)):
        if str(path).lower().endswith(".pgm"):
            fio.write_pgm(path, img.pixels)
        else:
            fio.write_csv_image(path, img.pixels)
    return EXIT_OK


COMMANDS = {
    "solve": _cmd_solve,
    "oracle": _cmd_oracle,
    "validate": _cmd_validate,
    "bench": _cmd_bench,
    "gen": _cmd_gen,
}


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"w1mg: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, OSError) as exc:
        print(f"w1mg: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"w1mg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"w1mg: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(cli_main())

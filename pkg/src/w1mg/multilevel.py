"""Cascadic coarse-to-fine driver, cross-level interpolation and tolerance schedules."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .grid import FluxField, GridSpec, ScalarField
from .prox import PNorm
from .report import SolveReport
from .solver_cp import SolverParams, cp_run
from .solver_pdhg import pdhg_run

log = logging.getLogger(__name__)

ALGORITHMS = ("cp", "pdhg", "ml-cp", "ml-pdhg")


# -- interpolation -----------------------------------------------------------------


def _check_nesting(coarse: GridSpec, fine: GridSpec) -> None:
    if fine.cells_per_side != 2 * coarse.cells_per_side:
        raise ValueError(
            f"grids do not nest: coarse N={coarse.cells_per_side}, fine N={fine.cells_per_side}"
        )


def _midpoints(a: np.ndarray, axis: int) -> np.ndarray:
    """Insert the average of every adjacent pair along ``axis`` (n -> 2n - 1)."""
    a = np.moveaxis(a, axis, 0)
    out = np.empty((2 * a.shape[0] - 1,) + a.shape[1:])
    out[0::2] = a
    out[1::2] = 0.5 * (a[:-1] + a[1:])
    return np.moveaxis(out, 0, axis)


def interpolate_scalar_array(values: np.ndarray) -> np.ndarray:
    return _midpoints(_midpoints(values, 1), 0)


def interpolate_flux_arrays(x_edges: np.ndarray, y_edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Along its own direction an edge copies the nearest coarse edge (ties to the lower one);
    # across, values are averaged like node values.
    fx = _midpoints(np.repeat(x_edges, 2, axis=1), 0)
    fy = _midpoints(np.repeat(y_edges, 2, axis=0), 1)
    return fx, fy


def interpolate_scalar(phi: ScalarField, fine: Optional[GridSpec] = None) -> ScalarField:
    """Coarse-to-fine interpolation of a node field.

    Coarse nodes are copied, nodes on a coarse grid line average their two
    coarse neighbours and cell centres average the four coarse corners.
    """
    fine = fine or phi.grid.refined()
    _check_nesting(phi.grid, fine)
    return ScalarField(fine, interpolate_scalar_array(phi.values))


def interpolate_flux(m: FluxField, fine: Optional[GridSpec] = None) -> FluxField:
    """Coarse-to-fine interpolation of an edge field (also used for the dual flux)."""
    fine = fine or m.grid.refined()
    _check_nesting(m.grid, fine)
    return FluxField(fine, *interpolate_flux_arrays(m.x_edges, m.y_edges))


# -- tolerance rules -----------------------------------------------------------------


def default_tolerance(algo: str, cells: int) -> float:
    """Empirical stopping tolerance for the finest grid, scaled from ``h = 1/512``."""
    r = 512.0 / cells
    if algo == "cp":
        return 1e-6 / 512 * r**3
    if algo == "ml-cp":
        return 1e-6 / 128 * r**2
    if algo == "pdhg":
        return min(2e-4, 1e-4 / 16 * r**2)
    if algo == "ml-pdhg":
        return min(2e-4, 1e-4 / 32 * r**2)
    raise ValueError(f"unknown algorithm {algo!r}")


def default_levels(cells: int) -> int:
    return max(1, int(math.floor(math.log2(cells))) - 3)


def max_feasible_levels(cells: int) -> int:
    levels = 1
    while cells % (2**levels) == 0:
        levels += 1
    return levels


@dataclass(frozen=True)
class LevelSchedule:
    """Grids (coarsest first) and per-level tolerances ``eps_l = eps_L (h_l / h_L)^alpha``."""

    grids: tuple[GridSpec, ...]
    tolerances: tuple[float, ...]
    alpha: float

    @property
    def levels(self) -> int:
        return len(self.grids)

    @property
    def finest(self) -> GridSpec:
        return self.grids[-1]


def make_schedule(
    cells: int,
    levels: Optional[int] = None,
    eps_finest: Optional[float] = None,
    alpha: float = -1.0,
    algo: str = "ml-pdhg",
    strict: bool = True,
) -> LevelSchedule:
    """Build the level hierarchy for a finest grid with ``cells`` cells per side.

    Args:
        cells: finest-grid cells per side ``N``.
        levels: number of levels ``L``; defaults to ``log2(N) - 3`` (at least 1).
        eps_finest: finest-level tolerance; defaults to the empirical rule for ``algo``.
        alpha: exponent of the schedule; ``-1`` tightens coarse levels.
        algo: ``"ml-cp"`` or ``"ml-pdhg"``, selects the default tolerance.
        strict: raise if ``N`` is not divisible by ``2^(L-1)``; otherwise reduce
            ``L`` to the largest feasible value and log a warning.
    """
    if levels is None:
        levels = default_levels(cells)
    if levels < 1:
        raise ValueError(f"levels must be at least 1, got {levels}")
    feasible = max_feasible_levels(cells)
    if levels > feasible:
        if strict:
            raise ValueError(f"N={cells} is not divisible by 2^{levels - 1}")
        log.warning("reducing levels from %d to %d: N=%d not divisible by 2^%d",
                    levels, feasible, cells, levels - 1)
        levels = feasible
    if eps_finest is None:
        eps_finest = default_tolerance(algo if algo.startswith("ml-") else "ml-" + algo, cells)
    if not eps_finest > 0:
        raise ValueError("finest tolerance must be positive")
    grids = tuple(GridSpec(cells // 2 ** (levels - l)) for l in range(1, levels + 1))
    tols = tuple(eps_finest * float(2 ** (levels - l)) ** alpha for l in range(1, levels + 1))
    return LevelSchedule(grids, tols, float(alpha))


# -- cascadic driver -----------------------------------------------------------------

SourceProvider = Union[Sequence[ScalarField], Callable[[GridSpec], ScalarField]]


def _source_at(sources: SourceProvider, level: int, grid: GridSpec) -> ScalarField:
    rho = sources(grid) if callable(sources) else sources[level]
    if rho.grid != grid:
        raise ValueError(f"source for level {level + 1} lives on N={rho.grid.cells_per_side}, "
                         f"expected N={grid.cells_per_side}")
    return rho


def ml_run(
    sources: SourceProvider,
    p,
    schedule: LevelSchedule,
    inner: str = "pdhg",
    step_mode: str = "practical",
    max_iters: int = 100_000,
    record_history: bool = False,
) -> SolveReport:
    """One coarse-to-fine pass: solve each level to its tolerance and interpolate upward.

    ``sources`` is either one source field per level (coarsest first) or a
    callable producing the source on a given grid.
    """
    if inner not in ("cp", "pdhg"):
        raise ValueError(f"inner solver must be 'cp' or 'pdhg', got {inner!r}")
    p = PNorm.of(p)
    solve = cp_run if inner == "cp" else pdhg_run
    stages: list[SolveReport] = []
    m0 = d0 = None
    t0 = time.perf_counter()
    for level, (grid, eps) in enumerate(zip(schedule.grids, schedule.tolerances)):
        rho = _source_at(sources, level, grid)
        if stages:
            prev = stages[-1]
            m0 = interpolate_flux(prev.flux, grid)
            d0 = (interpolate_scalar(prev.multiplier, grid) if inner == "cp"
                  else interpolate_flux(prev.dual_flux, grid))
        params = SolverParams(p=p, tol=eps, max_iters=max_iters, step_mode=step_mode)
        stage = solve(rho, None, params, m0, d0, record_history=record_history)
        log.info("level %d/%d N=%d eps=%.3e iters=%d", level + 1, schedule.levels,
                 grid.cells_per_side, eps, stage.iterations[0])
        stages.append(stage)
    total = time.perf_counter() - t0
    last = stages[-1]
    return replace(
        last,
        algo="ml-" + inner,
        levels=[s.levels[0] for s in stages],
        residual_history=[r for s in stages for r in s.residual_history],
        total_seconds=total,
        stages=stages,
    )


__all__ = [
    "ALGORITHMS",
    "LevelSchedule",
    "default_levels",
    "default_tolerance",
    "interpolate_flux",
    "interpolate_scalar",
    "make_schedule",
    "ml_run",
]

"""Exact references for small instances, assumption validation and tolerance search."""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .grid import GridSpec, ScalarField, norm_L2
from .multilevel import interpolate_flux, interpolate_scalar, make_schedule, ml_run
from .prox import PNorm

log = logging.getLogger(__name__)

MAX_ORACLE_CELLS = 16


# -- min-cost flow ---------------------------------------------------------------------


class _Network:
    """Residual network for successive shortest paths with real-valued flows."""

    def __init__(self, n: int):
        self.n = n
        self.to: list[int] = []
        self.cap: list[float] = []
        self.cost: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(n)]

    def add(self, u: int, v: int, cap: float, cost: float) -> None:
        # arc e and its reverse e ^ 1
        self.adj[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.adj[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(0.0)
        self.cost.append(-cost)

    def min_cost_flow(self, s: int, t: int, demand: float, eps: float) -> float:
        pot = [0.0] * self.n
        sent = 0.0
        total = 0.0
        while demand - sent > eps:
            dist = [math.inf] * self.n
            back = [-1] * self.n
            dist[s] = 0.0
            heap = [(0.0, s)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                for e in self.adj[u]:
                    if self.cap[e] <= eps:
                        continue
                    v = self.to[e]
                    nd = d + self.cost[e] + pot[u] - pot[v]
                    if nd < dist[v] - 1e-15:
                        dist[v] = nd
                        back[v] = e
                        heapq.heappush(heap, (nd, v))
            if math.isinf(dist[t]):
                raise RuntimeError("min-cost flow: demand cannot be routed")
            for v in range(self.n):
                if not math.isinf(dist[v]):
                    pot[v] += dist[v]
            push = demand - sent
            v = t
            while v != s:
                e = back[v]
                push = min(push, self.cap[e])
                v = self.to[e ^ 1]
            v = t
            while v != s:
                e = back[v]
                self.cap[e] -= push
                self.cap[e ^ 1] += push
                total += push * self.cost[e]
                v = self.to[e ^ 1]
            sent += push
        return total


def min_cost_transport(supply: np.ndarray, arcs: Iterable[tuple[int, int, float]]) -> float:
    """Cheapest routing of ``supply`` (positive: source, negative: sink) over undirected,
    uncapacitated ``arcs`` given as ``(u, v, cost)``."""
    supply = np.asarray(supply, dtype=float).ravel()
    n = supply.size
    s, t = n, n + 1
    net = _Network(n + 2)
    for u, v, c in arcs:
        net.add(u, v, math.inf, c)
        net.add(v, u, math.inf, c)
    pos = supply.clip(min=0.0)
    neg = (-supply).clip(min=0.0)
    for i in range(n):
        if pos[i] > 0:
            net.add(s, i, float(pos[i]), 0.0)
        if neg[i] > 0:
            net.add(i, t, float(neg[i]), 0.0)
    demand = float(min(pos.sum(), neg.sum()))
    if demand == 0.0:
        return 0.0
    return net.min_cost_flow(s, t, demand, eps=1e-14 * demand)


def grid_arcs(grid: GridSpec) -> list[tuple[int, int, float]]:
    n, h = grid.nodes_per_side, grid.step
    arcs = []
    for j in range(n):
        for i in range(n):
            k = j * n + i
            if i + 1 < n:
                arcs.append((k, k + 1, h))
            if j + 1 < n:
                arcs.append((k, k + n, h))
    return arcs


def w1_exact_p1(rho: ScalarField) -> float:
    """Exact optimum of the discrete flux problem for p = 1 by min-cost flow on the grid graph.

    Node masses are ``rho h^2`` and every edge costs its length ``h`` per unit mass.
    """
    grid = rho.grid
    if grid.cells_per_side > MAX_ORACLE_CELLS:
        raise ValueError(f"oracle is limited to N <= {MAX_ORACLE_CELLS}, got N={grid.cells_per_side}")
    mass = rho.values * grid.cell_area
    if abs(mass.sum()) > 1e-10 * max(np.abs(mass).sum(), 1e-300):
        raise ValueError("source must be zero-sum")
    return min_cost_transport(mass, grid_arcs(grid))


def w1_path_p1(rho0: np.ndarray, rho1: np.ndarray, h: float) -> float:
    """Min-cost flow between 1D densities on a path graph with spacing ``h``."""
    mass = (np.asarray(rho0, float) - np.asarray(rho1, float)) * h
    arcs = [(k, k + 1, h) for k in range(mass.size - 1)]
    return min_cost_transport(mass, arcs)


def w1_1d_cdf(rho0, rho1, h: float) -> float:
    """Closed-form 1D distance ``h * sum |F0 - F1|`` from cumulative masses."""
    rho0 = np.asarray(rho0, dtype=float)
    rho1 = np.asarray(rho1, dtype=float)
    if rho0.shape != rho1.shape or rho0.ndim != 1:
        raise ValueError("densities must be 1D arrays of equal length")
    m0, m1 = rho0.sum() * h, rho1.sum() * h
    if abs(m0 - m1) > 1e-9 * max(abs(m0), abs(m1), 1.0):
        raise ValueError(f"mass mismatch: {m0!r} vs {m1!r}")
    return float(h * np.abs(np.cumsum((rho0 - rho1) * h)).sum())


# -- assumption validation -----------------------------------------------------------------


def fit_decay_exponent(h: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``log2(values)`` against ``log2(h)``."""
    x = np.log2(np.asarray(h, dtype=float))
    y = np.log2(np.asarray(values, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points to fit an exponent")
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


@dataclass
class AssumptionReport:
    """Per-level averages of solution norms and interpolation discrepancies.

    ``z`` stands for ``(m, phi)`` from the primal-dual solver, ``y`` for
    ``(m, varphi)`` from prox-PDHG. Discrepancy entries start at the second level.
    """

    p: str
    cells: list[int]
    z_norm2: list[float]
    y_norm2: list[float]
    z_discrepancy: list[float]
    y_discrepancy: list[float]
    r: float
    nu: float
    instances: int = 0

    @staticmethod
    def _ratio(values: Sequence[float]) -> float:
        return max(values) / min(values)

    @property
    def z_ratio(self) -> float:
        return self._ratio(self.z_norm2)

    @property
    def y_ratio(self) -> float:
        return self._ratio(self.y_norm2)

    def rows(self) -> list[dict]:
        out = []
        for i, n in enumerate(self.cells):
            out.append({
                "p": self.p,
                "level": i + 1,
                "h": 1.0 / n,
                "z_norm2": self.z_norm2[i],
                "y_norm2": self.y_norm2[i],
                "z_discrepancy": self.z_discrepancy[i - 1] if i else float("nan"),
                "y_discrepancy": self.y_discrepancy[i - 1] if i else float("nan"),
            })
        return out


def _pair_norm2(a, b) -> float:
    return norm_L2(a) ** 2 + norm_L2(b) ** 2


def validate_assumptions(
    instances: Sequence[Callable[[GridSpec], ScalarField]],
    cells: Sequence[int],
    p=1,
    eps: float = 1e-8,
    max_iters: int = 200_000,
) -> AssumptionReport:
    """Estimate per-level optima with tight cascadic solves and summarize them.

    Args:
        instances: source providers, each mapping a grid to its source field.
        cells: cells per side on every level, coarsest first, each doubling.
        p: ground-metric exponent.
        eps: tolerance used on every level.
    """
    cells = list(cells)
    if any(b != 2 * a for a, b in zip(cells, cells[1:])):
        raise ValueError("levels must double from one to the next")
    p = PNorm.of(p)
    levels = len(cells)
    sched = make_schedule(cells[-1], levels, eps, alpha=0.0)
    acc = np.zeros((4, levels))
    for src in instances:
        for inner, row in (("cp", 0), ("pdhg", 1)):
            rep = ml_run(src, p, sched, inner, max_iters=max_iters)
            for l, stage in enumerate(rep.stages):
                second = stage.multiplier if inner == "cp" else stage.dual_flux
                acc[row, l] += _pair_norm2(stage.flux, second)
                if l == 0:
                    continue
                prev = rep.stages[l - 1]
                grid = stage.flux.grid
                m_i = interpolate_flux(prev.flux, grid)
                if inner == "cp":
                    s_i = interpolate_scalar(prev.multiplier, grid)
                else:
                    s_i = interpolate_flux(prev.dual_flux, grid)
                acc[row + 2, l] += _pair_norm2(m_i - stage.flux, s_i - second)
    acc /= len(instances)
    hs = [1.0 / n for n in cells[1:]]
    # one discrepancy point cannot fix a slope
    fit = fit_decay_exponent if len(hs) >= 2 else (lambda h, v: math.nan)
    return AssumptionReport(
        p=p.label,
        cells=cells,
        z_norm2=acc[0].tolist(),
        y_norm2=acc[1].tolist(),
        z_discrepancy=acc[2, 1:].tolist(),
        y_discrepancy=acc[3, 1:].tolist(),
        r=fit(hs, acc[2, 1:]),
        nu=fit(hs, acc[3, 1:]),
        instances=len(instances),
    )


# -- best tolerance search ---------------------------------------------------------------------


def reference_values(source: Callable[[GridSpec], ScalarField], cells: Sequence[int], p,
                     eps: float = 1e-10, max_iters: int = 500_000) -> list[float]:
    """Tight prox-PDHG optima per level (each level warm-started from the previous one)."""
    sched = make_schedule(cells[-1], len(cells), eps, alpha=0.0)
    rep = ml_run(source, p, sched, "pdhg", max_iters=max_iters)
    return [s.distance for s in rep.stages]


def satisfies_grid_error_condition(values: Sequence[float], refs: Sequence[float]) -> bool:
    """``|f* - f^K| < |f*_l - f*_{l-1}|`` on every level after the first."""
    return all(
        abs(refs[l] - values[l]) < abs(refs[l] - refs[l - 1]) for l in range(1, len(refs))
    )


@dataclass
class ToleranceSearch:
    best: float
    passed: list[float] = field(default_factory=list)
    level_values: dict = field(default_factory=dict)
    references: list[float] = field(default_factory=list)


def find_best_tolerance(
    source: Callable[[GridSpec], ScalarField],
    cells: int,
    levels: int,
    p,
    alpha: float,
    candidates: Iterable[float],
    inner: str = "pdhg",
    references: Optional[Sequence[float]] = None,
    max_iters: int = 200_000,
) -> ToleranceSearch:
    """Largest finest-level tolerance whose cascadic run meets the grid-error condition.

    Raises:
        ValueError: if no candidate passes (or none is given).
    """
    candidates = sorted(set(float(c) for c in candidates), reverse=True)
    if not candidates:
        raise ValueError("empty candidate set")
    sched0 = make_schedule(cells, levels, 1.0, alpha)
    grid_cells = [g.cells_per_side for g in sched0.grids]
    refs = list(references) if references is not None else reference_values(source, grid_cells, p)
    result = ToleranceSearch(best=math.nan, references=refs)
    for eps in candidates:
        sched = make_schedule(cells, levels, eps, alpha)
        rep = ml_run(source, p, sched, inner, max_iters=max_iters)
        vals = [s.distance for s in rep.stages]
        result.level_values[eps] = vals
        if satisfies_grid_error_condition(vals, refs):
            result.passed.append(eps)
            result.best = eps
            break
    if math.isnan(result.best):
        raise ValueError("no candidate tolerance satisfies the grid-error condition")
    return result


__all__ = [
    "AssumptionReport",
    "ToleranceSearch",
    "find_best_tolerance",
    "fit_decay_exponent",
    "min_cost_transport",
    "reference_values",
    "satisfies_grid_error_condition",
    "validate_assumptions",
    "w1_1d_cdf",
    "w1_exact_p1",
    "w1_path_p1",
]

"""Prox-PDHG on the flux ``m`` and the dual flux ``varphi`` (the potential's gradient).

One step::

    m+    = P(m - mu varphi_bar)          P: projection onto {A m = rho}
    vphi+ = Proj_q(vphi + tau m+)         pointwise onto the unit q-ball
    vbar+ = 2 vphi+ - vphi

stopped when ``G = ||dm||^2 / mu + ||dvphi||^2 / tau + 2 <dvphi, dm>`` falls
below the tolerance. The Kantorovich potential is recovered at the end by a
Neumann Poisson solve.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .grid import (
    FluxField,
    ScalarField,
    check_same_grid,
    div_nodes,
    dual_value,
    inner_h,
    norm_L2,
    primal_value,
)
from .poisson import check_compatible, project_affine, project_affine_nodes, solve_nodes
from .prox import PNorm, qball_components
from .report import LevelReport, SolveReport
from .solver_cp import SolverParams

log = logging.getLogger(__name__)


def pdhg_step_sizes(step_mode: str = "practical") -> tuple[float, float]:
    return (1.0, 1.0) if step_mode == "practical" else (0.5, 0.5)


@dataclass(frozen=True, eq=False)
class PDHGState:
    m: FluxField
    dual_flux: FluxField
    dual_bar: FluxField
    mu: float
    tau: float
    k: int = 0

    @classmethod
    def initial(cls, grid, mu, tau, m=None, dual_flux=None) -> PDHGState:
        m = FluxField.zeros(grid) if m is None else m
        dual_flux = FluxField.zeros(grid) if dual_flux is None else dual_flux
        check_same_grid(m, dual_flux)
        return cls(m, dual_flux, dual_flux, mu, tau, 0)


def pdhg_step(state: PDHGState, rho: ScalarField, p) -> PDHGState:
    q = PNorm.of(p).q
    m = project_affine(state.m - state.mu * state.dual_bar, rho)
    vx, vy = (state.dual_flux + state.tau * m).components()
    vx, vy = qball_components(vx, vy, q)
    dual = FluxField.from_components(m.grid, vx, vy)
    return replace(
        state,
        m=m,
        dual_flux=dual,
        dual_bar=2.0 * dual - state.dual_flux,
        k=state.k + 1,
    )


def pdhg_residual(curr: PDHGState, prev: PDHGState) -> float:
    dm = curr.m - prev.m
    dv = curr.dual_flux - prev.dual_flux
    return norm_L2(dm) ** 2 / curr.mu + norm_L2(dv) ** 2 / curr.tau + 2.0 * inner_h(dv, dm)


def recover_potential(dual_flux: FluxField) -> ScalarField:
    """Zero-mean ``phi`` with ``A A* phi = A varphi``."""
    grid = dual_flux.grid
    vx, vy = dual_flux.components()
    b = div_nodes(vx, vy, grid.step)
    return ScalarField(grid, solve_nodes(b, grid.cells_per_side))


def _iterate(mx, my, vx, vy, rho, cells, mu, tau, q, tol, max_iters, history, callback):
    area = 1.0 / cells**2
    bx, by = vx, vy
    fpr = np.inf
    k = 0
    while k < max_iters:
        nx, ny = project_affine_nodes(mx - mu * bx, my - mu * by, rho, cells)
        wx, wy = qball_components(vx + tau * nx, vy + tau * ny, q)
        dmx, dmy = nx - mx, ny - my
        dvx, dvy = wx - vx, wy - vy
        fpr = area * (
            (np.vdot(dmx, dmx) + np.vdot(dmy, dmy)) / mu
            + (np.vdot(dvx, dvx) + np.vdot(dvy, dvy)) / tau
            + 2.0 * (np.vdot(dvx, dmx) + np.vdot(dvy, dmy))
        )
        bx, by = wx + dvx, wy + dvy
        mx, my, vx, vy = nx, ny, wx, wy
        k += 1
        if history is not None:
            history.append(float(fpr))
        if callback is not None:
            callback(k, fpr)
        if fpr < tol:
            break
    return mx, my, vx, vy, k, float(fpr)


def pdhg_run(
    rho: ScalarField,
    p=None,
    params: Optional[SolverParams] = None,
    init_m: Optional[FluxField] = None,
    init_dual: Optional[FluxField] = None,
    record_history: bool = True,
    callback: Optional[Callable[[int, float], None]] = None,
) -> SolveReport:
    """Run prox-PDHG until the residual drops below ``params.tol``.

    The reported distance is the primal cost of the final flux; ``dual_value``
    pairs the recovered potential with ``rho`` and serves as a certificate.
    """
    params = params or SolverParams()
    if p is not None:
        params = replace(params, p=PNorm.of(p))
    check_compatible(rho.values, rtol=1e-12)
    grid = rho.grid
    mu, tau = pdhg_step_sizes(params.step_mode)
    m0 = init_m if init_m is not None else FluxField.zeros(grid)
    v0 = init_dual if init_dual is not None else FluxField.zeros(grid)
    check_same_grid(m0, rho)
    check_same_grid(v0, rho)

    mx, my = m0.components()
    vx, vy = v0.components()
    history = [] if record_history else None
    t0 = time.perf_counter()
    mx, my, vx, vy, k, fpr = _iterate(
        mx, my, vx, vy, rho.values, grid.cells_per_side, mu, tau,
        params.p.q, params.tol, params.max_iters, history, callback,
    )
    converged = fpr < params.tol
    if not converged:
        log.warning("pdhg: max_iters=%d reached on N=%d (G=%.3e, tol=%.3e)",
                    params.max_iters, grid.cells_per_side, fpr, params.tol)

    m = FluxField.from_components(grid, mx, my)
    dual = FluxField.from_components(grid, vx, vy)
    potential = recover_potential(dual)
    seconds = time.perf_counter() - t0
    return SolveReport(
        distance=primal_value(m, params.p),
        dual_value=dual_value(potential, rho),
        p=params.p.label,
        algo="pdhg",
        flux=m,
        potential=potential,
        dual_flux=dual,
        levels=[LevelReport(grid.cells_per_side, params.tol, k, fpr, seconds, converged)],
        residual_history=history or [],
        total_seconds=seconds,
    )

"""Primal-dual iteration on the flux ``m`` and the multiplier ``phi``.

One step, with step sizes ``mu`` and ``tau``::

    m+   = shrink(m - mu A* phi, mu, p)         (pointwise over nodes)
    mbar = 2 m+ - m
    phi+ = phi + tau (A mbar - rho)

and the run stops once the fixed-point residual

    R = ||dm||^2 / mu + ||dphi||^2 / tau - 2 <dphi, A dm>

drops below the tolerance (all norms and pairings weighted by ``h^2``).
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
    divergence,
    dual_value,
    grad_nodes,
    inner_h,
    norm_L2,
    operator_norm_bound,
    primal_value,
)
from .poisson import check_compatible
from .prox import PNorm, shrink_components
from .report import LevelReport, SolveReport

log = logging.getLogger(__name__)

STEP_MODES = ("practical", "safe")


@dataclass(frozen=True)
class SolverParams:
    """Stopping rule and step-size policy shared by both single-level solvers.

    ``step_mode="practical"`` takes the larger steps that work well in practice;
    ``"safe"`` halves them so that the convergence condition holds strictly.
    """

    p: PNorm = PNorm.L1
    tol: float = 1e-6
    max_iters: int = 100_000
    step_mode: str = "practical"

    def __post_init__(self):
        object.__setattr__(self, "p", PNorm.of(self.p))
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_mode not in STEP_MODES:
            raise ValueError(f"step_mode must be one of {STEP_MODES}, got {self.step_mode!r}")


def cp_step_sizes(grid, step_mode: str = "practical") -> tuple[float, float]:
    bound = operator_norm_bound(grid)
    s = 1.0 / bound if step_mode == "practical" else 0.5 / bound
    return s, s


@dataclass(frozen=True, eq=False)
class CPState:
    m: FluxField
    phi: ScalarField
    m_prev: FluxField
    mu: float
    tau: float
    k: int = 0

    @classmethod
    def initial(cls, grid, mu, tau, m=None, phi=None) -> CPState:
        m = FluxField.zeros(grid) if m is None else m
        phi = ScalarField.zeros(grid) if phi is None else phi
        check_same_grid(m, phi)
        return cls(m, phi, m, mu, tau, 0)


def cp_step(state: CPState, rho: ScalarField, p) -> CPState:
    """Advance the iteration by one step."""
    grid = state.m.grid
    h = grid.step
    mx, my = state.m.components()
    gx, gy = grad_nodes(state.phi.values, h)
    nx, ny = shrink_components(mx - state.mu * gx, my - state.mu * gy, state.mu, p)
    d_bar = div_nodes(2.0 * nx - mx, 2.0 * ny - my, h)
    phi = state.phi.values + state.tau * (d_bar - rho.values)
    return replace(
        state,
        m=FluxField.from_components(grid, nx, ny),
        phi=ScalarField(grid, phi),
        m_prev=state.m,
        k=state.k + 1,
    )


def cp_residual(curr: CPState, prev: CPState) -> float:
    """Fixed-point residual between consecutive states."""
    dm = curr.m - prev.m
    dphi = curr.phi - prev.phi
    return (
        norm_L2(dm) ** 2 / curr.mu
        + norm_L2(dphi) ** 2 / curr.tau
        - 2.0 * inner_h(dphi, divergence(dm))
    )


def _iterate(mx, my, phi, rho, h, mu, tau, p, tol, max_iters, history, callback):
    area = h * h
    d_old = div_nodes(mx, my, h)
    fpr = np.inf
    k = 0
    while k < max_iters:
        gx, gy = grad_nodes(phi, h)
        gx *= -mu
        gy *= -mu
        gx += mx
        gy += my
        nx, ny = shrink_components(gx, gy, mu, p)
        d_new = div_nodes(nx, ny, h)
        dd = d_new - d_old
        dphi = tau * (dd + d_new - rho)
        dmx = nx - mx
        dmy = ny - my
        fpr = area * (
            (np.vdot(dmx, dmx) + np.vdot(dmy, dmy)) / mu
            + np.vdot(dphi, dphi) / tau
            - 2.0 * np.vdot(dphi, dd)
        )
        phi = phi + dphi
        mx, my, d_old = nx, ny, d_new
        k += 1
        if history is not None:
            history.append(float(fpr))
        if callback is not None:
            callback(k, fpr)
        if fpr < tol:
            break
    return mx, my, phi, k, float(fpr)


def cp_run(
    rho: ScalarField,
    p=None,
    params: Optional[SolverParams] = None,
    init_m: Optional[FluxField] = None,
    init_phi: Optional[ScalarField] = None,
    record_history: bool = True,
    callback: Optional[Callable[[int, float], None]] = None,
) -> SolveReport:
    """Run the primal-dual iteration until the residual drops below ``params.tol``.

    At least one step is always taken. If ``max_iters`` is exhausted the report
    is still returned with ``converged`` set to False on its level entry.
    """
    params = params or SolverParams()
    if p is not None:
        params = replace(params, p=PNorm.of(p))
    check_compatible(rho.values, rtol=1e-12)
    grid = rho.grid
    mu, tau = cp_step_sizes(grid, params.step_mode)
    m0 = init_m if init_m is not None else FluxField.zeros(grid)
    phi0 = init_phi if init_phi is not None else ScalarField.zeros(grid)
    check_same_grid(m0, rho)
    check_same_grid(phi0, rho)

    mx, my = m0.components()
    history = [] if record_history else None
    t0 = time.perf_counter()
    mx, my, phi, k, fpr = _iterate(
        mx, my, phi0.values.copy(), rho.values, grid.step, mu, tau,
        params.p, params.tol, params.max_iters, history, callback,
    )
    seconds = time.perf_counter() - t0
    converged = fpr < params.tol
    if not converged:
        log.warning("cp: max_iters=%d reached on N=%d (R=%.3e, tol=%.3e)",
                    params.max_iters, grid.cells_per_side, fpr, params.tol)

    m = FluxField.from_components(grid, mx, my)
    multiplier = ScalarField(grid, phi)
    potential = -multiplier
    return SolveReport(
        distance=primal_value(m, params.p),
        dual_value=dual_value(potential, rho),
        p=params.p.label,
        algo="cp",
        flux=m,
        potential=potential,
        multiplier=multiplier,
        levels=[LevelReport(grid.cells_per_side, params.tol, k, fpr, seconds, converged)],
        residual_history=history or [],
        total_seconds=seconds,
    )


__all__ = [
    "CPState",
    "SolverParams",
    "cp_residual",
    "cp_run",
    "cp_step",
    "cp_step_sizes",
]

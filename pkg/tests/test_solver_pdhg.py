import numpy as np
import pytest

from helpers import dirac_source, random_flux, random_scalar, random_source
from w1mg.grid import (
    FluxField,
    GridSpec,
    SourceField,
    adjoint,
    divergence,
    inner_h,
    norm_L2,
    pointwise_norm,
    primal_value,
)
from w1mg.oracle import w1_exact_p1
from w1mg.poisson import project_affine
from w1mg.prox import PNorm
from w1mg.solver_cp import SolverParams
from w1mg.solver_pdhg import (
    PDHGState,
    pdhg_residual,
    pdhg_run,
    pdhg_step,
    pdhg_step_sizes,
    recover_potential,
)


def test_zero_is_fixed_point():
    g = GridSpec(4)
    rho = SourceField(g, np.zeros(g.node_shape))
    s1 = pdhg_step(PDHGState.initial(g, 1.0, 1.0), rho, 2)
    assert norm_L2(s1.m) == 0 and norm_L2(s1.dual_flux) == 0 and norm_L2(s1.dual_bar) == 0


def test_first_step_is_minimal_norm_flux(rng):
    rho = random_source(8, rng)
    s1 = pdhg_step(PDHGState.initial(rho.grid, 1.0, 1.0), rho, 1)
    expected = project_affine(FluxField.zeros(rho.grid), rho)
    assert norm_L2(s1.m - expected) == 0
    # minimal-norm feasible flux is a gradient field
    psi = recover_potential(s1.m)
    assert norm_L2(adjoint(psi) - s1.m) <= 1e-10 * norm_L2(s1.m)


def test_residual_examples(rng):
    m, v = random_flux(4, rng), random_flux(4, rng)
    a = PDHGState(m, v, v, 0.5, 0.5)
    assert pdhg_residual(a, a) == 0.0
    dm = random_flux(4, rng)
    b = PDHGState(m + dm, v - dm, v, 0.5, 0.5)
    assert pdhg_residual(b, a) == pytest.approx(2 * norm_L2(dm) ** 2, rel=1e-12)


def test_residual_nonnegative_half_steps(rng):
    for _ in range(200):
        a = PDHGState(random_flux(4, rng), random_flux(4, rng), FluxField.zeros(GridSpec(4)), 0.5, 0.5)
        b = PDHGState(random_flux(4, rng), random_flux(4, rng), FluxField.zeros(GridSpec(4)), 0.5, 0.5)
        assert pdhg_residual(b, a) >= 0


@pytest.mark.parametrize("p", [1, 2, "inf"])
def test_iterates_stay_feasible(p, rng):
    rho = random_source(8, rng)
    q = PNorm.of(p).q
    state = PDHGState.initial(rho.grid, 1.0, 1.0)
    for _ in range(60):
        nxt = pdhg_step(state, rho, p)
        assert norm_L2(divergence(nxt.m) - rho) <= 1e-9 * (1 + norm_L2(rho))
        vx, vy = nxt.dual_flux.components()
        assert pointwise_norm(vx, vy, q).max() <= 1 + 1e-12
        assert primal_value(nxt.m, p) - inner_h(nxt.dual_flux, nxt.m) >= -1e-8
        assert pdhg_residual(nxt, state) >= 0
        state = nxt


@pytest.mark.parametrize("p", [1, 2, "inf"])
def test_step_loop_matches_run(p, rng):
    rho = random_source(6, rng)
    rep = pdhg_run(rho, p, SolverParams(tol=1e-300, max_iters=30))
    state = PDHGState.initial(rho.grid, *pdhg_step_sizes())
    hist = []
    for _ in range(30):
        nxt = pdhg_step(state, rho, p)
        hist.append(pdhg_residual(nxt, state))
        state = nxt
    np.testing.assert_allclose(rep.flux.x_edges, state.m.x_edges, atol=1e-12)
    np.testing.assert_allclose(rep.dual_flux.y_edges, state.dual_flux.y_edges, atol=1e-12)
    np.testing.assert_allclose(rep.residual_history, hist, rtol=1e-8, atol=1e-14)


def test_recover_potential_examples(rng):
    g = GridSpec(8)
    assert norm_L2(recover_potential(FluxField.zeros(g))) == 0
    psi = random_scalar(8, rng)
    phi = recover_potential(adjoint(psi))
    assert norm_L2(phi - (psi - type(psi).constant(g, psi.mean()))) <= 1e-9


def test_identical_densities():
    g = GridSpec(8)
    rep = pdhg_run(SourceField(g, np.zeros(g.node_shape)), 1, SolverParams(tol=1e-9))
    assert rep.distance == 0.0 and rep.iterations[0] <= 2


@pytest.mark.parametrize("p", [1, 2, "inf"])
def test_two_dirac_distance(p):
    rep = pdhg_run(dirac_source(8), p, SolverParams(tol=1e-8, max_iters=100_000))
    assert rep.converged
    assert rep.distance == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("seed", range(3))
def test_matches_min_cost_flow(seed):
    rho = random_source(8, np.random.default_rng(100 + seed))
    rep = pdhg_run(rho, 1, SolverParams(tol=1e-9, max_iters=200_000), record_history=False)
    assert rep.distance == pytest.approx(w1_exact_p1(rho), rel=1e-4)


def test_recovered_potential_is_dual_feasible(rng):
    rho = random_source(16, rng)
    rep = pdhg_run(rho, 1, SolverParams(tol=1e-9, max_iters=200_000), record_history=False)
    gx, gy = adjoint(rep.potential).components()
    assert np.abs(np.concatenate([gx.ravel(), gy.ravel()])).max() <= 1 + 1e-2
    assert abs(rep.gap) <= 1e-3 * rep.distance


def test_safe_steps_residual_nonnegative(rng):
    rep = pdhg_run(random_source(16, rng), 2, SolverParams(tol=1e-300, max_iters=300, step_mode="safe"))
    assert min(rep.residual_history) >= 0

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import random_flux, random_scalar, random_source
from w1mg.grid import FluxField, GridSpec, ScalarField, SourceField, adjoint, divergence, norm_L2
from w1mg.poisson import (
    CompatibilityError,
    laplacian_eigenvalues,
    neumann_poisson_solve,
    project_affine,
)


def _laplacian(phi: ScalarField) -> ScalarField:
    return divergence(adjoint(phi))


def _zero_mean(cells, rng) -> ScalarField:
    b = random_scalar(cells, rng)
    return ScalarField(b.grid, b.values - b.values.mean())


def test_eigenvalues_match_forward_operator():
    # cosine modes are eigenvectors of the node operator A A*
    cells = 6
    g = GridSpec(cells)
    lam = laplacian_eigenvalues(cells)
    x = np.arange(cells + 1)
    for k1 in range(cells + 1):
        for k2 in range(cells + 1):
            mode = np.outer(np.cos(np.pi * k2 * (x + 0.5) / (cells + 1)),
                            np.cos(np.pi * k1 * (x + 0.5) / (cells + 1)))
            out = _laplacian(ScalarField(g, mode)).values
            np.testing.assert_allclose(out, lam[k2, k1] * mode, atol=1e-9 * cells**2)


def test_zero_rhs():
    phi = neumann_poisson_solve(ScalarField.zeros(GridSpec(8)))
    assert not phi.values.any()


def test_incompatible_rhs_rejected():
    with pytest.raises(CompatibilityError):
        neumann_poisson_solve(ScalarField.constant(GridSpec(8), 1.0))


@pytest.mark.parametrize("cells", [4, 8, 16, 33])
def test_residual_and_mean(cells, rng):
    b = _zero_mean(cells, rng)
    phi = neumann_poisson_solve(b)
    assert norm_L2(_laplacian(phi) - b) <= 1e-10 * norm_L2(b)
    assert abs(phi.values.mean()) <= 1e-12


def test_solver_linearity(rng):
    b1, b2 = _zero_mean(8, rng), _zero_mean(8, rng)
    lhs = neumann_poisson_solve(2.5 * b1 - 0.75 * b2)
    rhs = 2.5 * neumann_poisson_solve(b1) - 0.75 * neumann_poisson_solve(b2)
    np.testing.assert_allclose(lhs.values, rhs.values, atol=1e-10)


# -- affine projection -----------------------------------------------------------------------


def test_feasible_point_is_fixed(rng):
    m = random_flux(8, rng)
    rho = SourceField.from_field(divergence(m))
    out = project_affine(m, rho)
    assert norm_L2(out - m) <= 1e-12 * max(1.0, norm_L2(m))


def test_range_of_adjoint_projects_to_zero(rng):
    psi = random_scalar(8, rng)
    out = project_affine(adjoint(psi), SourceField(psi.grid, np.zeros(psi.grid.node_shape)))
    assert norm_L2(out) <= 1e-10 * norm_L2(adjoint(psi))


@pytest.mark.parametrize("cells", [4, 8, 16])
def test_projection_feasible(cells, rng):
    rho = random_source(cells, rng)
    out = project_affine(random_flux(cells, rng), rho)
    assert norm_L2(divergence(out) - rho) <= 1e-10 * (1 + norm_L2(rho))


def test_projection_idempotent(rng):
    rho = random_source(8, rng)
    once = project_affine(random_flux(8, rng), rho)
    twice = project_affine(once, rho)
    assert norm_L2(twice - once) <= 1e-10


def test_projection_is_nearest_feasible_point(rng):
    cells = 8
    rho = random_source(cells, rng)
    m = random_flux(cells, rng)
    proj = project_affine(m, rho)
    base = norm_L2(proj - m)
    zero = SourceField(rho.grid, np.zeros(rho.grid.node_shape))
    for _ in range(100):
        # divergence-free perturbation keeps feasibility
        null = project_affine(random_flux(cells, rng), zero)
        other = proj + float(rng.uniform(0.01, 1.0)) * null
        assert norm_L2(divergence(other) - rho) <= 1e-9 * (1 + norm_L2(rho))
        assert base <= norm_L2(other - m) + 1e-9


def test_projection_rejects_incompatible_rho():
    g = GridSpec(4)
    with pytest.raises(CompatibilityError):
        project_affine(FluxField.zeros(g), ScalarField.constant(g, 1.0))


@given(st.integers(2, 24), st.integers(0, 2**32 - 1))
def test_poisson_residual_property(cells, seed):
    b = _zero_mean(cells, np.random.default_rng(seed))
    phi = neumann_poisson_solve(b)
    assert norm_L2(_laplacian(phi) - b) <= 1e-10 * norm_L2(b)

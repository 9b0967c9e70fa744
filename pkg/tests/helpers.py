"""Shared instance builders for the test suite."""

import numpy as np

from w1mg.grid import FluxField, GridSpec, ScalarField, SourceField


def random_source(cells: int, rng: np.random.Generator) -> SourceField:
    """Zero-sum field whose positive part has unit mass."""
    grid = GridSpec(cells)
    d = rng.standard_normal(grid.node_shape)
    d -= d.mean()
    d /= np.clip(d, 0, None).sum() * grid.cell_area
    return SourceField(grid, d)


def random_scalar(cells: int, rng: np.random.Generator) -> ScalarField:
    grid = GridSpec(cells)
    return ScalarField(grid, rng.standard_normal(grid.node_shape))


def random_flux(cells: int, rng: np.random.Generator) -> FluxField:
    grid = GridSpec(cells)
    return FluxField(grid, rng.standard_normal(grid.x_edge_shape), rng.standard_normal(grid.y_edge_shape))


def dirac_source(cells: int, a=(0, 0), b=None) -> SourceField:
    """Unit point mass at node ``a`` minus one at node ``b``; nodes are ``(i1, i2)`` indices."""
    grid = GridSpec(cells)
    b = (cells, 0) if b is None else b
    d = np.zeros(grid.node_shape)
    d[a[1], a[0]] += 1.0 / grid.cell_area
    d[b[1], b[0]] -= 1.0 / grid.cell_area
    return SourceField(grid, d)


# (criterion number, verdict line, detail lines), filled by test_acceptance.py
ACCEPTANCE_LINES: list = []

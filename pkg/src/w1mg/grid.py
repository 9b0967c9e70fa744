"""Uniform node grid on the unit square, node/edge fields and the discrete divergence.

Arrays are stored row-major with x1 varying fastest: a node array has shape
``(N + 1, N + 1)`` and is indexed ``[j, i]`` for the node ``(i h, j h)``.
The x-edge ``[j, i]`` joins nodes ``(i, j)`` and ``(i + 1, j)``; the y-edge
``[j, i]`` joins ``(i, j)`` and ``(i, j + 1)``.

Pointwise maps (shrinkage, ball projections) need both flux components at a
node. For those the edge arrays are padded to node shape with a zero column
(x) or zero row (y); those padded entries are the absent boundary components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .prox import PNorm

DIM = 2


class GridMismatchError(ValueError):
    """Raised when fields defined on different grids are combined."""


@dataclass(frozen=True)
class GridSpec:
    """Square grid with ``cells_per_side`` cells on ``[0, 1]^2``."""

    cells_per_side: int

    def __post_init__(self):
        n = self.cells_per_side
        if isinstance(n, bool) or int(n) != n or n < 1:
            raise ValueError(f"cells_per_side must be a positive integer, got {n!r}")
        object.__setattr__(self, "cells_per_side", int(n))

    @property
    def step(self) -> float:
        return 1.0 / self.cells_per_side

    @property
    def nodes_per_side(self) -> int:
        return self.cells_per_side + 1

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.nodes_per_side, self.nodes_per_side)

    @property
    def x_edge_shape(self) -> tuple[int, int]:
        return (self.nodes_per_side, self.cells_per_side)

    @property
    def y_edge_shape(self) -> tuple[int, int]:
        return (self.cells_per_side, self.nodes_per_side)

    @property
    def cell_area(self) -> float:
        return self.step**DIM

    def coarsened(self) -> GridSpec:
        if self.cells_per_side % 2:
            raise ValueError(f"grid with N={self.cells_per_side} cannot be coarsened")
        return GridSpec(self.cells_per_side // 2)

    def refined(self) -> GridSpec:
        return GridSpec(2 * self.cells_per_side)

    def coordinates(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return np.arange(self.nodes_per_side) * self.step


def _as_array(values, shape, name) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.size != shape[0] * shape[1]:
        raise ValueError(f"{name}: expected {shape[0] * shape[1]} entries, got {arr.size}")
    return arr.reshape(shape)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per node."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _as_array(self.values, self.grid.node_shape, "ScalarField"))

    @classmethod
    def zeros(cls, grid: GridSpec) -> ScalarField:
        return cls(grid, np.zeros(grid.node_shape))

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> ScalarField:
        return cls(grid, np.full(grid.node_shape, float(value)))

    def __add__(self, other: ScalarField) -> ScalarField:
        check_same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: ScalarField) -> ScalarField:
        check_same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, scale: float) -> ScalarField:
        return ScalarField(self.grid, self.values * scale)

    __rmul__ = __mul__

    def __neg__(self) -> ScalarField:
        return ScalarField(self.grid, -self.values)

    def total(self) -> float:
        return float(self.values.sum())

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True, eq=False)
class SourceField(ScalarField):
    """A zero-total node field, the right-hand side of the divergence constraint."""

    def __post_init__(self):
        super().__post_init__()
        total = abs(self.values.sum())
        if total > 1e-12 * np.abs(self.values).sum():
            raise ValueError(f"source field is not zero-sum (|sum| = {total:.3e})")

    @classmethod
    def from_field(cls, field_: ScalarField) -> SourceField:
        return cls(field_.grid, field_.values)


@dataclass(frozen=True, eq=False)
class FluxField:
    """Edge-based vector field; boundary-normal components on the top/right sides are absent."""

    grid: GridSpec
    x_edges: np.ndarray = field(repr=False)
    y_edges: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "x_edges", _as_array(self.x_edges, self.grid.x_edge_shape, "x_edges"))
        object.__setattr__(self, "y_edges", _as_array(self.y_edges, self.grid.y_edge_shape, "y_edges"))

    @classmethod
    def zeros(cls, grid: GridSpec) -> FluxField:
        return cls(grid, np.zeros(grid.x_edge_shape), np.zeros(grid.y_edge_shape))

    @classmethod
    def from_components(cls, grid: GridSpec, mx: np.ndarray, my: np.ndarray) -> FluxField:
        """Build from node-shaped component arrays, dropping the absent boundary entries."""
        return cls(grid, mx[:, :-1], my[:-1, :])

    def components(self) -> tuple[np.ndarray, np.ndarray]:
        """Node-shaped copies of both components, zero where the edge is absent."""
        return pad_x(self.x_edges), pad_y(self.y_edges)

    def __add__(self, other: FluxField) -> FluxField:
        check_same_grid(self, other)
        return FluxField(self.grid, self.x_edges + other.x_edges, self.y_edges + other.y_edges)

    def __sub__(self, other: FluxField) -> FluxField:
        check_same_grid(self, other)
        return FluxField(self.grid, self.x_edges - other.x_edges, self.y_edges - other.y_edges)

    def __mul__(self, scale: float) -> FluxField:
        return FluxField(self.grid, self.x_edges * scale, self.y_edges * scale)

    __rmul__ = __mul__

    def __neg__(self) -> FluxField:
        return FluxField(self.grid, -self.x_edges, -self.y_edges)


def check_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: N={a.grid.cells_per_side} vs N={b.grid.cells_per_side}")


def pad_x(x_edges: np.ndarray) -> np.ndarray:
    out = np.zeros((x_edges.shape[0], x_edges.shape[1] + 1))
    out[:, :-1] = x_edges
    return out


def pad_y(y_edges: np.ndarray) -> np.ndarray:
    out = np.zeros((y_edges.shape[0] + 1, y_edges.shape[1]))
    out[:-1, :] = y_edges
    return out


# Array kernels on node-shaped components. ``mx[:, -1]`` and ``my[-1, :]`` must be 0.


def div_nodes(mx: np.ndarray, my: np.ndarray, h: float) -> np.ndarray:
    out = mx + my
    out[:, 1:] -= mx[:, :-1]
    out[1:, :] -= my[:-1, :]
    out /= h
    return out


def grad_nodes(phi: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Adjoint of :func:`div_nodes`: ``(phi(x) - phi(x + h e_i)) / h`` on live edges."""
    gx = np.zeros_like(phi)
    gy = np.zeros_like(phi)
    np.subtract(phi[:, :-1], phi[:, 1:], out=gx[:, :-1])
    np.subtract(phi[:-1, :], phi[1:, :], out=gy[:-1, :])
    gx /= h
    gy /= h
    return gx, gy


def divergence(m: FluxField) -> ScalarField:
    """Discrete divergence with zero-flux boundary."""
    h = m.grid.step
    mx, my = m.components()
    return ScalarField(m.grid, div_nodes(mx, my, h))


def adjoint(phi: ScalarField) -> FluxField:
    """Exact adjoint of :func:`divergence` (a negative forward difference)."""
    gx, gy = grad_nodes(phi.values, phi.grid.step)
    return FluxField.from_components(phi.grid, gx, gy)


def _pair_arrays(a, b) -> tuple[list[np.ndarray], list[np.ndarray]]:
    check_same_grid(a, b)
    if isinstance(a, FluxField) and isinstance(b, FluxField):
        return [a.x_edges, a.y_edges], [b.x_edges, b.y_edges]
    if isinstance(a, FluxField) or isinstance(b, FluxField):
        raise TypeError("cannot pair a scalar field with a flux field")
    return [a.values], [b.values]


def inner_plain(a, b) -> float:
    xs, ys = _pair_arrays(a, b)
    return float(sum(np.vdot(x, y) for x, y in zip(xs, ys)))


def inner_h(a, b) -> float:
    """Inner product weighted by the cell area ``h^2``."""
    return inner_plain(a, b) * a.grid.cell_area


def norm_plain(a) -> float:
    return math.sqrt(max(inner_plain(a, a), 0.0))


def norm_L2(a) -> float:
    return math.sqrt(max(inner_h(a, a), 0.0))


def operator_norm_bound(grid: GridSpec) -> float:
    """Gershgorin bound ``2 sqrt(d) / h`` on the norm of the divergence."""
    return 2.0 * math.sqrt(DIM) / grid.step


def pointwise_norm(mx: np.ndarray, my: np.ndarray, p: float) -> np.ndarray:
    if p == 1:
        return np.abs(mx) + np.abs(my)
    if p == 2:
        return np.hypot(mx, my)
    if p == math.inf:
        return np.maximum(np.abs(mx), np.abs(my))
    raise ValueError(f"unsupported norm exponent {p!r}")


def primal_value(m: FluxField, p) -> float:
    """Transport cost ``sum_x ||m(x)||_p h^2``."""
    mx, my = m.components()
    return float(pointwise_norm(mx, my, PNorm.of(p).p).sum() * m.grid.cell_area)


def dual_value(phi: ScalarField, rho: ScalarField) -> float:
    return inner_h(phi, rho)

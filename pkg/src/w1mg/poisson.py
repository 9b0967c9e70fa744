"""Spectral solver for the Neumann node Laplacian ``div o adjoint`` and the affine projection.

The operator ``A A*`` on the ``(N + 1)^2`` node grid is the 5-point Laplacian
with reflecting boundary rows, diagonalized by the orthonormal type-II cosine
transform along each axis. Along one axis with ``n = N + 1`` nodes the
eigenvalue of mode ``k`` is ``(2 - 2 cos(pi k / n)) / h^2``.
"""

from __future__ import annotations

import functools

import numpy as np
import scipy.fft

from .grid import FluxField, ScalarField, div_nodes, grad_nodes

COMPAT_RTOL = 1e-10


class CompatibilityError(ValueError):
    """Right-hand side of the Neumann problem does not sum to zero."""


@functools.lru_cache(maxsize=32)
def _inverse_symbol(cells: int) -> np.ndarray:
    n = cells + 1
    h = 1.0 / cells
    lam = (2.0 - 2.0 * np.cos(np.pi * np.arange(n) / n)) / h**2
    symbol = lam[:, None] + lam[None, :]
    symbol[0, 0] = 1.0
    inv = 1.0 / symbol
    inv[0, 0] = 0.0
    inv.setflags(write=False)
    return inv


def laplacian_eigenvalues(cells: int) -> np.ndarray:
    """Eigenvalues of ``A A*`` indexed by cosine mode ``[k2, k1]``."""
    n = cells + 1
    h = 1.0 / cells
    lam = (2.0 - 2.0 * np.cos(np.pi * np.arange(n) / n)) / h**2
    return lam[:, None] + lam[None, :]


def check_compatible(values: np.ndarray, rtol: float = COMPAT_RTOL) -> None:
    total = abs(float(values.sum()))
    if total > rtol * float(np.abs(values).sum()):
        raise CompatibilityError(f"right-hand side has nonzero total {total:.3e}")


def solve_nodes(b: np.ndarray, cells: int) -> np.ndarray:
    """Zero-mean solution of ``A A* phi = b``; the constant mode of ``b`` is discarded."""
    coef = scipy.fft.dctn(b, type=2, norm="ortho")
    coef *= _inverse_symbol(cells)
    return scipy.fft.idctn(coef, type=2, norm="ortho")


def neumann_poisson_solve(b: ScalarField) -> ScalarField:
    """Solve ``divergence(adjoint(phi)) = b`` for the zero-mean ``phi``.

    Raises:
        CompatibilityError: if ``b`` does not sum to zero.
    """
    check_compatible(b.values)
    return ScalarField(b.grid, solve_nodes(b.values, b.grid.cells_per_side))


def project_affine_nodes(mx, my, rho: np.ndarray, cells: int) -> tuple[np.ndarray, np.ndarray]:
    h = 1.0 / cells
    psi = solve_nodes(div_nodes(mx, my, h) - rho, cells)
    gx, gy = grad_nodes(psi, h)
    return mx - gx, my - gy


def project_affine(m: FluxField, rho: ScalarField) -> FluxField:
    """Euclidean projection of ``m`` onto ``{m : divergence(m) = rho}``."""
    check_compatible(rho.values)
    mx, my = m.components()
    px, py = project_affine_nodes(mx, my, rho.values, m.grid.cells_per_side)
    return FluxField.from_components(m.grid, px, py)


__all__ = [
    "CompatibilityError",
    "laplacian_eigenvalues",
    "neumann_poisson_solve",
    "project_affine",
    "solve_nodes",
]

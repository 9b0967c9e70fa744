"""Density images, per-grid discretization and synthetic test instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from ..grid import GridSpec, ScalarField, SourceField

MASS_RTOL = 1e-9


class InputError(ValueError):
    """Malformed or unusable input density."""


@dataclass(frozen=True, eq=False)
class DensityImage:
    """Nonnegative pixel intensities; row index runs along x2, column index along x1."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float)
        if px.ndim != 2 or px.size == 0:
            raise InputError(f"density image must be a non-empty 2D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise InputError("density image contains non-finite values")
        if px.min() < 0:
            raise InputError("density image has negative pixels")
        if not px.max() > 0:
            raise InputError("density image has no positive pixel")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def is_square(self) -> bool:
        return self.width == self.height


def cells_for_image(size: int) -> int:
    """Finest grid for an image with ``size`` pixels per side.

    Images of ``2^k + 1`` pixels are read as node samples (``N = size - 1``);
    any other size gets ``N = size`` cells.
    """
    if size < 2:
        raise InputError("images need at least 2 pixels per side")
    n = size - 1
    return n if n & (n - 1) == 0 else size


def _linear_weights(n_src: int, targets: np.ndarray) -> np.ndarray:
    """Rows hold 1D linear-interpolation weights from ``n_src`` samples spread over [0, 1]."""
    w = np.zeros((targets.size, n_src))
    if n_src == 1:
        w[:, 0] = 1.0
        return w
    pos = np.clip(targets, 0.0, 1.0) * (n_src - 1)
    lo = np.minimum(np.floor(pos).astype(int), n_src - 2)
    frac = pos - lo
    rows = np.arange(targets.size)
    w[rows, lo] = 1.0 - frac
    w[rows, lo + 1] += frac
    return w


def resample(pixels: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Bilinear resampling with the first and last pixel centres on 0 and 1."""
    x = grid.coordinates()
    wy = _linear_weights(pixels.shape[0], x)
    wx = _linear_weights(pixels.shape[1], x)
    return wy @ pixels @ wx.T


def discretize(image: DensityImage, grid: GridSpec) -> ScalarField:
    """Resample onto the grid nodes and scale to unit mass ``sum(rho) h^2 = 1``."""
    if not image.is_square:
        raise InputError(f"density image must be square, got {image.height}x{image.width}")
    values = resample(image.pixels, grid)
    mass = values.sum() * grid.cell_area
    if not mass > 0:
        raise InputError(f"density vanishes on the N={grid.cells_per_side} grid")
    return ScalarField(grid, values / mass)


def make_source(rho0: ScalarField, rho1: ScalarField) -> SourceField:
    """``rho0 - rho1`` with the residual total removed."""
    if rho0.grid != rho1.grid:
        raise InputError("densities live on different grids")
    area = rho0.grid.cell_area
    m0, m1 = rho0.total() * area, rho1.total() * area
    if abs(m0 - m1) > MASS_RTOL * max(abs(m0), abs(m1), 1.0):
        raise InputError(f"mass mismatch: {m0!r} vs {m1!r}")
    diff = rho0.values - rho1.values
    diff -= diff.mean()
    return SourceField(rho0.grid, diff)


def source_for(image0: DensityImage, image1: DensityImage, grid: GridSpec) -> SourceField:
    return make_source(discretize(image0, grid), discretize(image1, grid))


# -- synthetic instances --------------------------------------------------------------

KINDS = ("two_blobs", "annulus_pair", "dirac_pair")


def _coords(size: int) -> tuple[np.ndarray, np.ndarray]:
    t = np.linspace(0.0, 1.0, size)
    return np.meshgrid(t, t, indexing="xy")


def _blob(size, center, sigma, cutoff=4.0) -> np.ndarray:
    x, y = _coords(size)
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2
    out = np.exp(-r2 / (2.0 * sigma**2))
    out[r2 > (cutoff * sigma) ** 2] = 0.0
    return out


def _ring(size, center, radius, width) -> np.ndarray:
    x, y = _coords(size)
    r = np.hypot(x - center[0], y - center[1])
    return np.exp(-((r - radius) ** 2) / (2.0 * width**2))


def synth_instance(
    kind: str,
    cells: int,
    seed: int = 0,
    centers: Optional[tuple] = None,
    sigma: Optional[float] = None,
) -> tuple[DensityImage, DensityImage]:
    """Deterministic pair of density images sampled at the nodes of an ``N``-cell grid.

    Images have ``N + 1`` pixels per side so that :func:`cells_for_image`
    maps them back onto ``N`` cells exactly.

    Args:
        kind: ``"two_blobs"`` (truncated Gaussians), ``"annulus_pair"`` (two
            rings) or ``"dirac_pair"`` (one-pixel masses, corners by default).
        cells: cells per side of the target grid (at least 4).
        seed: seed for random centres and widths.
        centers: optional pair of ``(x1, x2)`` centres overriding the random ones.
        sigma: optional blob/ring width.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown instance kind {kind!r}; expected one of {KINDS}")
    if cells < 4:
        raise ValueError("synthetic instances need at least 4 cells per side")
    size = cells + 1
    rng = np.random.default_rng(seed)

    if kind == "dirac_pair":
        a, b = np.zeros((size, size)), np.zeros((size, size))
        (x0, y0), (x1, y1) = centers if centers is not None else ((0.0, 0.0), (1.0, 0.0))
        a[round(y0 * cells), round(x0 * cells)] = 1.0
        b[round(y1 * cells), round(x1 * cells)] = 1.0
        return DensityImage(a), DensityImage(b)

    if kind == "two_blobs":
        if centers is None:
            centers = tuple(tuple(rng.uniform(0.25, 0.75, size=2)) for _ in range(2))
        widths = (sigma, sigma) if sigma is not None else tuple(rng.uniform(0.07, 0.12, size=2))
        return (DensityImage(_blob(size, centers[0], widths[0])),
                DensityImage(_blob(size, centers[1], widths[1])))

    if centers is None:
        centers = tuple(tuple(rng.uniform(0.3, 0.7, size=2)) for _ in range(2))
    radius = rng.uniform(0.12, 0.2)
    width = sigma if sigma is not None else max(0.02, 1.5 / cells)
    return (DensityImage(_ring(size, centers[0], radius, width)),
            DensityImage(_ring(size, centers[1], radius, width)))


def dotmark_like(cells: int, seed: int = 0, width: float = 0.03) -> tuple[DensityImage, DensityImage]:
    """Pair of textured random images, a stand-in for benchmark photographs.

    ``width`` is the smoothing length in unit-square coordinates, so the
    texture scale does not change with ``cells``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(2):
        noise = gaussian_filter(rng.random((cells, cells)), width * cells, mode="reflect")
        lo, hi = noise.min(), noise.max()
        out.append(DensityImage(255.0 * (noise - lo) / (hi - lo) + 1.0))
    return out[0], out[1]


__all__ = [
    "DensityImage",
    "InputError",
    "KINDS",
    "cells_for_image",
    "discretize",
    "dotmark_like",
    "make_source",
    "resample",
    "source_for",
    "synth_instance",
]

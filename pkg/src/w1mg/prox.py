"""Pointwise proximal maps of ``mu ||.||_p`` and projections onto unit q-balls in R^2.

Every map has a component form (two arrays of equal shape, used by the solvers)
and a vector form taking arrays whose last axis has length 2.
"""

from __future__ import annotations

import enum
import math

import numpy as np


class PNorm(enum.Enum):
    """Ground-metric exponent p together with its conjugate q (1/p + 1/q = 1)."""

    L1 = 1
    L2 = 2
    LINF = math.inf

    @property
    def p(self) -> float:
        return self.value

    @property
    def q(self) -> float:
        return {PNorm.L1: math.inf, PNorm.L2: 2, PNorm.LINF: 1}[self]

    @property
    def label(self) -> str:
        return "inf" if self is PNorm.LINF else str(self.value)

    @classmethod
    def of(cls, p) -> PNorm:
        if isinstance(p, PNorm):
            return p
        if isinstance(p, str):
            key = p.strip().lower()
            if key in ("inf", "infinity", "linf", "max"):
                return cls.LINF
            p = float(key)
        if p == 1:
            return cls.L1
        if p == 2:
            return cls.L2
        if p == math.inf:
            return cls.LINF
        raise ValueError(f"p must be one of 1, 2, inf; got {p!r}")


# -- component kernels ---------------------------------------------------------


def soft_threshold(v: np.ndarray, mu) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - mu, 0.0)


def l1_ball_components(a: np.ndarray, b: np.ndarray, radius) -> tuple[np.ndarray, np.ndarray]:
    """Projection of ``(a, b)`` onto ``{|u1| + |u2| <= radius}``.

    With two entries the sort-and-threshold rule collapses to
    ``theta = max((|a| + |b| - r) / 2, max(|a|, |b|) - r)`` outside the ball.
    """
    aa, ab = np.abs(a), np.abs(b)
    s = aa + ab
    theta = np.maximum(0.5 * (s - radius), np.maximum(aa, ab) - radius)
    theta = np.where(s > radius, theta, 0.0)
    return (np.sign(a) * np.maximum(aa - theta, 0.0), np.sign(b) * np.maximum(ab - theta, 0.0))


def shrink_components(a, b, mu, p) -> tuple[np.ndarray, np.ndarray]:
    p = PNorm.of(p)
    if p is PNorm.L1:
        return soft_threshold(a, mu), soft_threshold(b, mu)
    if p is PNorm.L2:
        norm = np.hypot(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(norm > mu, 1.0 - mu / np.where(norm > 0, norm, 1.0), 0.0)
        return scale * a, scale * b
    # Moreau: prox of mu||.||_inf is the residual of projecting onto the mu-scaled l1 ball.
    pa, pb = l1_ball_components(a, b, mu)
    return a - pa, b - pb


def qball_components(a, b, q) -> tuple[np.ndarray, np.ndarray]:
    """Projection onto the unit ball of ``||.||_q``."""
    if q == math.inf:
        return np.clip(a, -1.0, 1.0), np.clip(b, -1.0, 1.0)
    if q == 2:
        norm = np.hypot(a, b)
        scale = 1.0 / np.maximum(norm, 1.0)
        return scale * a, scale * b
    if q == 1:
        return l1_ball_components(a, b, 1.0)
    raise ValueError(f"q must be one of 1, 2, inf; got {q!r}")


# -- vector forms ----------------------------------------------------------------


def _split(v) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 2:
        raise ValueError(f"expected 2-vectors along the last axis, got shape {v.shape}")
    return v[..., 0], v[..., 1]


def shrink(v, mu: float, p) -> np.ndarray:
    """``argmin_u ||u||_p + ||u - v||^2 / (2 mu)``."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu!r}")
    return np.stack(shrink_components(*_split(v), mu, p), axis=-1)


def project_qball(v, q) -> np.ndarray:
    if isinstance(q, str):
        q = float(q)
    return np.stack(qball_components(*_split(v), q), axis=-1)


def project_l1_ball(v, radius: float = 1.0) -> np.ndarray:
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    return np.stack(l1_ball_components(*_split(v), radius), axis=-1)

"""Result containers shared by the solvers, the multilevel driver and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .grid import FluxField, ScalarField


@dataclass
class LevelReport:
    cells: int
    eps: float
    iters: int
    fpr_final: float
    seconds: float
    converged: bool

    @property
    def h(self) -> float:
        return 1.0 / self.cells

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "cells": self.cells,
            "eps": self.eps,
            "iters": self.iters,
            "fpr_final": self.fpr_final,
            "seconds": self.seconds,
            "converged": self.converged,
        }


@dataclass
class SolveReport:
    """Outcome of a single- or multilevel solve.

    ``potential`` follows one sign convention for every algorithm: the optimal
    flux satisfies ``adjoint(potential)(x) in subdifferential of ||m(x)||_p``, so
    ``dual_value = <potential, rho>_h`` estimates the distance from below.
    """

    distance: float
    dual_value: float
    p: str
    algo: str
    flux: FluxField
    potential: ScalarField
    levels: list[LevelReport] = field(default_factory=list)
    residual_history: list[float] = field(default_factory=list)
    dual_flux: Optional[FluxField] = None
    multiplier: Optional[ScalarField] = None
    total_seconds: float = 0.0
    stages: list["SolveReport"] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(lvl.converged for lvl in self.levels)

    @property
    def iterations(self) -> list[int]:
        return [lvl.iters for lvl in self.levels]

    @property
    def gap(self) -> float:
        return self.distance - self.dual_value

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "dual_value": self.dual_value,
            "p": self.p,
            "algo": self.algo,
            "levels": [lvl.to_dict() for lvl in self.levels],
            "total_seconds": self.total_seconds,
        }

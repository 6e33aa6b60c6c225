"""Objective-function contract and the ``f0`` null objective.

``f0`` assigns every queried point a fresh ``U(0, 1)`` value, regardless of
its coordinates, so an optimiser run on it feels no selection pressure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Protocol

import numpy as np


class ObjectiveKind(str, enum.Enum):
    F0 = "F0"


@dataclass(frozen=True)
class ObjectiveSpec:
    """Dimension and box domain of an objective.

    Attributes
    ----------
    n : int
        Problem dimension.
    kind : ObjectiveKind
        Objective family. ``F0`` fixes the domain to ``[0, 1]^n``.
    """

    n: int
    kind: ObjectiveKind = ObjectiveKind.F0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got {self.n}")

    @property
    def lower(self) -> np.ndarray:
        return np.zeros(self.n)

    @property
    def upper(self) -> np.ndarray:
        return np.ones(self.n)


class Objective(Protocol):
    """Batched objective: maps ``k`` points (shape ``(k, n)``) to ``k`` values."""

    spec: ObjectiveSpec

    def __call__(self, points: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...


def evaluate_f0(point: np.ndarray, rng: np.random.Generator) -> float:
    """Evaluate ``f0`` at a single point.

    The coordinates are never inspected; exactly one uniform variate is
    consumed from ``rng``. There is no memoisation, so re-evaluating the same
    point yields a new independent value.
    """
    return float(rng.random())


class F0:
    """Batched ``f0`` with a running evaluation counter."""

    def __init__(self, n: int):
        self.spec = ObjectiveSpec(n)
        self.evaluations = 0

    def __call__(self, points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        points = np.asarray(points)
        k = points.shape[0] if points.ndim > 1 else 1
        self.evaluations += k
        return rng.random(k)

"""Strategies of dealing with infeasible solutions (SDIS) on ``[0, 1]^n``.

All repairs are componentwise and vectorised over any leading axes: a
candidate array of shape ``(..., n)`` is repaired in one call. Components
already inside ``[0, 1]`` are never touched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

COTN_SIGMA = 1.0 / 3.0


class SdisKind(str, enum.Enum):
    COTN = "COTN"
    DIS = "dis"
    MIR = "mir"
    SAT = "sat"
    TOR = "tor"
    UNI = "uni"

    @classmethod
    def parse(cls, name: str) -> "SdisKind":
        for member in cls:
            if member.value.lower() == name.lower():
                return member
        raise ValueError(f"unknown SDIS {name!r}; expected one of {[m.value for m in cls]}")


@dataclass(frozen=True)
class RepairOutcome:
    """Repaired candidate(s) plus the dismissal flag.

    ``dismissed`` has the candidate's leading shape; it can only be true under
    ``dis``, in which case ``vector`` is returned unrepaired.
    """

    vector: np.ndarray
    dismissed: np.ndarray


def saturate(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0)


def toroidal(x: np.ndarray) -> np.ndarray:
    out = np.array(x, dtype=float, copy=True)
    bad = (out < 0.0) | (out > 1.0)
    out[bad] = out[bad] - np.floor(out[bad])
    return out


def mirror(x: np.ndarray) -> np.ndarray:
    """Reflect off the bounds until feasible, as a closed-form triangular fold."""
    out = np.array(x, dtype=float, copy=True)
    bad = (out < 0.0) | (out > 1.0)
    folded = np.mod(out[bad], 2.0)
    out[bad] = np.where(folded > 1.0, 2.0 - folded, folded)
    return out


def uniform(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    out = np.array(x, dtype=float, copy=True)
    bad = (out < 0.0) | (out > 1.0)
    out[bad] = rng.random(np.count_nonzero(bad))
    return out


def cotn(x: np.ndarray, rng: np.random.Generator, sigma: float = COTN_SIGMA) -> np.ndarray:
    """Complete one-sided truncated normal repair.

    A component below 0 is redrawn as ``|z|`` and one above 1 as ``1 - |z|``
    with ``z ~ N(0, sigma)``, rejecting draws that land outside ``[0, 1]``.
    """
    out = np.array(x, dtype=float, copy=True)
    low = out < 0.0
    high = out > 1.0
    idx = np.flatnonzero(low | high)
    if idx.size == 0:
        return out
    from_high = high.ravel()[idx]
    dist = np.empty(idx.size)
    todo = np.arange(idx.size)
    while todo.size:
        z = np.abs(rng.normal(0.0, sigma, todo.size))
        ok = z <= 1.0
        dist[todo[ok]] = z[ok]
        todo = todo[~ok]
    flat = out.reshape(-1)
    flat[idx] = np.where(from_high, 1.0 - dist, dist)
    return out


def repair(
    kind: SdisKind,
    candidate: np.ndarray,
    rng: np.random.Generator,
    sigma: float = COTN_SIGMA,
) -> RepairOutcome:
    """Apply ``kind`` to ``candidate`` (shape ``(..., n)``).

    Parameters
    ----------
    kind : SdisKind
        Strategy to apply.
    candidate : ndarray
        Finite candidate vector(s); the last axis is the dimension.
    rng : Generator
        Stream for the stochastic strategies (``uni`` and ``COTN``).
    sigma : float
        Scale of the normal used by ``COTN``.

    Returns
    -------
    RepairOutcome
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(candidate, dtype=float)
    no_dismissal = np.zeros(x.shape[:-1], dtype=bool)
    kind = SdisKind(kind)
    if kind is SdisKind.SAT:
        return RepairOutcome(saturate(x), no_dismissal)
    if kind is SdisKind.TOR:
        return RepairOutcome(toroidal(x), no_dismissal)
    if kind is SdisKind.MIR:
        return RepairOutcome(mirror(x), no_dismissal)
    if kind is SdisKind.UNI:
        return RepairOutcome(uniform(x, rng), no_dismissal)
    if kind is SdisKind.COTN:
        return RepairOutcome(cotn(x, rng, sigma), no_dismissal)
    dismissed = np.any((x < 0.0) | (x > 1.0), axis=-1)
    return RepairOutcome(x.copy(), dismissed)

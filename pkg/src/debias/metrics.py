"""Structural-bias score from a sample of final points.

Each column of an ``r x n`` sample is tested against ``U(0, 1)`` with the
Anderson-Darling statistic, the ``n`` p-values are adjusted with the
Benjamini-Yekutieli step-up procedure, and the statistics of the significant
dimensions are averaged over all ``n`` dimensions.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

CLIP_EPS = 1e-12
MIN_PVALUE_SAMPLE = 8
MILD_UPPER = 10.0
TAIL_SWITCH = 1e-5


class BiasClass(str, enum.Enum):
    NONE = "none"
    MILD = "mild"
    STRONG = "strong"


@dataclass(frozen=True)
class SBConfig:
    alpha: float = 0.01
    mild_upper: float = MILD_UPPER

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class DimensionRecord:
    dim: int
    A2: float
    p_raw: float
    p_adj: float


@dataclass
class SBReport:
    """Per-dimension tests and the aggregated score of one sample."""

    per_dim: list[DimensionRecord]
    sb_score: float
    classification: BiasClass
    sample_size: int
    alpha: float
    config_id: str | None = None
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.per_dim)

    def to_dict(self) -> dict:
        return {
            "config_id": self.config_id,
            "sample_size": self.sample_size,
            "alpha": self.alpha,
            "per_dim": [asdict(rec) for rec in self.per_dim],
            "sb_score": self.sb_score,
            "classification": self.classification.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "SBReport":
        return cls(
            per_dim=[DimensionRecord(**rec) for rec in data["per_dim"]],
            sb_score=data["sb_score"],
            classification=BiasClass(data["classification"]),
            sample_size=data["sample_size"],
            alpha=data["alpha"],
            config_id=data.get("config_id"),
        )


def _ad_columns(u: np.ndarray) -> np.ndarray:
    """A^2 for every column of ``u`` (shape ``(m, k)``), values already clipped."""
    m = u.shape[0]
    s = np.sort(u, axis=0)
    weights = (2.0 * np.arange(1, m + 1) - 1.0)[:, None]
    terms = np.log(s) + np.log1p(-s[::-1])
    return -m - (weights * terms).sum(axis=0) / m


def _check_unit_sample(values: np.ndarray) -> np.ndarray:
    if values.shape[0] == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(values)):
        raise ValueError("sample contains non-finite values")
    if np.any((values < 0.0) | (values > 1.0)):
        raise ValueError("sample values must lie in [0, 1]")
    return np.clip(values, CLIP_EPS, 1.0 - CLIP_EPS)


def ad_statistic(sample) -> float:
    """Anderson-Darling statistic of ``sample`` against ``U(0, 1)``.

    Uses the sorted-sample closed form
    ``A^2 = -m - (1/m) sum (2i - 1) (ln u_(i) + ln(1 - u_(m+1-i)))``.
    Values are clipped into ``[1e-12, 1 - 1e-12]`` so that points sitting
    exactly on a bound give a large but finite statistic.
    """
    u = _check_unit_sample(np.asarray(sample, dtype=float).ravel())
    return float(_ad_columns(u[:, None])[0])


def _adinf(z: float) -> float:
    """Limiting CDF of A^2 (Marsaglia & Marsaglia 2004)."""
    if z <= 0.0:
        return 0.0
    if z < 2.0:
        poly = 2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z
        return math.exp(-1.2337141 / z) / math.sqrt(z) * poly
    return math.exp(-math.exp(_upper_exponent(z)))


def _upper_exponent(z: float) -> float:
    return 1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z


def _errfix(m: int, x: float) -> float:
    """Finite-sample correction to the limiting CDF value ``x``."""
    if x > 0.8:
        return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / m
    c = 0.01265 + 0.1757 / m
    if x < c:
        t = x / c
        t = math.sqrt(t) * (1.0 - t) * (49.0 * t - 102.0)
        return t * (0.0037 / (m * m) + 0.00078 / m + 0.00006) / m
    x = (x - c) / (0.8 - c)
    x = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * x) * x) * x) * x) * x
    return x * (0.04213 / m + 0.01365 / (m * m)) / m


def ad_pvalue(A2: float, m: int) -> float:
    """Upper-tail p-value of ``A2`` for a sample of size ``m`` under ``U(0, 1)``.

    Limiting distribution plus the Marsaglia finite-sample correction. Once the
    limiting tail falls below ``1e-5`` it is returned directly, computed as
    ``-expm1(-exp(.))`` so it stays accurate far beyond double rounding of the
    CDF.
    """
    if m < MIN_PVALUE_SAMPLE:
        raise ValueError(f"sample too small for p-value approximation (m={m} < {MIN_PVALUE_SAMPLE})")
    if A2 < 0 or not math.isfinite(A2):
        raise ValueError(f"A2 must be finite and non-negative, got {A2}")
    if A2 >= 2.0:
        tail = -math.expm1(-math.exp(_upper_exponent(A2)))
        if tail < TAIL_SWITCH:
            # the correction's own residual (~1e-6 / m) would swamp the tail
            return tail
    cdf = _adinf(A2)
    p = 1.0 - (cdf + _errfix(m, cdf))
    return min(1.0, max(0.0, p))


def by_adjust(p_values) -> np.ndarray:
    """Benjamini-Yekutieli adjusted p-values, returned in input order."""
    p = np.asarray(p_values, dtype=float).ravel()
    n = p.size
    if n == 0:
        raise ValueError("empty p-value list")
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("p-values must lie in [0, 1]")
    c_n = np.sum(1.0 / np.arange(1, n + 1))
    order = np.argsort(p, kind="stable")
    ranks = np.arange(1, n + 1)
    scaled = c_n * n * p[order] / ranks
    stepped = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.empty(n)
    adjusted[order] = np.minimum(stepped, 1.0)
    return adjusted


def classify(sb: float, mild_upper: float = MILD_UPPER) -> BiasClass:
    if sb < 0 or math.isnan(sb):
        raise ValueError(f"SB score must be non-negative, got {sb}")
    if sb == 0:
        return BiasClass.NONE
    if sb <= mild_upper:
        return BiasClass.MILD
    return BiasClass.STRONG


def sb_score(final_points, cfg: SBConfig | None = None, config_id: str | None = None) -> SBReport:
    """Score an ``r x n`` matrix of final points in ``[0, 1]^n``.

    Parameters
    ----------
    final_points : array_like, shape (r, n)
        One row per run. ``r`` must be at least 8.
    cfg : SBConfig, optional
        Significance level and band threshold.
    config_id : str, optional
        Carried through to the report.

    Returns
    -------
    SBReport
    """
    cfg = cfg or SBConfig()
    x = np.asarray(final_points, dtype=float)
    if x.ndim != 2:
        raise ValueError("final_points must be a 2-D (runs x dimensions) array")
    r, n = x.shape
    if n < 1:
        raise ValueError("need at least one dimension")
    if r < MIN_PVALUE_SAMPLE:
        raise ValueError(f"need at least {MIN_PVALUE_SAMPLE} runs, got {r}")
    u = _check_unit_sample(x)
    a2 = _ad_columns(u)
    p_raw = np.array([ad_pvalue(float(a), r) for a in a2])
    p_adj = by_adjust(p_raw)
    significant = p_adj <= cfg.alpha
    sb = float(np.sum(a2[significant]) / n)
    records = [
        DimensionRecord(dim=i, A2=float(a2[i]), p_raw=float(p_raw[i]), p_adj=float(p_adj[i]))
        for i in range(n)
    ]
    return SBReport(
        per_dim=records,
        sb_score=sb,
        classification=classify(sb, cfg.mild_upper),
        sample_size=r,
        alpha=cfg.alpha,
        config_id=config_id,
    )

"""Distributional summaries of replicated statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sst

from ..errors import LevelsTooCloseError, TooFewError

KS_MIN_SAMPLES = 50
KS_COEFF_95 = 1.358


@dataclass(frozen=True)
class KsResult:
    statistic: float
    threshold: float
    n: int


def ks_normal(samples) -> KsResult:
    """One-sample Kolmogorov-Smirnov distance to N(0, 1) and the 95% threshold ``1.358 / sqrt(n)``."""
    x = np.asarray(samples, dtype=float)
    if x.size < KS_MIN_SAMPLES:
        raise TooFewError(f"need at least {KS_MIN_SAMPLES} samples, got {x.size}")
    d = float(sst.kstest(x, "norm").statistic)
    return KsResult(d, KS_COEFF_95 / math.sqrt(x.size), int(x.size))


def qq_points(samples) -> tuple[np.ndarray, np.ndarray]:
    """Normal quantiles at ``(i - 1/2) / n`` paired with the sorted samples."""
    x = np.sort(np.asarray(samples, dtype=float))
    probs = (np.arange(1, x.size + 1) - 0.5) / x.size
    return sst.norm.ppf(probs), x


@dataclass(frozen=True)
class CoverageResult:
    rate: float
    se: float
    n: int
    level: float


def coverage(intervals, truth, level: float = 0.95) -> CoverageResult:
    """Fraction of intervals containing ``truth`` with its binomial standard error.

    ``intervals`` holds ``(low, high)`` pairs, or estimate reports whose
    first interval is used.  Intended for a hundred or more intervals.
    """
    pairs = []
    for item in intervals:
        ci = getattr(item, "ci", None)
        pairs.append(ci[0] if ci is not None else item)
    if not pairs:
        raise ValueError("no intervals")
    lo = np.array([p[0] for p in pairs], dtype=float)
    hi = np.array([p[1] for p in pairs], dtype=float)
    hit = (lo <= truth) & (truth <= hi)
    rate = float(hit.mean())
    return CoverageResult(rate, math.sqrt(rate * (1 - rate) / hit.size), int(hit.size), float(level))


@dataclass(frozen=True)
class MixtureResult:
    fractions: tuple[float, ...]
    unassigned: float
    eps: float
    levels: tuple[float, ...]


def mixture_clusters(u_samples, predicted_levels: Sequence[float], eps: float | None = None) -> MixtureResult:
    """Assign each sample to the nearest of two levels when within ``eps``.

    ``eps`` defaults to a quarter of the gap between the levels.

    Raises:
        LevelsTooCloseError: the gap is below ``4 eps`` (or zero).
    """
    levels = tuple(float(x) for x in predicted_levels)
    if len(levels) != 2:
        raise ValueError("need exactly two predicted levels")
    gap = abs(levels[1] - levels[0])
    if eps is None:
        eps = 0.25 * gap
    if gap <= 0.0 or gap < 4.0 * eps * (1.0 - 1e-12):
        raise LevelsTooCloseError(f"level gap {gap:.3g} below 4 * eps = {4 * eps:.3g}")
    u = np.asarray(u_samples, dtype=float)
    if u.size == 0:
        raise ValueError("no samples")
    d = np.abs(u[:, None] - np.asarray(levels)[None, :])
    nearest = np.argmin(d, axis=1)
    ok = d[np.arange(u.size), nearest] <= eps
    fr = tuple(float(np.mean(ok & (nearest == k))) for k in range(2))
    return MixtureResult(fr, float(np.mean(~ok)), float(eps), levels)


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    mean_se: float
    variance: float
    n: int


def moments(x) -> MomentSummary:
    a = np.asarray(x, dtype=float)
    if a.size < 2:
        return MomentSummary(float(a.mean()) if a.size else float("nan"), float("nan"), float("nan"), int(a.size))
    var = float(np.var(a, ddof=1))
    return MomentSummary(float(a.mean()), math.sqrt(var / a.size), var, int(a.size))


def frobenius_relative(empirical: np.ndarray, target: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(empirical) - np.asarray(target)) / np.linalg.norm(target))

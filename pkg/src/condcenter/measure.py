"""Finite symmetric spin measures and their log-moment generating function.

Every conditional mean in the toolkit is a derivative of the cumulant
``xi(t) = log sum_k w_k exp(t x_k)`` of a finite base measure.  All
derivatives are computed as exact weighted sums over the atoms after
subtracting ``max_k t x_k``, so tilts of size ~50 do not overflow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AsymmetricMeasureError,
    BadWeightsError,
    DegenerateMeasureError,
    MissingEndpointsError,
    NonFiniteTiltError,
)
from .tolerances import TOL


@dataclass(frozen=True, eq=False)
class BaseMeasure:
    """A finite probability measure on [-1, 1], symmetric about zero.

    Attributes:
        support: strictly increasing atom locations.
        weights: matching atom probabilities (positive, summing to one).
    """

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.support.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return int(self.support.shape[0])

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    @property
    def is_rademacher(self) -> bool:
        return self.size == 2 and self.support[0] == -1.0 and self.support[1] == 1.0

    @property
    def variance(self) -> float:
        return float(np.dot(self.weights, self.support**2))

    def atoms(self) -> list[tuple[float, float]]:
        return [(float(x), float(w)) for x, w in zip(self.support, self.weights)]

    def to_json(self) -> str:
        return json.dumps({"atoms": [[x, w] for x, w in self.atoms()]})

    @classmethod
    def from_json(cls, text: str) -> "BaseMeasure":
        data = json.loads(text)
        return make_discrete([tuple(a) for a in data["atoms"]])

    def __eq__(self, other):
        if not isinstance(other, BaseMeasure):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(
            self.weights, other.weights
        )

    def __hash__(self):
        return hash((self.support.tobytes(), self.weights.tobytes()))

    def __repr__(self):
        return f"BaseMeasure(atoms={self.atoms()})"


@dataclass(frozen=True)
class CumulantValues:
    """Cumulant and its first three derivatives at one tilt."""

    xi: float
    d1: float
    d2: float
    d3: float


def make_rademacher() -> BaseMeasure:
    return BaseMeasure(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))


def make_discrete(atoms: Iterable[Sequence[float]]) -> BaseMeasure:
    """Validate ``(value, weight)`` pairs and build a measure.

    Raises:
        BadWeightsError: non-positive weights, weights not summing to one,
            values outside [-1, 1] or repeated values.
        DegenerateMeasureError: fewer than two distinct atoms.
        MissingEndpointsError: -1 or +1 absent from the support.
        AsymmetricMeasureError: the measure is not symmetric about zero.
    """
    pairs = [(float(x), float(w)) for x, w in atoms]
    if not pairs:
        raise DegenerateMeasureError("empty measure")
    values = np.array([p[0] for p in pairs])
    weights = np.array([p[1] for p in pairs])
    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(weights)):
        raise BadWeightsError("non-finite atom")
    if np.any(weights <= 0):
        raise BadWeightsError("weights must be strictly positive")
    if abs(math.fsum(weights) - 1.0) > TOL.weight_sum:
        raise BadWeightsError(f"weights sum to {math.fsum(weights)!r}, not 1")
    if np.any(np.abs(values) > 1.0):
        raise BadWeightsError("atoms must lie in [-1, 1]")
    order = np.argsort(values, kind="stable")
    values, weights = values[order], weights[order]
    if np.any(np.diff(values) == 0):
        raise BadWeightsError("repeated atom value")
    if values.size < 2:
        raise DegenerateMeasureError("measure needs at least two distinct atoms")
    if values[0] != -1.0 or values[-1] != 1.0:
        raise MissingEndpointsError("support must contain both -1 and +1")
    if not (
        np.array_equal(values, -values[::-1])
        and np.all(np.abs(weights - weights[::-1]) <= TOL.weight_sum)
    ):
        raise AsymmetricMeasureError("measure is not symmetric about 0")
    return BaseMeasure(values, weights)


def _check_tilt(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteTiltError(f"tilt must be finite, got {t!r}")
    return arr


def _tilted_probs(m: BaseMeasure, t: np.ndarray) -> np.ndarray:
    logits = t[..., None] * m.support + m.log_weights
    logits -= logits.max(axis=-1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=-1, keepdims=True)
    return p


def log_mgf(m: BaseMeasure, t) -> np.ndarray | float:
    """``xi(t)``, vectorised over ``t``."""
    arr = _check_tilt(t)
    logits = arr[..., None] * m.support + m.log_weights
    top = logits.max(axis=-1)
    out = top + np.log(np.exp(logits - top[..., None]).sum(axis=-1))
    return float(out) if out.ndim == 0 else out


def tilted_mean(m: BaseMeasure, t) -> np.ndarray | float:
    """``xi'(t)``: mean of the tilted measure, vectorised over ``t``."""
    arr = _check_tilt(t)
    if m.is_rademacher:
        out = np.tanh(arr)
    else:
        out = _tilted_probs(m, arr) @ m.support
    return float(out) if np.ndim(out) == 0 else out


def tilted_var(m: BaseMeasure, t) -> np.ndarray | float:
    """``xi''(t)``: variance of the tilted measure, vectorised over ``t``."""
    arr = _check_tilt(t)
    if m.is_rademacher:
        th = np.tanh(arr)
        out = 1.0 - th * th
    else:
        p = _tilted_probs(m, arr)
        mu = p @ m.support
        out = np.einsum("...k,...k->...", p, (m.support - mu[..., None]) ** 2)
    return float(out) if np.ndim(out) == 0 else out


def tilted_probs(m: BaseMeasure, t) -> np.ndarray:
    """Atom probabilities of the measure tilted by ``exp(t y)``."""
    return _tilted_probs(m, _check_tilt(t))


def cumulant_derivs(m: BaseMeasure, t: float) -> CumulantValues:
    t = float(_check_tilt(t))
    logits = t * m.support + m.log_weights
    top = logits.max()
    e = np.exp(logits - top)
    z = e.sum()
    p = e / z
    mu = float(p @ m.support)
    dev = m.support - mu
    return CumulantValues(
        xi=float(top + math.log(z)),
        d1=mu,
        d2=float(p @ dev**2),
        d3=float(p @ dev**3),
    )


def inverse_mean(m: BaseMeasure, x: float, *, bound: float = 60.0) -> float:
    """Solve ``xi'(s) = x`` for ``s``; ``x`` must lie strictly inside (-1, 1)."""
    if not -1.0 < x < 1.0:
        raise ValueError(f"mean {x!r} outside (-1, 1)")
    if m.is_rademacher:
        return math.atanh(x)
    lo, hi = -bound, bound
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cumulant_derivs(m, mid).d1 < x:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def tilted_sample(m: BaseMeasure, t: float, rng: np.random.Generator) -> float:
    """Draw one spin from ``exp(t y) rho(dy)`` by inverse CDF over the atoms."""
    p = _tilted_probs(m, np.asarray(_check_tilt(t)))
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return float(m.support[min(idx, m.size - 1)])


def ghs_check(m: BaseMeasure, grid: Iterable[float]) -> bool:
    """True iff ``xi'''(x) <= 0`` at every positive grid point (and the mirror)."""
    points = [float(x) for x in grid]
    if not points:
        raise ValueError("grid must be nonempty")
    if any(x <= 0 for x in points):
        raise ValueError("grid points must be positive")
    for x in points:
        if cumulant_derivs(m, x).d3 > TOL.ghs_slack:
            return False
        if cumulant_derivs(m, -x).d3 < -TOL.ghs_slack:
            return False
    return True

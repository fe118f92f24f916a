"""Conditionally centered statistics and their studentizers.

For spins ``s`` with conditional means ``t_i = xi'(beta m_i + B)``::

    T = N^{-1/2} sum_i c_i (s_i - t_i)
    U = N^{-1}   sum_i c_i^2 (s_i^2 - t_i^2)
    V = N^{-1}   sum_{i != j} c_i c_j (s_i - t_i) (t_j^i - t_j)

where ``t_j^i`` is the conditional mean of site ``j`` after setting
``s_i = 0``.  ``T / sqrt(max(U + V, a_N))`` is the studentized pivot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .ergm import ErgmModel, GraphState, eta_all, logistic
from .errors import BadFloorError, SameIndexError, UnsupportedTemplateError
from .ising import IsingModel, SpinState, local_fields
from .measure import tilted_mean, tilted_var


@dataclass
class WeightVector:
    """Coefficient vector ``c`` with its integrability diagnostics."""

    c: np.ndarray
    tail_grid: tuple[float, ...] = (1.0, 2.0, 5.0, 10.0)
    mean_sq: float = field(init=False)
    tails: dict = field(init=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        if self.c.ndim != 1 or not np.all(np.isfinite(self.c)):
            raise ValueError("weights must be a finite 1-d array")
        c2 = self.c**2
        self.mean_sq = float(c2.mean())
        self.tails = {L: float(np.mean(c2 * (np.abs(self.c) > L))) for L in self.tail_grid}

    @classmethod
    def ones(cls, n: int) -> "WeightVector":
        return cls(np.ones(n))

    @classmethod
    def block_indicator(cls, labels, block: int = 0) -> "WeightVector":
        return cls((np.asarray(labels) == block).astype(float))

    @classmethod
    def contrast(cls, n: int) -> "WeightVector":
        """+1 on the first half, -1 on the second half."""
        return cls(np.where(np.arange(n) < n // 2, 1.0, -1.0))

    def __len__(self):
        return self.c.size


@dataclass(frozen=True)
class CenteredStats:
    t_stat: float
    u_stat: float
    v_stat: float
    studentized: float
    a_floor: float
    upsilon2: float = float("nan")

    def as_dict(self) -> dict:
        return {
            "T": self.t_stat, "U": self.u_stat, "V": self.v_stat,
            "studentized": self.studentized, "a_floor": self.a_floor, "upsilon2": self.upsilon2,
        }


def default_floor(n: int) -> float:
    return 1.0 / math.sqrt(n)


def _spins(state) -> np.ndarray:
    return np.asarray(state.spins if isinstance(state, SpinState) else state, dtype=float)


def _weights(c, n) -> np.ndarray:
    arr = c.c if isinstance(c, WeightVector) else np.asarray(c, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"weights must have length {n}")
    return arr


def leave_one_out_mean(model: IsingModel, state, j: int, i: int) -> float:
    """Conditional mean of ``s_j`` with ``s_i`` replaced by 0."""
    if i == j:
        raise SameIndexError("leave-one-out needs i != j")
    s = _spins(state)
    if model.is_pairwise:
        m_j = float(local_fields(model, s)[j]) - model.coupling.entry(j, i) * s[i]
    else:
        z = s.copy()
        z[i] = 0.0
        m_j = float(local_fields(model, z)[j])
    return float(tilted_mean(model.measure, model.beta * m_j + model.b_field))


def _v_pairwise(model: IsingModel, s, m, t, c) -> float:
    a = model.coupling
    mu, beta, b = model.measure, model.beta, model.b_field
    n = a.n
    resid = c * (s - t)
    if a.is_block:
        lab, w = a.block_labels, a.block_values
        nb = w.shape[0]
        total = 0.0
        for blk in range(nb):
            for x in mu.support:
                sel = (lab == blk) & (s == x)
                if not sel.any() or x == 0.0:
                    continue
                s_bx = resid[sel].sum()
                shift = tilted_mean(mu, beta * (m - w[lab, blk] * x) + b) - t
                own = np.where(sel, resid, 0.0)
                total += float(np.sum(c * shift * (s_bx - own)))
        return total / n
    r, col, v = a.rows, a.cols, a.vals
    # t_j^i for (i, j) = (r, col) and the mirrored orientation
    t_col_minus_r = tilted_mean(mu, beta * (m[col] - v * s[r]) + b)
    t_r_minus_col = tilted_mean(mu, beta * (m[r] - v * s[col]) + b)
    terms = resid[r] * c[col] * (t_col_minus_r - t[col]) + resid[col] * c[r] * (t_r_minus_col - t[r])
    return math.fsum(terms) / n


def _v_tensor(model: IsingModel, s, t, c) -> float:
    n = model.n
    resid = c * (s - t)
    total = 0.0
    for i in range(n):
        if resid[i] == 0.0 or s[i] == 0.0:
            continue
        z = s.copy()
        z[i] = 0.0
        ti = tilted_mean(model.measure, model.beta * local_fields(model, z) + model.b_field)
        d = c * (ti - t)
        d[i] = 0.0
        total += resid[i] * math.fsum(d)
    return total / n


def centered_stats(model: IsingModel, state, c, a_n: float | None = None) -> CenteredStats:
    """``(T, U, V)`` and the studentized value for one configuration."""
    s = _spins(state)
    n = s.size
    cw = _weights(c, n)
    if a_n is None:
        a_n = default_floor(n)
    if not a_n > 0:
        raise BadFloorError(f"floor must be positive, got {a_n!r}")
    m = local_fields(model, s)
    t = tilted_mean(model.measure, model.beta * m + model.b_field)
    t_stat = math.fsum(cw * (s - t)) / math.sqrt(n)
    u_stat = math.fsum(cw * cw * (s * s - t * t)) / n
    if model.beta == 0.0:
        v_stat = 0.0
    elif model.is_pairwise:
        v_stat = _v_pairwise(model, s, m, t, cw)
    else:
        v_stat = _v_tensor(model, s, t, cw)
    if model.is_pairwise:
        ups2 = float(cw @ model.coupling.matvec(cw)) / n
    else:
        ups2 = float("nan")
    stud = t_stat / math.sqrt(max(u_stat + v_stat, a_n))
    return CenteredStats(t_stat, u_stat, v_stat, stud, float(a_n), ups2)


def v_bound(model: IsingModel, c) -> float:
    """``2 |beta| max_i R_i mean(c^2)``, a deterministic bound on ``|V|``.

    Holds since ``|t_j^i - t_j| <= |beta| A_ji |s_i|`` and ``xi'' <= 1``.
    """
    cw = _weights(c, model.n)
    return 2.0 * abs(model.beta) * float(np.max(model.coupling.row_sums)) * float(np.mean(cw * cw))


def plug_in_variance(model: IsingModel, state, c_rows, *, beta: float | None = None,
                     b_field: float | None = None, offset=None):
    """Plug-in limiting variance of the centered sums for one or two weight rows.

    Entry ``(a, b)`` is ``N^{-1} sum c^a c^b xi''_i - (beta / N) sum_{i != j}
    c_i^a c_j^b A_ij xi''_i xi''_j`` with ``xi''_i = xi''(beta m_i + B)``.
    ``beta`` and ``b_field`` default to the model's values; pass estimates
    for feasible inference.  ``offset`` adds a per-site shift to the tilt.
    """
    if not model.is_pairwise:
        raise UnsupportedTemplateError("plug-in variance is implemented for pairwise models")
    s = _spins(state)
    n = s.size
    beta = model.beta if beta is None else float(beta)
    b_field = model.b_field if b_field is None else float(b_field)
    rows = [_weights(c, n) for c in (c_rows if isinstance(c_rows, (list, tuple)) else [c_rows])]
    if len(rows) not in (1, 2):
        raise ValueError("need one or two weight rows")
    m = local_fields(model, s)
    tilt = beta * m + b_field
    if offset is not None:
        tilt = tilt + np.asarray(offset, dtype=float)
    d2 = tilted_var(model.measure, tilt)
    k = len(rows)
    out = np.empty((k, k))
    for x in range(k):
        for y in range(x, k):
            first = math.fsum(rows[x] * rows[y] * d2) / n
            second = float((rows[x] * d2) @ model.coupling.matvec(rows[y] * d2)) / n
            out[x, y] = out[y, x] = first - beta * second
    return float(out[0, 0]) if k == 1 else out


def _pair_index(n: int) -> np.ndarray:
    idx = -np.ones((n, n), dtype=np.int64)
    r, c = np.triu_indices(n, k=1)
    idx[r, c] = idx[c, r] = np.arange(r.size)
    return idx


def _ergm_v_weighted(model: ErgmModel, state: GraphState, lam, eta_vec, resid, cw) -> float:
    # explicit loop over present pairs; only pairs sharing a vertex contribute
    n = model.n
    _, cs, ct = model.coefficients()
    idx = _pair_index(n)
    adj = state.adj
    total = 0.0
    r, c = np.triu_indices(n, k=1)
    for e in np.flatnonzero(adj[r, c]):
        i, j = int(r[e]), int(c[e])
        acc = 0.0
        for a, b in ((i, j), (j, i)):
            for k in range(n):
                if k == a or k == b:
                    continue
                f = idx[a, k]
                shifted = logistic(eta_vec[f] - cs - ct * adj[b, k])
                acc += cw[f] * (shifted - lam[f])
        total += resid[e] * acc
    return total / model.n_pairs


def ergm_centered_stats(model: ErgmModel, state: GraphState, a_n: float | None = None,
                        c=None) -> CenteredStats:
    """Edge analogues of ``(T, U, V)``; the V sum runs over pair-pairs sharing a vertex.

    ``c`` optionally weights the pairs (lexicographic order); the weighted V
    uses a plain Python loop and is meant for small graphs.
    """
    npairs = model.n_pairs
    if a_n is None:
        a_n = default_floor(npairs)
    if not a_n > 0:
        raise BadFloorError(f"floor must be positive, got {a_n!r}")
    ce, cs, ct = model.coefficients()
    y = state.edge_vector()
    eta_vec = eta_all(model, state)
    lam = logistic(eta_vec)
    cw = None if c is None else _weights(c, npairs)
    if cw is not None and np.all(cw == 1.0):
        cw = None
    if cw is None:
        t_stat = math.fsum(y - lam) / math.sqrt(npairs)
        u_stat = math.fsum(y - lam * lam) / npairs
    else:
        t_stat = math.fsum(cw * (y - lam)) / math.sqrt(npairs)
        u_stat = math.fsum(cw * cw * (y - lam * lam)) / npairs
    if cs == 0.0 and ct == 0.0:
        v_stat = 0.0
    elif cw is None:
        v_stat = float(_kernels.ergm_v_edge(state.adj, state.deg, state.cn, model.n, ce, cs, ct))
    else:
        v_stat = _ergm_v_weighted(model, state, lam, eta_vec, cw * (y - lam), cw)
    stud = t_stat / math.sqrt(max(u_stat + v_stat, a_n))
    return CenteredStats(t_stat, u_stat, v_stat, stud, float(a_n))

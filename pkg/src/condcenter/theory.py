"""Mean-field fixed points and closed-form limiting variances.

Everything here is deterministic and is used as ground truth by the
Monte Carlo harness.  Fixed points are bracketed and bisected, then
polished with Newton steps, and every returned value is checked against
its defining equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .coupling import BlockGraphon
from .errors import (
    DegenerateTError,
    NegativeRError,
    NoConvergenceError,
    NoRootError,
    NotStationaryError,
    NotSubcriticalError,
    SingularAError,
)
from .measure import BaseMeasure, cumulant_derivs, inverse_mean, log_mgf, tilted_mean, tilted_var
from .tolerances import TOL

SCAN_POINTS = 10_000


@dataclass(frozen=True)
class FixedPointResult:
    """Solution of a mean-field equation.

    ``regime`` is one of ``"Theta11"``, ``"Theta12"``, ``"Theta2"`` for the
    scalar Ising equation, ``"asymmetric"`` / ``"symmetric"`` for the
    bipartite two-cycle, and ``"subcritical"`` / ``"non-unique"`` for the
    ERGM equation.
    """

    value: float | tuple[float, float]
    residual: float
    stability: float
    regime: str
    roots: tuple = ()
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AsymptoticVariance:
    value: float | np.ndarray
    source: str

    def __float__(self):
        return float(self.value)


def _bisect(fn, lo: float, hi: float, width: float = 1e-15, max_iter: int = 200) -> float:
    flo = fn(lo)
    if flo == 0.0:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= width:
            break
    return 0.5 * (lo + hi)


def _newton_polish(fn, dfn, x: float, lo: float, hi: float, steps: int = 3) -> float:
    for _ in range(steps):
        d = dfn(x)
        if d == 0.0:
            break
        nx = x - fn(x) / d
        if not (lo <= nx <= hi) or abs(fn(nx)) > abs(fn(x)):
            break
        x = nx
    return x


def solve_t_rho(measure: BaseMeasure, r: float, s: float) -> FixedPointResult:
    """Solve ``t = xi'(r t + s)`` choosing the root that maximises the free energy.

    For ``s != 0`` this is the root with the sign of ``s``; for ``s = 0``
    it is 0 when ``r xi''(0) <= 1`` and the positive root otherwise (the
    negative root is its mirror image).
    """
    if r < 0:
        raise NegativeRError(f"r must be nonnegative, got {r!r}")
    var0 = cumulant_derivs(measure, 0.0).d2

    def g(t):
        return tilted_mean(measure, r * t + s) - t

    def dg(t):
        return r * tilted_var(measure, r * t + s) - 1.0

    if s == 0.0 and r * var0 <= 1.0:
        t, regime, roots = 0.0, "Theta11", (0.0,)
    else:
        regime = "Theta2" if s == 0.0 else "Theta12"
        # above criticality t = 0 is an unstable root; keep it out of the bracket
        edge = 1e-12 if r * var0 > 1.0 else 0.0
        lo, hi = (edge, 1.0) if s >= 0.0 else (-1.0, -edge)
        if s >= 0.0 and g(lo) <= 0.0:
            t = lo
        elif s < 0.0 and g(hi) >= 0.0:
            t = hi
        else:
            t = _bisect(g, lo, hi)
            t = _newton_polish(g, dg, t, lo, hi)
        roots = (-t, t) if regime == "Theta2" else (t,)
    res = abs(g(t))
    if res > TOL.fixed_point_residual:
        raise NoConvergenceError(f"fixed point residual {res:.3g}")
    stability = r * tilted_var(measure, r * t + s)
    return FixedPointResult(t, res, stability, regime, roots)


def _symmetric_root(measure: BaseMeasure, beta: float, b_field: float) -> float:
    """Unique root of ``t = xi'(beta t + B)`` for ``beta <= 0``."""
    g = lambda t: tilted_mean(measure, beta * t + b_field) - t
    dg = lambda t: beta * tilted_var(measure, beta * t + b_field) - 1.0
    t = _bisect(g, -1.0, 1.0)
    return _newton_polish(g, dg, t, -1.0, 1.0)


def solve_bipartite_pair(measure: BaseMeasure, beta: float, b_field: float) -> FixedPointResult:
    """Two-cycle ``t1 = xi'(beta t2 + B)``, ``t2 = xi'(beta t1 + B)``.

    ``value`` is ``(t1, t2)`` with ``t1 >= t2``; when no asymmetric pair
    exists both equal the symmetric solution.  The asymmetric pair is the
    largest fixed point of the increasing map
    ``F(t) = xi'(beta xi'(beta t + B) + B)``, located by a sign scan above
    the symmetric root followed by bisection.
    """
    if not b_field > 0:
        raise ValueError("bipartite two-cycle needs B > 0")
    if beta >= 0:
        t0 = solve_t_rho(measure, beta, b_field).value
        res = abs(tilted_mean(measure, beta * t0 + b_field) - t0)
        stab = beta * tilted_var(measure, beta * t0 + b_field)
        return FixedPointResult((t0, t0), res, stab * stab, "symmetric", ((t0, t0),), {"t_sym": t0})
    t0 = _symmetric_root(measure, beta, b_field)

    def F(t):
        return tilted_mean(measure, beta * tilted_mean(measure, beta * t + b_field) + b_field)

    h = lambda t: F(t) - t
    grid = np.linspace(t0, 1.0, SCAN_POINTS + 1)[1:]
    vals = F(grid) - grid
    t1 = None
    sign_idx = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if sign_idx.size:
        k = sign_idx[-1]
        t1 = _bisect(h, grid[k], grid[k + 1])
    if t1 is None or abs(t1 - t0) < 1e-7:
        res = abs(tilted_mean(measure, beta * t0 + b_field) - t0)
        stab = (beta * tilted_var(measure, beta * t0 + b_field)) ** 2
        return FixedPointResult((t0, t0), res, stab, "symmetric", ((t0, t0),), {"t_sym": t0})
    t2 = tilted_mean(measure, beta * t1 + b_field)
    # one fixed-point pass makes both equations hold to rounding
    t1 = tilted_mean(measure, beta * t2 + b_field)
    t2 = tilted_mean(measure, beta * t1 + b_field)
    res = max(
        abs(t1 - tilted_mean(measure, beta * t2 + b_field)),
        abs(t2 - tilted_mean(measure, beta * t1 + b_field)),
    )
    if res > TOL.fixed_point_residual:
        raise NoConvergenceError(f"two-cycle residual {res:.3g}", )
    stab = beta * beta * tilted_var(measure, beta * t1 + b_field) * tilted_var(measure, beta * t2 + b_field)
    return FixedPointResult(
        (float(t1), float(t2)), res, stab, "asymmetric", ((t1, t2), (t2, t1)), {"t_sym": t0}
    )


def locate_beta0(measure: BaseMeasure, b_field: float, beta_min: float = -50.0, tol: float = 1e-10) -> float:
    """Boundary ``beta_0(B) < 0`` below which the asymmetric two-cycle exists.

    Uses the instability of the symmetric solution,
    ``|beta| xi''(beta t0 + B) > 1``, as the indicator and bisects on it.
    """
    def unstable(beta):
        t0 = _symmetric_root(measure, beta, b_field)
        return -beta * tilted_var(measure, beta * t0 + b_field) > 1.0

    if not unstable(beta_min):
        raise NoRootError(f"no asymmetric regime above beta={beta_min}")
    lo, hi = beta_min, 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if unstable(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bipartite_mixture_covariances(measure: BaseMeasure, beta: float, b_field: float):
    """Component covariances ``(H1, H2)`` of the bipartite MPLE mixture.

    ``H1`` belongs to the mode in which the first (weighted) block has
    conditional variance ``tt1 = xi''(beta t1 + B)``; ``H2`` swaps the roles.
    """
    pair = solve_bipartite_pair(measure, beta, b_field)
    t1, t2 = pair.value
    tt1 = tilted_var(measure, beta * t1 + b_field)
    tt2 = tilted_var(measure, beta * t2 + b_field)

    def component(x, y):
        a = np.array([[0.5 * x, 0.5 * x], [0.5 * x, 0.5 * (x + y)]])
        b = np.array(
            [[0.5 * x, 0.5 * (x - beta * x * y)], [0.5 * (x - beta * x * y), 0.5 * (x + y) - beta * x * y]]
        )
        ai = np.linalg.inv(a)
        return ai @ b @ ai

    return component(tt1, tt2), component(tt2, tt1), (tt1, tt2)


def ergm_phi(betas: Sequence[float], edge_counts: Sequence[int], x):
    """``phi(x) = L(2 Phi(x))`` with ``Phi(x) = sum beta_m e_m x^(e_m - 1)``."""
    x = np.asarray(x, dtype=float)
    big_phi = sum(b * e * x ** (e - 1) for b, e in zip(betas, edge_counts))
    return expit(2.0 * big_phi)


def ergm_phi_prime(betas, edge_counts, x):
    x = np.asarray(x, dtype=float)
    dphi = sum(b * e * (e - 1) * x ** (e - 2) for b, e in zip(betas, edge_counts) if e > 1)
    p = ergm_phi(betas, edge_counts, x)
    return 2.0 * p * (1.0 - p) * dphi


def ergm_pstar(betas: Sequence[float], edge_counts: Sequence[int], grid_points: int = SCAN_POINTS) -> FixedPointResult:
    """All roots of ``phi(x) = x`` in ``(0, 1)`` by sign scan plus bisection."""
    betas = [float(b) for b in betas]
    edge_counts = [int(e) for e in edge_counts]
    if not edge_counts or edge_counts[0] != 1:
        raise ValueError("the first template must be the edge (e_1 = 1)")
    if not all(math.isfinite(b) for b in betas):
        raise NoRootError("non-finite parameters")
    h = lambda x: float(ergm_phi(betas, edge_counts, x)) - x
    grid = np.linspace(0.0, 1.0, grid_points + 1)
    vals = ergm_phi(betas, edge_counts, grid) - grid
    roots = []
    for k in range(grid_points):
        a, b = vals[k], vals[k + 1]
        if a == 0.0 and 0 < grid[k] < 1:
            roots.append(float(grid[k]))
        elif a * b < 0:
            roots.append(float(_bisect(h, grid[k], grid[k + 1])))
    roots = [r for r in roots if 0.0 < r < 1.0]
    if not roots:
        raise NoRootError("phi(x) = x has no root in (0, 1)")
    p = roots[0]
    res = float(abs(h(p)))
    if res > TOL.fixed_point_residual:
        raise NoConvergenceError(f"p* residual {res:.3g}")
    stab = float(ergm_phi_prime(betas, edge_counts, p))
    regime = "subcritical" if len(roots) == 1 and stab < 1.0 else "non-unique"
    return FixedPointResult(p, res, stab, regime, tuple(roots))


def avar_marginal(measure: BaseMeasure, beta: float, b_field: float, which: str) -> AsymptoticVariance:
    """Limiting variance of the marginal pseudolikelihood estimator of beta or B."""
    fp = solve_t_rho(measure, beta, b_field)
    t = fp.value
    d2 = tilted_var(measure, beta * t + b_field)
    if which == "beta":
        if t == 0.0:
            raise DegenerateTError("t = 0: beta is not identifiable from the marginal score")
        return AsymptoticVariance((1.0 - beta * d2) / (t * t * d2), "marginal-beta")
    if which == "B":
        return AsymptoticVariance((1.0 - beta * d2) / d2, "marginal-B")
    raise ValueError(f"which must be 'beta' or 'B', got {which!r}")


def avar_regclt(measure: BaseMeasure, beta: float, b_field: float, ups1: float, ups2: float) -> AsymptoticVariance:
    """Limiting variance of ``T_N`` on approximately regular couplings."""
    if not ups1 > 0:
        raise ValueError("upsilon1 must be positive")
    t = solve_t_rho(measure, beta, b_field).value
    d2 = tilted_var(measure, beta * t + b_field)
    return AsymptoticVariance(d2 * (ups1 - beta * ups2 * d2), "regular-graph CLT")


def _block_map(graphon: BlockGraphon, measure, beta, b_field, f):
    g = graphon.w @ (graphon.widths * f)
    return tilted_mean(measure, beta * g + b_field), g


def block_objective(graphon: BlockGraphon, measure: BaseMeasure, beta: float, b_field: float, f) -> float:
    """Mean-field free energy of a block-constant profile.

    The interaction enters with ``beta / 2``, matching the ``(beta/2) s'As``
    Hamiltonian; the entropy term is ``s xi'(s) - xi(s)`` with ``s`` the
    inverse of ``xi'`` at ``f``.
    """
    f = np.asarray(f, dtype=float)
    w = graphon.widths
    energy = 0.5 * beta * float((w * f) @ graphon.w @ (w * f)) + b_field * float(w @ f)
    ent = 0.0
    for wb, fb in zip(w, f):
        s = inverse_mean(measure, float(np.clip(fb, -1 + 1e-15, 1 - 1e-15)))
        ent += wb * (s * fb - log_mgf(measure, s))
    return energy - ent


def solve_block_fixed_point(
    graphon: BlockGraphon, measure: BaseMeasure, beta: float, b_field: float, max_iter: int = 10_000
) -> FixedPointResult:
    """Block-constant solutions of ``f = xi'(beta W f + B)`` from five starts.

    Starts: all +1, all -1, all 0, alternating +-1 and alternating -+1.
    Each candidate is iterated with damping, polished by Newton's method
    and kept when its residual is below the block tolerance; the candidate
    with the largest :func:`block_objective` is returned.
    """
    nb = graphon.n_blocks
    alt = np.where(np.arange(nb) % 2 == 0, 1.0, -1.0)
    starts = [np.ones(nb), -np.ones(nb), np.zeros(nb), alt, -alt]
    cands = []
    for f0 in starts:
        f = f0.copy()
        for _ in range(max_iter):
            nf, _ = _block_map(graphon, measure, beta, b_field, f)
            if np.max(np.abs(nf - f)) < 1e-14:
                f = nf
                break
            f = 0.5 * f + 0.5 * nf
        for _ in range(20):
            nf, g = _block_map(graphon, measure, beta, b_field, f)
            r = f - nf
            if np.max(np.abs(r)) < 1e-15:
                break
            d2 = tilted_var(measure, beta * g + b_field)
            jac = np.eye(nb) - beta * d2[:, None] * graphon.w * graphon.widths[None, :]
            try:
                f = f - np.linalg.solve(jac, r)
            except np.linalg.LinAlgError:
                break
        nf, _ = _block_map(graphon, measure, beta, b_field, f)
        res = float(np.max(np.abs(f - nf)))
        if res <= TOL.block_residual:
            cands.append((block_objective(graphon, measure, beta, b_field, f), tuple(float(x) for x in f), res))
    if not cands:
        raise NoConvergenceError("no start reached a block fixed point")
    cands.sort(key=lambda c: -c[0])
    obj, best, res = cands[0]
    distinct = []
    for c in cands:
        if all(max(abs(a - b) for a, b in zip(c[1], d)) > 1e-8 for d in distinct):
            distinct.append(c[1])
    fb = np.array(best)
    g = graphon.w @ (graphon.widths * fb)
    d2 = tilted_var(measure, beta * g + b_field)
    jac = beta * d2[:, None] * graphon.w * graphon.widths[None, :]
    stab = float(np.max(np.abs(np.linalg.eigvals(jac))))
    return FixedPointResult(best, res, stab, "block", tuple(distinct), {"objective": obj})


def joint_clt_matrices(block_f, graphon: BlockGraphon, measure: BaseMeasure, beta: float, b_field: float,
                       *, field: str = "local"):
    """Curvature ``A`` and score-variance ``B`` matrices of the joint (beta, B) fit.

    Sites in block ``b`` have spin mean ``f_b`` and local field
    ``g_b = sum_b' |b'| W(b, b') f_b'``.  With ``field="local"`` (default)
    the pseudolikelihood score weights are the local fields, so ``g``
    appears in both matrices.  ``field="profile"`` substitutes ``f`` for
    ``g``, which agrees with the local version exactly when the row
    integrals of ``W`` equal one block-wise along ``f``.

    Raises:
        NotStationaryError: ``f`` is not a block fixed point to 1e-10.
        SingularAError: ``A`` has condition number above 1e12.
    """
    f = np.asarray(block_f, dtype=float)
    nf, g = _block_map(graphon, measure, beta, b_field, f)
    res = float(np.max(np.abs(nf - f)))
    if res > TOL.block_residual:
        raise NotStationaryError(f"block profile residual {res:.3g}")
    if field == "local":
        x = g
    elif field == "profile":
        x = f
    else:
        raise ValueError("field must be 'local' or 'profile'")
    tilt = beta * (g if field == "local" else f) + b_field
    d2 = tilted_var(measure, tilt)
    w = graphon.widths
    a = np.array(
        [
            [np.sum(w * x * x * d2), np.sum(w * x * d2)],
            [np.sum(w * x * d2), np.sum(w * d2)],
        ]
    )
    wx = graphon.w @ (w * x * d2)
    w1 = graphon.w @ (w * d2)
    b = np.empty((2, 2))
    b[0, 0] = np.sum(w * x * d2 * (x - beta * wx))
    b[0, 1] = b[1, 0] = np.sum(w * x * d2 * (1.0 - beta * w1))
    b[1, 1] = np.sum(w * d2 * (1.0 - beta * w1))
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond >= TOL.condition_limit:
        raise SingularAError(f"A is singular (condition number {cond:.3g})")
    return a, b


def joint_clt_covariance(block_f, graphon, measure, beta, b_field, *, field: str = "local") -> AsymptoticVariance:
    a, b = joint_clt_matrices(block_f, graphon, measure, beta, b_field, field=field)
    ai = np.linalg.inv(a)
    cov = ai @ b @ ai
    return AsymptoticVariance(0.5 * (cov + cov.T), "joint CLT sandwich")


def _subcritical_point(betas, edge_counts):
    fp = ergm_pstar(betas, edge_counts)
    if fp.regime != "subcritical":
        raise NotSubcriticalError(f"parameters {tuple(betas)} are not sub-critical")
    return fp.value, fp.stability


def ergm_variances(betas: Sequence[float], edge_counts: Sequence[int]) -> tuple[float, float]:
    """Sub-critical edge-CLT variance ``p(1-p)(1-phi')`` and MPLE variance ``p(1-p) / (4 (1-phi'))``.

    The MPLE expression is the target used by the acceptance check.  It
    does not agree with the studentized limit of the same estimator; see
    :func:`ergm_mple_var_delta`.
    """
    p, dphi = _subcritical_point(betas, edge_counts)
    return p * (1 - p) * (1 - dphi), p * (1 - p) / (4 * (1 - dphi))


def ergm_mple_var_delta(betas: Sequence[float], edge_counts: Sequence[int]) -> float:
    """MPLE variance implied by curvature ``2p(1-p)`` and score variance ``p(1-p)(1-phi')``.

    Equals ``(1 - phi') / (4 p (1 - p))``; for the edge-only model this is
    the delta-method variance of ``logit(p_hat) / 2``.
    """
    p, dphi = _subcritical_point(betas, edge_counts)
    return (1 - dphi) / (4 * p * (1 - p))

"""Maximum pseudolikelihood estimators with sandwich confidence intervals.

Every estimator solves a score equation ``sum_i grad f_i(theta) = 0`` and
reports the curvature ``(1/n) sum grad^2 f_i`` (negative definite at an
interior maximum), a plug-in estimate of the score variance and the
resulting intervals ``theta +- z sqrt(diag(H^-1 S H^-1) / n)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from . import theory
from .ergm import ErgmModel, GraphState, eta_all, logistic
from .errors import (
    BoundaryHitError,
    MaxIterationsError,
    NoSignChangeError,
    SingularHessianError,
    SingularJacobianError,
)
from .ising import IsingModel, SpinState, local_fields
from .measure import inverse_mean, tilted_mean, tilted_var
from .stats import ergm_centered_stats, plug_in_variance
from .tolerances import TOL


@dataclass
class EstimateReport:
    """Outcome of one pseudolikelihood fit.

    Attributes:
        estimate: point estimate (length-1 or length-2 array).
        score_at_estimate: Euclidean norm of the unnormalised score.
        hessian: ``(1/n) sum grad^2 f_i`` at the estimate.
        score_variance: plug-in variance of ``n^{-1/2} sum grad f_i``.
        ci: one ``(low, high)`` interval per coordinate.
        n_eff: the ``n`` used for scaling (sites, or vertex pairs for ERGMs).
    """

    estimate: np.ndarray
    score_at_estimate: float
    hessian: np.ndarray
    score_variance: np.ndarray
    ci: list
    iterations: int
    converged: bool
    n_eff: int
    alpha: float = 0.05
    names: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def covariance(self) -> np.ndarray:
        """Sandwich covariance of ``sqrt(n) (theta_hat - theta)``."""
        hi = np.linalg.inv(self.hessian)
        c = hi @ self.score_variance @ hi
        return 0.5 * (c + c.T)

    @property
    def value(self) -> float:
        return float(self.estimate[0])

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "estimate": self.estimate.tolist(),
            "score_at_estimate": self.score_at_estimate,
            "hessian": self.hessian.tolist(),
            "score_variance": self.score_variance.tolist(),
            "covariance": self.covariance.tolist(),
            "ci": [list(c) for c in self.ci],
            "alpha": self.alpha,
            "iterations": self.iterations,
            "converged": self.converged,
            "n_eff": self.n_eff,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def normal_quantile(p: float) -> float:
    return float(norm.ppf(p))


def sandwich_ci(estimate, hessian, score_variance, n: int, alpha: float = 0.05) -> list[tuple[float, float]]:
    """Per-coordinate intervals ``theta +- z_{1-alpha/2} sqrt(diag(H^-1 S H^-1) / n)``.

    Raises:
        SingularHessianError: ``hessian`` is not invertible.
    """
    est = np.atleast_1d(np.asarray(estimate, dtype=float))
    h = np.atleast_2d(np.asarray(hessian, dtype=float))
    s = np.atleast_2d(np.asarray(score_variance, dtype=float))
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not np.all(np.isfinite(h)) or np.linalg.cond(h) >= TOL.condition_limit:
        raise SingularHessianError("curvature matrix is singular")
    hi = np.linalg.inv(h)
    var = np.diag(hi @ s @ hi)
    z = normal_quantile(1.0 - alpha / 2.0) if alpha < 1.0 else 0.0
    half = z * np.sqrt(np.maximum(var, 0.0) / n)
    return [(float(e - w), float(e + w)) for e, w in zip(est, half)]


def _report(est, score_norm, hess, svar, n, alpha, iters, names, diag=None) -> EstimateReport:
    est = np.atleast_1d(np.asarray(est, dtype=float))
    hess = np.atleast_2d(np.asarray(hess, dtype=float))
    svar = np.atleast_2d(np.asarray(svar, dtype=float))
    ci = sandwich_ci(est, hess, svar, n, alpha)
    return EstimateReport(
        est, float(score_norm), hess, svar, ci, iters,
        bool(score_norm <= TOL.score_residual_per_site * n),
        n, alpha, tuple(names), dict(diag or {}),
    )


def _solve_monotone(score: Callable[[float], float], dscore: Callable[[float], float], lo: float, hi: float):
    """Root of a strictly decreasing score: bisection then Newton polish."""
    slo, shi = score(lo), score(hi)
    if slo == 0.0:
        return lo, 0
    if shi == 0.0:
        return hi, 0
    if (slo > 0) == (shi > 0):
        raise NoSignChangeError(f"score has the same sign at {lo} and {hi} ({slo:.4g}, {shi:.4g})")
    a, b = lo, hi
    it = 0
    while b - a > TOL.bisection_width:
        mid = 0.5 * (a + b)
        sm = score(mid)
        it += 1
        if sm == 0.0:
            return mid, it
        if (sm > 0) == (slo > 0):
            a = mid
        else:
            b = mid
    x = 0.5 * (a + b)
    for _ in range(3):
        d = dscore(x)
        if d == 0.0:
            break
        nx = x - score(x) / d
        it += 1
        if not lo <= nx <= hi or abs(score(nx)) >= abs(score(x)):
            break
        x = nx
    return x, it


def _floor_diag(s, floor):
    s = np.atleast_2d(np.array(s, dtype=float))
    idx = np.diag_indices_from(s)
    s[idx] = np.maximum(s[idx], floor)
    return s


def _spins_and_fields(model: IsingModel, state):
    s = np.asarray(state.spins if isinstance(state, SpinState) else state, dtype=float)
    return s, local_fields(model, s)


def fit_beta(model: IsingModel, state, *, bracket=(0.0, 5.0), alpha: float = 0.05, floor: float | None = None) -> EstimateReport:
    """Inverse temperature with the field ``model.b_field`` known."""
    s, m = _spins_and_fields(model, state)
    n = s.size
    mu, b = model.measure, model.b_field
    score = lambda beta: math.fsum(m * (s - tilted_mean(mu, beta * m + b)))
    dscore = lambda beta: -float(np.sum(m * m * tilted_var(mu, beta * m + b)))
    est, it = _solve_monotone(score, dscore, *bracket)
    hess = dscore(est) / n
    svar = plug_in_variance(model, s, [m], beta=est)
    svar = _floor_diag(svar, 1 / math.sqrt(n) if floor is None else floor)
    return _report(est, abs(score(est)), hess, svar, n, alpha, it, ("beta",))


def fit_b_field(model: IsingModel, state, *, bracket=(-5.0, 5.0), alpha: float = 0.05, floor: float | None = None) -> EstimateReport:
    """External field with ``model.beta`` known."""
    s, m = _spins_and_fields(model, state)
    n = s.size
    mu, beta = model.measure, model.beta
    score = lambda b: math.fsum(s - tilted_mean(mu, beta * m + b))
    dscore = lambda b: -float(np.sum(tilted_var(mu, beta * m + b)))
    if beta == 0.0 and abs(s.mean()) < 1.0:
        # independent spins: the score has the closed-form root (xi')^{-1}(mean)
        est, it = inverse_mean(mu, float(s.mean())), 0
        if not bracket[0] <= est <= bracket[1]:
            raise NoSignChangeError("closed-form root outside the bracket")
    else:
        est, it = _solve_monotone(score, dscore, *bracket)
    hess = dscore(est) / n
    svar = plug_in_variance(model, s, [np.ones(n)], b_field=est)
    svar = _floor_diag(svar, 1 / math.sqrt(n) if floor is None else floor)
    return _report(est, abs(score(est)), hess, svar, n, alpha, it, ("B",))


def _damped_newton(score, jac, x0, max_iter: int, tol: float, project=None):
    x = np.asarray(x0, dtype=float)
    if project is not None:
        x = project(x)
    sc = score(x)
    norm0 = float(np.linalg.norm(sc))
    for it in range(1, max_iter + 1):
        if norm0 <= tol:
            return x, it - 1, norm0
        j = jac(x)
        if not np.all(np.isfinite(j)) or np.linalg.cond(j) >= TOL.condition_limit:
            raise SingularJacobianError(f"score Jacobian is singular at {x.tolist()}")
        step = np.linalg.solve(j, sc)
        lam = 1.0
        while True:
            cand = x + lam * step
            if project is not None:
                cand = project(cand)
            csc = score(cand)
            cn = float(np.linalg.norm(csc))
            if cn < norm0 or lam < 1e-10:
                break
            lam *= 0.5
        if cn >= norm0:
            return x, it, norm0
        x, sc, norm0 = cand, csc, cn
    if norm0 <= tol:
        return x, max_iter, norm0
    raise MaxIterationsError(f"Newton did not converge in {max_iter} iterations (|score|={norm0:.3g})")


def joint_score(mu, s, m, th) -> np.ndarray:
    """Unnormalised ``(beta, B)`` score given spins ``s`` and local fields ``m``."""
    r = s - tilted_mean(mu, th[0] * m + th[1])
    return np.array([math.fsum(m * r), math.fsum(r)])


def joint_jacobian(mu, m, th) -> np.ndarray:
    """Minus the derivative of :func:`joint_score` (positive definite)."""
    d2 = tilted_var(mu, th[0] * m + th[1])
    a, b, c = float(np.sum(m * m * d2)), float(np.sum(m * d2)), float(np.sum(d2))
    return np.array([[a, b], [b, c]])


def bipartite_score(mu, beta, s, m, c1, th) -> np.ndarray:
    """Score in ``(h, B)``, where ``h`` shifts the field on sites with ``c1 = 1``."""
    r = s - tilted_mean(mu, beta * m + th[1] + th[0] * c1)
    return np.array([math.fsum(c1 * r), math.fsum(r)])


def bipartite_jacobian(mu, beta, m, c1, th) -> np.ndarray:
    d2 = tilted_var(mu, beta * m + th[1] + th[0] * c1)
    s11 = float(np.sum(c1 * d2))
    return np.array([[s11, s11], [s11, float(np.sum(d2))]])


def fit_joint(model: IsingModel, state, *, start=None, max_iter: int = 200, alpha: float = 0.05,
              floor: float | None = None) -> EstimateReport:
    """Joint ``(beta, B)`` fit by damped Newton.

    Requires an irregular coupling: the row sums must vary, otherwise the
    two score components are asymptotically collinear.
    """
    s, m = _spins_and_fields(model, state)
    n = s.size
    mu = model.measure
    rs_var = float(np.var(model.coupling.row_sums))
    if rs_var <= TOL.irregular_row_sum_var:
        raise SingularJacobianError(f"coupling is nearly regular (row-sum variance {rs_var:.3g})")
    if start is None:
        start = (0.5, math.copysign(0.5, s.mean()) if s.mean() != 0 else 0.5)

    score = lambda th: joint_score(mu, s, m, th)
    jac = lambda th: joint_jacobian(mu, m, th)

    est, it, res = _damped_newton(score, jac, start, max_iter, TOL.score_residual_per_site * n)
    hess = -jac(est) / n
    svar = plug_in_variance(model, s, [m, np.ones(n)], beta=est[0], b_field=est[1])
    svar = _floor_diag(svar, 1 / math.sqrt(n) if floor is None else floor)
    diag = {"beta_positive": bool(est[0] > 0), "b_nonzero": bool(est[1] != 0), "row_sum_var": rs_var}
    return _report(est, res, hess, svar, n, alpha, it, ("beta", "B"), diag)


def fit_bipartite(model: IsingModel, state, *, box=((-2.0, 2.0), (-2.0, 2.0)), start=(0.0, 0.0),
                  max_iter: int = 200, alpha: float = 0.05, floor: float | None = None) -> EstimateReport:
    """Fit ``(h, B)`` where ``h`` is an extra field on the first block; ``beta`` is known.

    The report's diagnostics name the mixture component (``"H1"`` or
    ``"H2"``) whose theoretical covariance is closest, in Frobenius norm,
    to the plug-in sandwich covariance.
    """
    s, m = _spins_and_fields(model, state)
    n = s.size
    mu, beta = model.measure, model.beta
    a = model.coupling
    labels = a.block_labels if a.is_block else (np.arange(n) >= n // 2).astype(np.int64)
    c1 = (labels == 0).astype(float)
    lo = np.array([box[0][0], box[1][0]])
    hi = np.array([box[0][1], box[1][1]])
    project = lambda th: np.clip(th, lo, hi)

    score = lambda th: bipartite_score(mu, beta, s, m, c1, th)
    jac = lambda th: bipartite_jacobian(mu, beta, m, c1, th)

    est, it, res = _damped_newton(score, jac, start, max_iter, TOL.score_residual_per_site * n, project)
    if np.any(np.isclose(est, lo, rtol=0, atol=1e-12)) or np.any(np.isclose(est, hi, rtol=0, atol=1e-12)):
        raise BoundaryHitError(f"estimate {est.tolist()} is pinned to the box boundary")
    hess = -jac(est) / n
    svar = plug_in_variance(model, s, [c1, np.ones(n)], b_field=est[1], offset=est[0] * c1)
    svar = _floor_diag(svar, 1 / math.sqrt(n) if floor is None else floor)
    rep = _report(est, res, hess, svar, n, alpha, it, ("h", "B"))
    try:
        # measures are symmetric, so flipping all spins maps B to -B with the same covariances
        h1, h2, tt = theory.bipartite_mixture_covariances(mu, beta, abs(float(est[1])))
        cov = rep.covariance
        d1, d2 = float(np.linalg.norm(cov - h1)), float(np.linalg.norm(cov - h2))
        rep.diagnostics.update(
            component="H1" if d1 <= d2 else "H2", dist_h1=d1, dist_h2=d2,
            H1=h1.tolist(), H2=h2.tolist(), tilde_t=list(tt),
        )
    except (ValueError, ArithmeticError) as exc:
        rep.diagnostics["component_error"] = str(exc)
    return rep


def fit_ergm_beta1(model: ErgmModel, state: GraphState, *, bracket=(-3.0, 3.0), alpha: float = 0.05,
                   floor: float | None = None) -> EstimateReport:
    """Edge coefficient with the higher-order coefficients known.

    The interval is studentized: curvature ``(2/C) sum L(1 - L)`` and
    score variance ``max(U + V, a)`` from the centered edge statistics at
    the estimate, ``C`` the number of vertex pairs.
    """
    npairs = model.n_pairs
    y = state.edge_vector()
    rest = eta_all(model, state) - 2.0 * model.betas[0]
    score = lambda b1: math.fsum(y - logistic(rest + 2.0 * b1))

    def dscore(b1):
        lam = logistic(rest + 2.0 * b1)
        return -2.0 * float(np.sum(lam * (1.0 - lam)))

    est, it = _solve_monotone(score, dscore, *bracket)
    curv = -dscore(est) / npairs
    st = ergm_centered_stats(model.with_beta1(est), state, floor)
    svar = max(st.u_stat + st.v_stat, st.a_floor)
    diag = {"U": st.u_stat, "V": st.v_stat, "curvature": curv}
    return _report(est, abs(score(est)), -curv, svar, npairs, alpha, it, ("beta1",), diag)


def fit_ergm_edge_only_closed_form(state: GraphState) -> float:
    """``logit(density) / 2``: the exact root when only the edge term is present."""
    n = state.n
    dens = state.edge_count() / (n * (n - 1) / 2)
    return 0.5 * math.log(dens / (1.0 - dens))

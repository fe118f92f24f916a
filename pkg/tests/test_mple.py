import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condcenter import coupling as cpl
from condcenter import mple
from condcenter.ergm import ErgmModel, GraphState, eta_all, logistic, sample as ergm_sample
from condcenter.errors import NoSignChangeError, SingularHessianError, SingularJacobianError
from condcenter.ising import IsingModel, initial_state, local_fields, run_sweeps
from condcenter.measure import inverse_mean, make_rademacher, tilted_mean

from conftest import curie_weiss

RAD = make_rademacher()


def _draw(model, seed, sweeps=80):
    rng = np.random.default_rng(seed)
    return run_sweeps(model, initial_state(model, rng), sweeps, rng)


def _two_block(n=400, beta=0.3, b=0.2):
    g = cpl.BlockGraphon.from_arrays([0.0, 0.5, 1.0], [[1.5, 1.0], [1.0, 0.5]])
    return IsingModel(cpl.from_block_graphon(g, n), beta, b, RAD)


def _check_report(rep, n):
    assert rep.converged
    assert rep.score_at_estimate <= 1e-9 * n
    assert np.all(np.linalg.eigvalsh(0.5 * (rep.hessian + rep.hessian.T)) < 0)
    for (lo, hi), e in zip(rep.ci, rep.estimate):
        assert lo <= e <= hi


def test_normal_quantile():
    assert mple.normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-12)
    assert mple.normal_quantile(0.5) == 0.0
    assert mple.normal_quantile(1e-6) == pytest.approx(-4.753424308822899, abs=1e-9)


def test_sandwich_information_equality():
    (lo, hi), = mple.sandwich_ci([0.3], [[-2.0]], [[2.0]], 400, 0.05)
    half = 1.959963984540054 / math.sqrt(400 * 2.0)
    assert (lo, hi) == pytest.approx((0.3 - half, 0.3 + half), abs=1e-12)


def test_sandwich_degenerate_and_singular():
    assert mple.sandwich_ci([0.1, 0.2], np.eye(2), np.eye(2), 10, 1.0) == [(0.1, 0.1), (0.2, 0.2)]
    with pytest.raises(SingularHessianError):
        mple.sandwich_ci([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]], np.eye(2), 10)
    with pytest.raises(ValueError):
        mple.sandwich_ci([0.0], [[1.0]], [[1.0]], 10, 0.0)


def test_fit_beta_null():
    model = IsingModel(cpl.erdos_renyi(600, 0.05, np.random.default_rng(3)), 0.0, 0.3, RAD)
    s = _draw(model, 4, 2)
    rep = mple.fit_beta(model, s, bracket=(-2.0, 2.0))
    se = math.sqrt(rep.covariance[0, 0] / 600)
    assert abs(rep.value) <= 4 * se
    _check_report(rep, 600)


def test_fit_beta_score_monotone():
    model = curie_weiss(500, 0.5, 0.2)
    s = _draw(model, 5).spins
    m = local_fields(model, s)
    grid = np.linspace(0, 5, 60)
    h = [math.fsum(m * (s - tilted_mean(RAD, b * m + 0.2))) for b in grid]
    assert np.all(np.diff(h) < 0)
    _check_report(mple.fit_beta(model, s), 500)


def test_fit_beta_no_sign_change():
    model = curie_weiss(200, 0.5, 0.2)
    with pytest.raises(NoSignChangeError):
        mple.fit_beta(model, np.ones(200), bracket=(0.0, 1.0))


def test_fit_b_field_closed_form(three_atom):
    model = IsingModel(cpl.complete_graph(300), 0.0, 0.4, three_atom)
    s = _draw(model, 6, 1).spins
    rep = mple.fit_b_field(model, s)
    assert rep.value == pytest.approx(inverse_mean(three_atom, float(s.mean())), abs=1e-12)
    assert rep.score_at_estimate <= 1e-9 * 300


def test_fit_b_field_root():
    model = curie_weiss(800, 0.5, 0.2)
    s = _draw(model, 7)
    rep = mple.fit_b_field(model, s)
    _check_report(rep, 800)
    assert abs(rep.value - 0.2) < 0.25


def test_fit_joint_regular_rejected():
    model = curie_weiss(50, 0.3, 0.2)
    with pytest.raises(SingularJacobianError):
        mple.fit_joint(model, np.ones(50))


def test_fit_joint_null():
    model = _two_block(400, 0.0, 0.2)
    rep = mple.fit_joint(model, _draw(model, 8, 2))
    _check_report(rep, 400)
    assert abs(rep.estimate[0]) <= 4 * math.sqrt(rep.covariance[0, 0] / 400)
    assert rep.diagnostics["row_sum_var"] > 1e-3


def test_fit_bipartite_null():
    model = IsingModel(cpl.bipartite_complete(400), 0.0, 0.2, RAD)
    rep = mple.fit_bipartite(model, _draw(model, 9, 2))
    _check_report(rep, 400)
    assert abs(rep.estimate[0]) <= 4 * math.sqrt(rep.covariance[0, 0] / 400)
    assert rep.diagnostics["component"] in ("H1", "H2")


def test_fit_bipartite_asymmetric_component():
    model = IsingModel(cpl.bipartite_complete(400), -2.0, 0.2, RAD)
    rng = np.random.default_rng(10)
    s = run_sweeps(model, initial_state(model, rng, "mode_basin"), 60, rng)
    rep = mple.fit_bipartite(model, s)
    _check_report(rep, 400)
    assert "tilde_t" in rep.diagnostics


def test_ergm_edge_only_closed_form(rng):
    model = ErgmModel.from_names(20, [("edge", -0.3)])
    g = ergm_sample(model, 3, 1, 1, rng)[0]
    rep = mple.fit_ergm_beta1(model, g)
    assert rep.value == pytest.approx(mple.fit_ergm_edge_only_closed_form(g), abs=1e-9)
    _check_report(rep, model.n_pairs)


def test_ergm_score_monotone(rng):
    model = ErgmModel.from_names(15, [("edge", -0.4), ("triangle", 0.05)])
    g = ergm_sample(model, 5, 1, 1, rng)[0]
    y = g.edge_vector()
    rest = eta_all(model, g) - 2 * model.betas[0]
    grid = np.linspace(-3, 3, 50)
    sc = [math.fsum(y - logistic(rest + 2 * b)) for b in grid]
    assert np.all(np.diff(sc) < 0)


def test_ergm_no_sign_change():
    model = ErgmModel.from_names(6, [("edge", -0.3), ("triangle", 0.1)])
    with pytest.raises(NoSignChangeError):
        mple.fit_ergm_beta1(model, GraphState.empty(6))


def test_report_serialization():
    model = curie_weiss(300, 0.5, 0.2)
    rep = mple.fit_beta(model, _draw(model, 11))
    d = json.loads(rep.to_json())
    assert d["names"] == ["beta"] and d["estimate"] == [rep.value]
    assert d["covariance"][0][0] == pytest.approx(rep.covariance[0, 0])


def _fd_jacobian(fn, th, h=1e-6):
    cols = []
    for k in range(len(th)):
        e = np.zeros(len(th))
        e[k] = h
        cols.append((fn(th + e) - fn(th - e)) / (2 * h))
    return np.column_stack(cols)


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_joint_jacobian_finite_difference(seed):
    rng = np.random.default_rng(seed)
    model = _two_block(60)
    s = rng.choice([-1.0, 1.0], size=60)
    m = local_fields(model, s)
    th = rng.uniform(-1, 1, 2)
    fd = _fd_jacobian(lambda x: mple.joint_score(RAD, s, m, x), th)
    assert _rel(-mple.joint_jacobian(RAD, m, th), fd) < 1e-6


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_bipartite_jacobian_finite_difference(seed):
    rng = np.random.default_rng(seed)
    model = IsingModel(cpl.bipartite_complete(40), -1.5, 0.2, RAD)
    s = rng.choice([-1.0, 1.0], size=40)
    m = local_fields(model, s)
    c1 = (np.arange(40) < 20).astype(float)
    th = rng.uniform(-1, 1, 2)
    fd = _fd_jacobian(lambda x: mple.bipartite_score(RAD, -1.5, s, m, c1, x), th)
    assert _rel(-mple.bipartite_jacobian(RAD, -1.5, m, c1, th), fd) < 1e-6


def test_marginal_hessians_finite_difference(three_atom):
    model = curie_weiss(200, 0.5, 0.2, three_atom)
    s = _draw(model, 12).spins
    m = local_fields(model, s)
    h = 1e-6
    rep = mple.fit_beta(model, s)
    score = lambda b: math.fsum(m * (s - tilted_mean(three_atom, b * m + 0.2)))
    fd = (score(rep.value + h) - score(rep.value - h)) / (2 * h)
    assert rep.hessian[0, 0] * 200 == pytest.approx(fd, rel=1e-6)
    rep = mple.fit_b_field(model, s)
    score = lambda b: math.fsum(s - tilted_mean(three_atom, 0.5 * m + b))
    fd = (score(rep.value + h) - score(rep.value - h)) / (2 * h)
    assert rep.hessian[0, 0] * 200 == pytest.approx(fd, rel=1e-6)


def test_ergm_hessian_finite_difference(rng):
    model = ErgmModel.from_names(12, [("edge", -0.3), ("two_star", 0.02), ("triangle", 0.1)])
    g = ergm_sample(model, 4, 1, 1, rng)[0]
    rep = mple.fit_ergm_beta1(model, g)
    y, rest = g.edge_vector(), eta_all(model, g) - 2 * model.betas[0]
    score = lambda b: math.fsum(y - logistic(rest + 2 * b))
    h = 1e-6
    fd = (score(rep.value + h) - score(rep.value - h)) / (2 * h)
    assert rep.hessian[0, 0] * model.n_pairs == pytest.approx(fd, rel=1e-6)


def test_joint_report_hessian_matches_jacobian():
    model = _two_block(300)
    s = _draw(model, 13)
    rep = mple.fit_joint(model, s)
    m = local_fields(model, s.spins)
    fd = _fd_jacobian(lambda x: mple.joint_score(RAD, s.spins, m, x), rep.estimate)
    assert _rel(rep.hessian * 300, fd) < 1e-6


def test_beta_equivariance_in_known_field():
    model = curie_weiss(500, 0.5, 0.2)
    s = _draw(model, 14).spins
    base = mple.fit_beta(model, s).value
    for delta in (1e-5, 1e-4, 1e-3):
        moved = mple.fit_beta(IsingModel(model.coupling, 0.5, 0.2 + delta, RAD), s).value
        # C = 10 is loose against the observed slope of about 0.3 to 1
        assert abs(moved - base) <= 10 * delta

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from condcenter import theory
from condcenter.coupling import BlockGraphon
from condcenter.errors import DegenerateTError, NegativeRError, NotStationaryError, NotSubcriticalError, SingularAError
from condcenter.measure import make_discrete, make_rademacher, tilted_mean, tilted_var

RAD = make_rademacher()
EDGE_TRI = (1, 3)
ERGM_BETAS = (-0.4, 0.05)

# high-precision references computed independently with mpmath
T_TANH_2T = 0.957504024077268741
CW_T = 0.364782198287614550
AVAR_BETA = 4.91102279757930861
AVAR_B = 0.653490415876909262
REGCLT = 0.491146712877610837
PSTAR = 0.316489868515719719
PHI_PRIME = 0.0410786185988183305
EDGE_VAR = 0.207437739253016179
MPLE_VAR = 0.0563977495544338034
MPLE_DELTA = 1.10820024723994431
BIPARTITE_PAIR = (0.969271541889358921, -0.940057444537917270)
BETA0 = -1.00996690881839171


def test_t_rho_regimes():
    fp = theory.solve_t_rho(RAD, 0.0, 0.3)
    assert fp.value == pytest.approx(math.tanh(0.3), abs=1e-15) and fp.regime == "Theta12"
    fp = theory.solve_t_rho(RAD, 0.8, 0.0)
    assert fp.value == 0.0 and fp.regime == "Theta11"
    fp = theory.solve_t_rho(RAD, 2.0, 0.0)
    assert fp.regime == "Theta2"
    assert fp.value == pytest.approx(T_TANH_2T, abs=1e-13)
    assert fp.stability == pytest.approx(2 / math.cosh(2 * T_TANH_2T) ** 2, abs=1e-12) and fp.stability < 1
    assert theory.solve_t_rho(RAD, 0.5, 0.2).value == pytest.approx(CW_T, abs=1e-13)


def test_t_rho_negative_r():
    with pytest.raises(NegativeRError):
        theory.solve_t_rho(RAD, -0.1, 0.2)


def test_t_rho_negative_field_sign():
    fp = theory.solve_t_rho(RAD, 0.5, -0.2)
    assert fp.value == pytest.approx(-CW_T, abs=1e-13)


@given(st.floats(0.0, 4.0), st.floats(-2.0, 2.0))
def test_t_rho_residual_and_stability(r, s):
    mu = make_discrete([(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)])
    fp = theory.solve_t_rho(mu, r, s)
    assert abs(fp.value - tilted_mean(mu, r * fp.value + s)) <= 1e-12
    if fp.regime != "Theta2" and fp.value != 0.0:
        assert fp.stability < 1


def test_bipartite_pair_null():
    fp = theory.solve_bipartite_pair(RAD, 0.0, 0.2)
    assert fp.regime == "symmetric"
    assert fp.value == pytest.approx((math.tanh(0.2),) * 2, abs=1e-15)


def test_bipartite_pair_asymmetric():
    fp = theory.solve_bipartite_pair(RAD, -2.0, 0.2)
    assert fp.regime == "asymmetric"
    t1, t2 = fp.value
    assert (t1, t2) == pytest.approx(BIPARTITE_PAIR, abs=1e-12)
    assert abs(t1 - math.tanh(-2 * t2 + 0.2)) <= 1e-12
    assert abs(t2 - math.tanh(-2 * t1 + 0.2)) <= 1e-12


def test_bipartite_pair_needs_positive_field():
    with pytest.raises(ValueError):
        theory.solve_bipartite_pair(RAD, -2.0, 0.0)


def test_beta0_location():
    b0 = theory.locate_beta0(RAD, 0.2)
    assert b0 == pytest.approx(BETA0, abs=1e-8)
    assert theory.solve_bipartite_pair(RAD, b0 - 1e-3, 0.2).regime == "asymmetric"
    assert theory.solve_bipartite_pair(RAD, b0 + 1e-3, 0.2).regime == "symmetric"


def test_bipartite_mixture_covariances_swap():
    h1, h2, (x, y) = theory.bipartite_mixture_covariances(RAD, -2.0, 0.2)
    assert (x, y) == pytest.approx((1 - BIPARTITE_PAIR[1] ** 2, 1 - BIPARTITE_PAIR[0] ** 2), rel=1e-10)
    for h in (h1, h2):
        assert np.allclose(h, h.T) and np.all(np.linalg.eigvalsh(h) > 0)
    assert not np.allclose(h1, h2)


def test_ergm_pstar_edge_only():
    fp = theory.ergm_pstar([0.3], [1])
    assert fp.value == pytest.approx(1 / (1 + math.exp(-0.6)), abs=1e-12)
    assert fp.stability == 0.0 and fp.regime == "subcritical"


def test_ergm_pstar_edge_triangle():
    fp = theory.ergm_pstar(ERGM_BETAS, EDGE_TRI)
    p = fp.value
    assert p == pytest.approx(PSTAR, abs=1e-12)
    assert fp.stability == pytest.approx(12 * 0.05 * p * p * (1 - p), rel=1e-12)
    assert fp.stability == pytest.approx(PHI_PRIME, rel=1e-10)
    assert abs(p - theory.ergm_phi(ERGM_BETAS, EDGE_TRI, p)) <= 1e-12


def test_ergm_phi_prime_finite_difference():
    for x in (0.1, 0.4, 0.8):
        h = 1e-6
        fd = (theory.ergm_phi((-0.5, 0.3, 0.4), (1, 2, 3), x + h) - theory.ergm_phi((-0.5, 0.3, 0.4), (1, 2, 3), x - h)) / (2 * h)
        assert float(theory.ergm_phi_prime((-0.5, 0.3, 0.4), (1, 2, 3), x)) == pytest.approx(float(fd), rel=1e-6)


def test_ergm_pstar_multiple_roots():
    fp = theory.ergm_pstar((-1.5, 2.0), EDGE_TRI)
    assert len(fp.roots) == 3 and fp.regime == "non-unique"


@pytest.mark.parametrize("betas", [ERGM_BETAS, (-1.5, 2.0), (0.2, -0.3), (-0.8, 0.5)])
def test_ergm_pstar_grid_refinement(betas):
    a = theory.ergm_pstar(betas, EDGE_TRI, 10_000)
    b = theory.ergm_pstar(betas, EDGE_TRI, 100_000)
    assert len(a.roots) == len(b.roots)
    assert np.allclose(a.roots, b.roots, atol=1e-11)


def test_avar_marginal_values():
    assert theory.avar_marginal(RAD, 0.0, 0.3, "B").value == pytest.approx(1 / (1 - math.tanh(0.3) ** 2), rel=1e-13)
    vb = theory.avar_marginal(RAD, 0.5, 0.2, "beta").value
    vB = theory.avar_marginal(RAD, 0.5, 0.2, "B").value
    assert vb == pytest.approx(AVAR_BETA, rel=1e-11)
    assert vB == pytest.approx(AVAR_B, rel=1e-11)
    d2 = tilted_var(RAD, 0.5 * CW_T + 0.2)
    assert 1 - 0.5 * d2 > 0


def test_avar_marginal_degenerate():
    with pytest.raises(DegenerateTError):
        theory.avar_marginal(RAD, 0.7, 0.0, "beta")
    with pytest.raises(ValueError):
        theory.avar_marginal(RAD, 0.7, 0.2, "gamma")


def test_avar_regclt_values():
    assert theory.avar_regclt(RAD, 0.5, 0.2, 1.0, 1.0).value == pytest.approx(REGCLT, rel=1e-11)
    assert theory.avar_regclt(RAD, 1.0, 0.0, 1.0, 1.0).value == 0.0
    d2 = tilted_var(RAD, 0.5 * CW_T + 0.2)
    assert theory.avar_regclt(RAD, 0.5, 0.2, 2.0, 0.0).value == pytest.approx(2.0 * d2, rel=1e-13)


def test_avar_regclt_positive_scan():
    mu = make_discrete([(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)])
    for measure in (RAD, mu):
        for beta in np.linspace(0, 3, 13):
            for b in np.linspace(-1, 1, 9):
                assert theory.avar_regclt(measure, beta, b, 1.0, 0.9).value > 0


def test_joint_clt_constant_graphon_singular():
    g = BlockGraphon.from_arrays([0.0, 1.0], [[1.0]])
    f = theory.solve_block_fixed_point(g, RAD, 0.3, 0.2).value
    with pytest.raises(SingularAError):
        theory.joint_clt_matrices(f, g, RAD, 0.3, 0.2)


def test_joint_clt_two_block():
    g = BlockGraphon.from_arrays([0.0, 0.5, 1.0], [[1.5, 1.0], [1.0, 0.5]])
    fp = theory.solve_block_fixed_point(g, RAD, 0.3, 0.2)
    assert np.allclose(g.row_integrals(), [1.25, 0.75])
    cov = theory.joint_clt_covariance(fp.value, g, RAD, 0.3, 0.2).value
    assert np.allclose(cov, cov.T)
    assert np.all(np.linalg.eigvalsh(cov) > 0)
    with pytest.raises(NotStationaryError):
        theory.joint_clt_matrices((0.1, 0.1), g, RAD, 0.3, 0.2)


def test_joint_clt_null_beta():
    g = BlockGraphon.from_arrays([0.0, 0.5, 1.0], [[1.5, 1.0], [1.0, 0.5]])
    f = np.full(2, math.tanh(0.2))
    a, b = theory.joint_clt_matrices(f, g, RAD, 0.0, 0.2)
    x = g.w @ (g.widths * f)
    d2 = 1 - math.tanh(0.2) ** 2
    hand = d2 * np.array([[np.mean(x * x), np.mean(x)], [np.mean(x), 1.0]])
    assert np.allclose(a, hand, atol=1e-15) and np.allclose(b, hand, atol=1e-15)


def test_block_fixed_point_matches_curie_weiss():
    g = BlockGraphon.from_arrays([0.0, 1.0], [[1.0]])
    fp = theory.solve_block_fixed_point(g, RAD, 0.5, 0.2)
    assert fp.value[0] == pytest.approx(CW_T, abs=1e-12)


def test_ergm_variances():
    p = 1 / (1 + math.exp(0.5))
    ev, mv = theory.ergm_variances([-0.25], [1])
    assert (ev, mv) == pytest.approx((p * (1 - p), p * (1 - p) / 4), rel=1e-12)
    ev, mv = theory.ergm_variances(ERGM_BETAS, EDGE_TRI)
    assert ev == pytest.approx(EDGE_VAR, rel=1e-11)
    assert mv == pytest.approx(MPLE_VAR, rel=1e-11)
    assert theory.ergm_mple_var_delta(ERGM_BETAS, EDGE_TRI) == pytest.approx(MPLE_DELTA, rel=1e-11)


def test_ergm_variances_small_triangle_limit():
    base = np.array(theory.ergm_variances([-0.4], [1]))
    for b2 in (1e-2, 1e-3, 1e-4):
        v = np.array(theory.ergm_variances([-0.4, b2], EDGE_TRI))
        assert np.max(np.abs(v - base)) <= 2 * b2


def test_ergm_variances_supercritical():
    with pytest.raises(NotSubcriticalError):
        theory.ergm_variances((-1.5, 2.0), EDGE_TRI)

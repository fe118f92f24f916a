import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from condcenter import coupling as cpl
from condcenter.errors import BadDistributionError, BadProbabilityError, InfeasibleDegreeError, OddSizeError


def _graphs(seed):
    rng = np.random.default_rng(seed)
    w = cpl.BlockGraphon.from_arrays([0.0, 0.5, 1.0], [[1.5, 1.0], [1.0, 0.5]])
    return [
        cpl.complete_graph(30),
        cpl.regular_graph(30, 4, rng),
        cpl.erdos_renyi(30, 0.3, rng),
        cpl.sbm(30, 0.6, 0.2, rng),
        cpl.bipartite_complete(30),
        cpl.from_block_graphon(w, 30),
        cpl.wigner(30, {"kind": "exponential", "mean": 1.0}, 1.0, rng),
    ]


def test_complete_small():
    a = cpl.complete_graph(3)
    assert np.allclose(a.dense(), 0.5 * (1 - np.eye(3)))
    assert np.all(a.row_sums == 1.0)


def test_complete_row_sums_exact():
    assert np.max(cpl.complete_graph(100).row_sums) == 1.0


def test_complete_too_small():
    with pytest.raises(ValueError):
        cpl.complete_graph(1)


def test_regular_unique_on_four(rng):
    a = cpl.regular_graph(4, 3, rng)
    assert np.allclose(a.dense(), (1 - np.eye(4)) / 3)


def test_regular_degrees(rng):
    a = cpl.regular_graph(1000, 10, rng)
    assert np.all(a.row_sums == 1.0)
    assert np.all(np.count_nonzero(a.dense(), axis=1) == 10)


def test_regular_infeasible(rng):
    with pytest.raises(InfeasibleDegreeError):
        cpl.regular_graph(5, 3, rng)
    with pytest.raises(InfeasibleDegreeError):
        cpl.regular_graph(4, 4, rng)


def test_er_full_probability_is_complete(rng):
    a = cpl.erdos_renyi(12, 1.0, rng)
    assert np.allclose(a.dense(), cpl.complete_graph(12).dense(), rtol=0, atol=1e-15)


def test_er_bad_probability(rng):
    for p in (0.0, -0.1, 1.5):
        with pytest.raises(BadProbabilityError):
            cpl.erdos_renyi(10, p, rng)


def test_er_max_row_sum_band():
    # stated as holding with probability >= 0.999, so all 100 seeds must land in the band
    n = 2000
    p = 10 * math.log(n) / n
    maxima = [cpl.erdos_renyi(n, p, np.random.default_rng(seed)).row_sums.max() for seed in range(100)]
    outside = [m for m in maxima if not 0.5 <= m <= 1.5]
    assert not outside, f"{len(outside)} of 100 seeds outside [0.5, 1.5], worst {max(maxima):.4f}"


def test_er_row_sums_concentrate():
    n = 2000
    p = 10 * math.log(n) / n
    rs = cpl.erdos_renyi(n, p, np.random.default_rng(0)).row_sums
    assert abs(rs.mean() - 1.0) < 0.01
    # extreme-value scale of 2000 binomial degrees with mean about 76
    assert rs.max() < 1.0 + 6 * math.sqrt((1 - p) / ((n - 1) * p))


def test_sbm_scaling_and_errors(rng):
    a = cpl.sbm(40, 0.3, 0.3, rng)
    e = cpl.erdos_renyi(40, 0.3, rng)
    # same edge law, scale 2/(n(a+b)) against 1/((n-1)p)
    assert a.vals[0] / e.vals[0] == pytest.approx((2 / (40 * 0.6)) * (39 * 0.3))
    with pytest.raises(OddSizeError):
        cpl.sbm(7, 0.5, 0.5, rng)
    with pytest.raises(BadProbabilityError):
        cpl.sbm(8, 0.5, 0.0, rng)


def test_sbm_mean_row_sum():
    means = [cpl.sbm(500, 0.2, 0.05, np.random.default_rng(s)).row_sums.mean() for s in range(50)]
    assert abs(np.mean(means) - 1.0) < 0.05


def test_bipartite_small():
    d = cpl.bipartite_complete(4).dense()
    expect = np.array([[0, 0, 0.5, 0.5], [0, 0, 0.5, 0.5], [0.5, 0.5, 0, 0], [0.5, 0.5, 0, 0]])
    assert np.array_equal(d, expect)
    with pytest.raises(OddSizeError):
        cpl.bipartite_complete(3)


def test_bipartite_block_quadratic_form_vanishes():
    a = cpl.bipartite_complete(1000)
    c = (np.arange(1000) < 500).astype(float)
    assert c @ a.matvec(c) == 0.0
    assert np.all(a.row_sums == 1.0)


def test_graphon_constant():
    a = cpl.from_block_graphon(cpl.BlockGraphon.from_arrays([0, 1], [[1.0]]), 10)
    assert np.allclose(a.dense(), (1 - np.eye(10)) / 10)


def test_graphon_bipartite_matches():
    w = cpl.BlockGraphon.from_arrays([0, 0.5, 1], [[0, 2], [2, 0]])
    assert np.array_equal(cpl.from_block_graphon(w, 20).dense(), cpl.bipartite_complete(20).dense())


def test_graphon_irregular_row_integrals():
    w = cpl.BlockGraphon.from_arrays([0, 0.5, 1], [[1.5, 1.0], [1.0, 0.5]])
    assert np.allclose(w.row_integrals(), [1.25, 0.75])


@pytest.mark.parametrize(
    "bounds, vals",
    [([0, 1.2], [[1]]), ([0, 0.5, 0.5, 1], np.ones((3, 3))), ([0, 0.5, 1], [[1, 2], [0, 1]]), ([0, 1], [[-1]])],
)
def test_graphon_rejects(bounds, vals):
    with pytest.raises(ValueError):
        cpl.BlockGraphon.from_arrays(bounds, vals)


def test_wigner_mean_row_sum():
    a = cpl.wigner(2000, {"kind": "exponential", "mean": 1.0}, 1.0, np.random.default_rng(1))
    assert abs(a.row_sums.mean() - 1.0) < 0.1


def test_wigner_degenerate_atom(rng):
    a = cpl.wigner(8, {"kind": "constant", "value": 0.7}, 0.7, rng)
    assert np.allclose(a.dense(), (1 - np.eye(8)) / 8)


def test_wigner_errors(rng):
    with pytest.raises(BadDistributionError):
        cpl.wigner(8, {"kind": "exponential", "mean": 1.0}, 0.0, rng)
    with pytest.raises(BadDistributionError):
        cpl.wigner(8, {"kind": "cauchy"}, 1.0, rng)
    with pytest.raises(BadDistributionError):
        cpl.wigner(8, {"kind": "atoms", "atoms": [[-1.0, 1.0]]}, 1.0, rng)


def test_validate_complete():
    rep = cpl.validate(cpl.complete_graph(100))
    assert rep.max_row_sum == 1.0
    assert rep.frobenius_ratio == pytest.approx(1 / 99, rel=1e-12)
    assert rep.ok


def test_validate_regular(rng):
    rep = cpl.validate(cpl.regular_graph(200, 8, rng))
    assert rep.frobenius_ratio == pytest.approx(1 / 8, rel=1e-12)


def test_validate_flags_asymmetry():
    m = cpl.complete_graph(5).dense()
    m[0, 1] += 0.1
    rep = cpl.validate(m)
    assert not rep.symmetric and not rep.ok


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_row_sums_match_entries(seed):
    for a in _graphs(seed):
        rebuilt = a.dense().sum(axis=1)
        assert np.allclose(rebuilt, a.row_sums, rtol=1e-12, atol=1e-12)
        assert cpl.validate(a).row_sums_consistent


def test_generators_deterministic():
    for a, b in zip(_graphs(7), _graphs(7)):
        assert a == b
        assert a.vals.tobytes() == b.vals.tobytes()


def test_csv_round_trip(tmp_path):
    for k, a in enumerate(_graphs(3)):
        path = tmp_path / f"a{k}.csv"
        cpl.save_csv(a, path)
        b = cpl.load_csv(path)
        assert a == b and a.vals.tobytes() == b.vals.tobytes()


@given(st.integers(5, 40), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_regular_graph_property(n, d, seed):
    if d >= n or (n * d) % 2:
        return
    a = cpl.regular_graph(n, d, np.random.default_rng(seed))
    dense = a.dense()
    assert np.array_equal(dense, dense.T) and np.all(np.diag(dense) == 0)
    assert np.all(np.count_nonzero(dense, axis=1) == d)


@given(st.integers(2, 30), st.floats(0.05, 1.0), st.integers(0, 2**32 - 1))
def test_matvec_matches_dense(n, p, seed):
    rng = np.random.default_rng(seed)
    a = cpl.erdos_renyi(n, p, rng)
    x = rng.normal(size=n)
    assert np.allclose(a.matvec(x), a.dense() @ x, atol=1e-12)
    b = cpl.complete_graph(n)
    assert np.allclose(b.matvec(x), b.dense() @ x, atol=1e-12)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from condcenter.errors import (
    AsymmetricMeasureError,
    BadWeightsError,
    DegenerateMeasureError,
    MissingEndpointsError,
    NonFiniteTiltError,
)
from condcenter.measure import (
    BaseMeasure,
    cumulant_derivs,
    ghs_check,
    inverse_mean,
    log_mgf,
    make_discrete,
    make_rademacher,
    tilted_mean,
    tilted_sample,
    tilted_var,
)


@st.composite
def symmetric_measures(draw):
    """Random symmetric measures with atoms at the endpoints, optionally at 0."""
    k = draw(st.integers(0, 3))
    inner = sorted(set(draw(st.lists(st.floats(0.05, 0.95), min_size=k, max_size=k))))
    values = [1.0] + list(reversed(inner))
    raw = [draw(st.floats(0.05, 1.0)) for _ in values]
    zero = draw(st.booleans())
    z = draw(st.floats(0.05, 1.0)) if zero else 0.0
    total = 2 * sum(raw) + z
    atoms = [(v, w / total) for v, w in zip(values, raw)] + [(-v, w / total) for v, w in zip(values, raw)]
    if zero:
        atoms.append((0.0, 1.0 - sum(w for _, w in atoms)))
    else:
        # absorb rounding into the endpoint pair
        drift = (1.0 - sum(w for _, w in atoms)) / 2
        atoms[0] = (1.0, atoms[0][1] + drift)
        atoms[len(values)] = (-1.0, atoms[len(values)][1] + drift)
    return make_discrete(atoms)


def test_rademacher_at_zero():
    cv = cumulant_derivs(make_rademacher(), 0.0)
    assert (cv.xi, cv.d1, cv.d2, cv.d3) == (0.0, 0.0, 1.0, 0.0)


def test_rademacher_closed_form():
    m = make_rademacher()
    direct = (0.5 * math.exp(0.5) - 0.5 * math.exp(-0.5)) / (0.5 * math.exp(0.5) + 0.5 * math.exp(-0.5))
    assert tilted_mean(m, 0.5) == pytest.approx(direct, abs=1e-15)
    cv = cumulant_derivs(m, 1.2)
    assert cv.d1 == pytest.approx(math.tanh(1.2), abs=1e-15)
    assert cv.d2 == pytest.approx(1 - math.tanh(1.2) ** 2, abs=1e-15)


def test_rademacher_ghs_grid():
    m = make_rademacher()
    assert all(cumulant_derivs(m, x).d3 <= 0 for x in np.linspace(0.01, 5, 500))
    assert ghs_check(m, np.linspace(0.1, 5, 50))


def test_discrete_two_atoms_is_rademacher():
    m = make_discrete([(-1, 0.5), (1, 0.5)])
    assert m.is_rademacher
    assert np.array_equal(m.support, make_rademacher().support)


def test_three_atom_variance(three_atom):
    assert cumulant_derivs(three_atom, 0.0).d2 == pytest.approx(0.5, abs=1e-15)


def test_three_atom_reference_values(three_atom):
    # frozen from a 30-digit mpmath evaluation
    cv = cumulant_derivs(three_atom, 0.7)
    assert cv.xi == pytest.approx(0.120077736651025152, rel=1e-13)
    assert cv.d1 == pytest.approx(0.336375544336332193, rel=1e-13)
    assert cv.d2 == pytest.approx(0.443425746586218107, rel=1e-13)
    assert cv.d3 == pytest.approx(-0.149157576880683613, rel=1e-12)


def test_three_atom_ghs_recorded(three_atom):
    # recorded from a numeric scan: both three-atom measures satisfy the sign condition
    uniform = make_discrete([(-1, 1 / 3), (0, 1 / 3), (1, 1 / 3)])
    assert ghs_check(uniform, np.linspace(0.1, 5, 50))
    assert ghs_check(three_atom, np.linspace(0.1, 5, 50))


@pytest.mark.parametrize(
    "atoms, err",
    [
        ([(-1, 0.3), (1, 0.7)], AsymmetricMeasureError),
        ([(-0.5, 0.5), (0.5, 0.5)], MissingEndpointsError),
        ([(1.0, 1.0)], DegenerateMeasureError),
        ([], DegenerateMeasureError),
        ([(-1, 0.5), (1, 0.6)], BadWeightsError),
        ([(-1, 0.5), (0, 0.0), (1, 0.5)], BadWeightsError),
        ([(-2, 0.5), (2, 0.5)], BadWeightsError),
    ],
)
def test_make_discrete_rejects(atoms, err):
    with pytest.raises(err):
        make_discrete(atoms)


def test_json_round_trip(three_atom):
    back = BaseMeasure.from_json(three_atom.to_json())
    assert back.atoms() == three_atom.atoms()


def test_nonfinite_tilt():
    m = make_rademacher()
    for bad in (math.inf, math.nan):
        with pytest.raises(NonFiniteTiltError):
            cumulant_derivs(m, bad)
        with pytest.raises(NonFiniteTiltError):
            tilted_sample(m, bad, np.random.default_rng(0))


def test_large_tilt_no_overflow(three_atom):
    cv = cumulant_derivs(three_atom, 700.0)
    assert math.isfinite(cv.xi) and cv.d1 == pytest.approx(1.0)
    assert math.isfinite(log_mgf(three_atom, -800.0))


def test_ghs_rejects_bad_grids():
    with pytest.raises(ValueError):
        ghs_check(make_rademacher(), [])
    with pytest.raises(ValueError):
        ghs_check(make_rademacher(), [0.0, 1.0])


def test_tilted_sample_rademacher_mean():
    rng = np.random.default_rng(3)
    m = make_rademacher()
    draws = np.array([tilted_sample(m, 3.0, rng) for _ in range(200_000)])
    se = math.sqrt((1 - math.tanh(3.0) ** 2) / draws.size)
    assert abs(draws.mean() - math.tanh(3.0)) < 4 * se


def test_tilted_sample_untilted_frequencies(three_atom):
    rng = np.random.default_rng(4)
    n = 200_000
    draws = np.array([tilted_sample(three_atom, 0.0, rng) for _ in range(n)])
    for x, w in three_atom.atoms():
        f = np.mean(draws == x)
        assert abs(f - w) < 4 * math.sqrt(w * (1 - w) / n)


def test_inverse_mean(three_atom):
    for x in (-0.9, -0.2, 0.0, 0.4, 0.95):
        assert tilted_mean(three_atom, inverse_mean(three_atom, x)) == pytest.approx(x, abs=1e-12)
    with pytest.raises(ValueError):
        inverse_mean(three_atom, 1.0)


@given(symmetric_measures(), st.floats(-4, 4))
def test_derivatives_match_finite_differences(m, t):
    h = 1e-5
    cv = cumulant_derivs(m, t)
    d1 = (log_mgf(m, t + h) - log_mgf(m, t - h)) / (2 * h)
    d2 = (tilted_mean(m, t + h) - tilted_mean(m, t - h)) / (2 * h)
    d3 = (tilted_var(m, t + h) - tilted_var(m, t - h)) / (2 * h)
    assert abs(cv.d1 - d1) <= 1e-6 * max(abs(cv.d1), 1e-3)
    assert abs(cv.d2 - d2) <= 1e-4 * abs(cv.d2)
    assert abs(cv.d3 - d3) <= 1e-3 * max(abs(cv.d3), 1e-3)


@given(symmetric_measures(), st.floats(0, 6))
def test_oddness_and_bounds(m, t):
    a, b = cumulant_derivs(m, t), cumulant_derivs(m, -t)
    assert a.d1 == pytest.approx(-b.d1, abs=1e-12)
    assert a.d2 == pytest.approx(b.d2, abs=1e-12)
    assert a.d2 > 0 and abs(a.d1) < 1


@given(symmetric_measures())
def test_mean_strictly_increasing(m):
    grid = np.linspace(-5, 5, 201)
    assert np.all(np.diff(tilted_mean(m, grid)) > 0)
    assert cumulant_derivs(m, 0.0).xi == pytest.approx(0.0, abs=1e-15)
    assert cumulant_derivs(m, 0.0).d1 == pytest.approx(0.0, abs=1e-15)

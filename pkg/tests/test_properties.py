"""Randomized invariants over g-functions, test functions and dyadic cells."""
from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, given, settings, strategies as st

from gmeasure import make_builtin, parse_g_spec
from gmeasure.classify import orbit_eventually_periodic
from gmeasure.gfunction import validate_g_identity
from gmeasure.measure import CellDensity, dyadic_interval_mass, tm_autocorrelation
from gmeasure.transfer import (ClosedForm, Enclosure, GridFunction, apply_transfer,
                               contraction_profile, mu_of_function)

SETTINGS = settings(max_examples=40, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])
names = st.sampled_from(["tm", "tent", "sqrt", "half"])


@st.composite
def piecewise_g(draw):
    """Continuous piecewise-linear g on [0, 1/2] with its forced mirror on [1/2, 1]."""
    a = draw(st.fractions(0, 1, max_denominator=16))
    b = draw(st.fractions(0, 1, max_denominator=16))
    # g(0) = a, g(1/4) = b, g(1/2) = 1 - a, mirrored so g(x) + g(x + 1/2) = 1
    s1, s2 = 4 * (b - a), 4 * (1 - a - b)
    segs = [(0, Fraction(1, 4), a, s1), (Fraction(1, 4), Fraction(1, 2), b - s2 / 4, s2)]
    lines = []
    for lo, hi, c0, c1 in segs:
        lines.append(f"{lo} {hi} poly {c0} {c1}")
    for lo, hi, c0, c1 in segs:
        # 1 - (c0 + c1 (x - 1/2)) on [lo + 1/2, hi + 1/2]
        lines.append(f"{lo + Fraction(1, 2)} {hi + Fraction(1, 2)} poly "
                     f"{1 - c0 + c1 / 2} {-c1}")
    return parse_g_spec("piecewise: " + "; ".join(lines), validate=False)


@SETTINGS
@given(piecewise_g())
def test_generated_g_satisfies_identity(g):
    assert validate_g_identity(g, 10) < 1e-12
    v = g.sample(10)
    assert v.min() >= -1e-12 and v.max() <= 1 + 1e-12


@SETTINGS
@given(piecewise_g(), st.lists(st.floats(-5, 5), min_size=64, max_size=64))
def test_transfer_markov_and_contracting(g, vals):
    f = np.array(vals)
    out = apply_transfer(g, GridFunction(6, f)).values
    assert out.min() >= f.min() - 1e-12 and out.max() <= f.max() + 1e-12
    assert np.allclose(apply_transfer(g, GridFunction(6, np.ones(64))).values, 1.0)


@SETTINGS
@given(piecewise_g(), st.lists(st.floats(0, 5), min_size=64, max_size=64))
def test_transfer_positive(g, vals):
    assert apply_transfer(g, GridFunction(6, np.array(vals))).values.min() >= 0


@SETTINGS
@given(names, st.integers(1, 4), st.integers(0, 1 << 8))
def test_cell_mass_splits(name, k, j):
    g = make_builtin(name)
    j %= 1 << k
    parent = dyadic_interval_mass(g, j, k, 12)
    kids = dyadic_interval_mass(g, 2 * j, k + 1, 12) + dyadic_interval_mass(g, 2 * j + 1, k + 1, 12)
    assert parent.overlaps(kids, 1e-15)
    assert 0 <= parent.value_lo <= parent.value_hi <= 1


@SETTINGS
@given(names, st.integers(1, 6), st.integers(0, 255))
def test_cell_density_bounded(name, k, j):
    j %= 1 << k
    data = CellDensity(make_builtin(name), j, k).grid_data(8)
    vals = np.ldexp(data.values[0], int(data.exponent[0]))
    assert vals.min() >= 0 and vals.max() <= 1 + 1e-12


@SETTINGS
@given(names, st.integers(1, 3), st.floats(-2, 2), st.floats(0, 1))
def test_mu_is_linear_and_monotone(name, m, a, phase):
    g = make_builtin(name)
    base = ClosedForm(lambda x: np.cos(2 * np.pi * m * (x + phase)),
                      holder=(2 * np.pi * m, 1.0), sup=1.0)
    shifted = ClosedForm(lambda x: np.cos(2 * np.pi * m * (x + phase)) + a,
                         holder=(2 * np.pi * m, 1.0), sup=1.0 + abs(a))
    e0 = mu_of_function(g, base, 8, 5)
    e1 = mu_of_function(g, shifted, 8, 5)
    assert e1.overlaps(Enclosure(e0.value_lo + a, e0.value_hi + a), 1e-9)
    assert -1 - 1e-9 <= e0.value_lo <= e0.value_hi <= 1 + 1e-9


@SETTINGS
@given(names)
def test_contraction_profile_monotone(name):
    g = make_builtin(name)
    w = contraction_profile(g, CellDensity(g, 0, 1), 12, 4)
    assert np.all(np.diff(w) <= 0)


@settings(max_examples=200, deadline=None)
@given(st.fractions(0, 1, max_denominator=10**4).filter(lambda q: q < 1))
def test_orbit_defining_equation(q):
    o = orbit_eventually_periodic(q)
    x = q
    for _ in range(o.preperiod + o.period):
        x = 2 * x % 1
    assert x == o.orbit[o.preperiod]
    assert len(set(o.orbit)) == len(o.orbit)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 400))
def test_eta_recursions(m):
    eta = tm_autocorrelation(2 * m + 2)
    assert eta[2 * m] == eta[m]
    assert eta[2 * m + 1] == -(eta[m] + eta[m + 1]) / 2
    assert abs(eta[m]) <= 1

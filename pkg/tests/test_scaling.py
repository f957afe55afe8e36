import json
import math

import numpy as np
import pytest

from gmeasure import ScalingEnvelope, make_builtin
from gmeasure.measure import mass_F
from gmeasure.scaling import (ScalingError, asymptotic_fit, slope_band, theorem42_bounds,
                              theorem42_bounds_log2x, verify_bounds)

from oracles import BOUNDS

BANDS = {"tm": (-1.6, -0.55), "tent": (-0.8, -0.3), "sqrt": (-0.45, -0.1)}


@pytest.fixture(scope="module")
def reports():
    return {name: verify_bounds(make_builtin(name), m_range=range(1, 13))
            for name in ("tm", "tent", "sqrt")}


class TestBounds:
    @pytest.mark.parametrize("name", ["tm", "tent", "sqrt"])
    def test_closed_forms(self, name):
        env = make_builtin(name).envelope
        for m in range(1, 31):
            lo, hi = theorem42_bounds(env, 0.5, 2.0**-m)
            ref = BOUNDS[name](m)
            assert lo == pytest.approx(ref[0], rel=1e-13, abs=1e-12)
            assert hi == pytest.approx(ref[1], rel=1e-13, abs=1e-12)

    def test_envelopes_match_examples(self):
        assert make_builtin("tm").envelope == ScalingEnvelope(4, 2, math.pi**2, 2)
        assert make_builtin("tent").envelope == ScalingEnvelope(2, 1, 2, 1)
        assert make_builtin("sqrt").envelope == ScalingEnvelope(1, 0.5, math.sqrt(2), 0.5)

    @pytest.mark.parametrize("name", ["tm", "tent", "sqrt"])
    def test_consistent(self, name):
        env = make_builtin(name).envelope
        for m in range(1, 13):
            lo, hi = theorem42_bounds_log2x(env, 0.5, -m)
            assert lo < hi

    def test_deep_x_stays_finite(self):
        lo, hi = theorem42_bounds_log2x(make_builtin("tm").envelope, 0.5, -2000.0)
        assert np.isfinite(lo) and np.isfinite(hi) and lo < -4e6

    @pytest.mark.parametrize("x", [0.0, 1.0, 1.5, -0.1])
    def test_x_range(self, x):
        with pytest.raises(ScalingError):
            theorem42_bounds(make_builtin("tm").envelope, 0.5, x)

    def test_kappa_positive(self):
        with pytest.raises(ScalingError):
            theorem42_bounds(make_builtin("tm").envelope, 0.0, 0.5)


class TestVerify:
    @pytest.mark.parametrize("name", ["tm", "tent", "sqrt"])
    def test_sandwich(self, reports, name):
        rep = reports[name]
        assert rep.passed, rep.failures
        assert rep.kappa_used == 0.5 and rep.envelope_verified
        for r in rep.rows:
            assert r.log2_lower < r.log2F_lo <= r.log2F_hi < r.log2_upper

    @pytest.mark.parametrize("name", ["tm", "tent", "sqrt"])
    def test_monotone_decay(self, reports, name):
        y = [r.log2F_hi for r in reports[name].rows]
        lo = [r.log2F_lo for r in reports[name].rows]
        assert all(b < a for a, b in zip(lo, y[1:]))

    @pytest.mark.parametrize("name", ["tm", "tent", "sqrt"])
    def test_super_polynomial(self, name):
        # log2 F + p m is eventually strictly decreasing for every p; the increments of
        # log2 F grow like theta2 m, so the onset is at m ~ p / min(1, theta2)
        g = make_builtin(name)
        y = np.array([mass_F(g, m).log2_mid for m in range(1, 17)])
        m = np.arange(1, 17)
        for p in range(1, 7):
            start = math.ceil(p / min(1.0, g.envelope.theta2))
            z = (y + p * m)[m >= start]
            if len(z) > 1:
                assert np.all(np.diff(z) < 0), (p, z)

    def test_half_negative_control(self):
        rep = verify_bounds(make_builtin("half"), make_builtin("tm").envelope, range(1, 11))
        assert not rep.passed
        assert set(rep.failures) & set(range(6, 11))
        assert not rep.envelope_verified

    def test_no_envelope(self):
        with pytest.raises(ScalingError):
            verify_bounds(make_builtin("half"))

    def test_bad_m(self):
        with pytest.raises(ScalingError):
            verify_bounds(make_builtin("tm"), m_range=[0])

    def test_csv_and_json(self, reports):
        rep = reports["tent"]
        lines = rep.to_csv().splitlines()
        assert lines[0] == "m,log2F_lo,log2F_hi,log2_lower,log2_upper,ratio"
        assert len(lines) == 13
        fit = asymptotic_fit(rep, 6)
        data = json.loads(rep.to_json(fit))
        assert data["passed"] and data["fit"]["in_band"]
        assert [r["status"] for r in data["rows"]] == ["pass"] * 12

    def test_ratio(self, reports):
        r = reports["tm"].rows[-1]
        assert r.ratio == pytest.approx(r.log2F_mid / 144)


class TestFit:
    @pytest.mark.parametrize("name", ["tm", "tent", "sqrt"])
    def test_slope_in_band(self, reports, name):
        fit = asymptotic_fit(reports[name], 6)
        assert fit.in_band
        assert BANDS[name][0] <= fit.slope <= BANDS[name][1]
        assert (fit.m_min, fit.m_max) == (6, 12)

    def test_slope_approaches_theta(self, reports):
        for name, theta in (("tm", 2), ("tent", 1), ("sqrt", 0.5)):
            slope = asymptotic_fit(reports[name], 6).slope
            assert abs(slope + theta / 2) < 0.12 * theta

    def test_band_formula(self):
        env = make_builtin("tm").envelope
        lo, hi = slope_band(env, 6)
        assert lo == pytest.approx(-1 - 5 / 6)
        assert hi == pytest.approx(-1 + (1 + math.log2(math.pi**2)) / 6)

    def test_too_few_rows(self, reports):
        with pytest.raises(ScalingError):
            asymptotic_fit(reports["tm"], 10)

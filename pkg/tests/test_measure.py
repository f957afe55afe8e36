from fractions import Fraction

import numpy as np
import pytest

from gmeasure import make_builtin
from gmeasure.measure import (MeasureError, cdf, doubling_relation_check, dyadic_interval_mass,
                              fourier_coefficients, fourier_dft, kappa, mass_F,
                              mass_vector_certified, mass_vector_quadrature, tm_autocorrelation)
from gmeasure.transfer import Enclosure

from oracles import eta_by_hand, lebesgue_mass, riesz_fourier


class TestDyadicMass:
    @pytest.mark.parametrize("j,k", [(0, 0), (0, 1), (3, 3), (5, 6), (200, 9)])
    def test_half_is_lebesgue(self, j, k):
        e = dyadic_interval_mass(make_builtin("half"), j, k, 4, 2)
        assert e.contains(lebesgue_mass(j, k), 1e-15)

    def test_tm_right_half(self):
        e = dyadic_interval_mass(make_builtin("tm"), 1, 1)
        assert e.contains(0.5) and e.width < 1e-3

    def test_coshift_approaches_one(self):
        g = make_builtin("coshift")
        for n in (4, 16, 30):
            e = dyadic_interval_mass(g, 0, 3, n)
            assert e.mid >= 0.99
        assert dyadic_interval_mass(g, 5, 3).mid == 0.0

    def test_range_checked(self):
        with pytest.raises(MeasureError):
            dyadic_interval_mass(make_builtin("tm"), 4, 2)

    def test_tiny_masses_keep_exponent(self):
        e = mass_F(make_builtin("tm"), 12)
        assert -127 < e.log2_lo <= e.log2_hi < -126
        assert e.certified

    def test_non_good_needs_override(self):
        from gmeasure.transfer import NotGoodError
        from gmeasure import parse_g_spec
        g = parse_g_spec("piecewise: 0 1/2 poly 0 2; 1/2 1 poly 2 -2; zeros 0 1/4 1/2 3/4")
        with pytest.raises(NotGoodError):
            dyadic_interval_mass(g, 0, 2, 4)
        e = dyadic_interval_mass(g, 0, 2, 4, override=True)
        assert 0 <= e.lo <= e.hi <= 1


class TestMassVectors:
    def test_half_k4(self):
        vec = mass_vector_certified(make_builtin("half"), 4, 4, 0)
        assert all(m.contains(1 / 16, 1e-15) for m in vec.masses)

    def test_tm_k1(self):
        vec = mass_vector_certified(make_builtin("tm"), 1)
        assert all(m.contains(0.5) for m in vec.masses)

    def test_quadrature_tm_k1(self):
        vec = mass_vector_quadrature(make_builtin("tm"), 1, 14)
        assert np.allclose(vec.mids, 0.5, atol=1e-3)
        assert vec.method == "density-quadrature"

    def test_quadrature_half_exact(self):
        vec = mass_vector_quadrature(make_builtin("half"), 5, 4)
        assert np.allclose(vec.mids, 1 / 32, rtol=1e-14)

    def test_quadrature_aliasing_warning(self):
        with pytest.warns(UserWarning):
            mass_vector_quadrature(make_builtin("tm"), 2, 10, 12)

    @pytest.mark.parametrize("k", [2, 4, 6])
    def test_total_mass(self, guide, k):
        vec = mass_vector_certified(guide, k)
        assert abs(vec.total() - 1) < 1e-6

    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_refinement_consistency(self, guide, k):
        parent = mass_vector_certified(guide, k).masses
        child = mass_vector_certified(guide, k + 1).masses
        for j, p in enumerate(parent):
            assert p.overlaps(child[2 * j] + child[2 * j + 1])

    @pytest.mark.parametrize("k", [2, 5])
    def test_cross_method(self, guide, k):
        cert = mass_vector_certified(guide, k)
        quad = mass_vector_quadrature(guide, k, 14)
        for c, q in zip(cert.masses, quad.masses):
            assert abs(c.mid - q.mid) <= c.width + 3e-3

    def test_dirac_vector(self):
        vec = mass_vector_certified(make_builtin("coshift"), 4)
        assert vec.mids[0] == 1.0 and vec.total() == 1.0

    def test_csv_header(self):
        text = mass_vector_certified(make_builtin("half"), 2, 2, 0).to_csv()
        lines = text.splitlines()
        assert lines[0] == "j,k,lo,hi,log2_mid" and len(lines) == 5

    def test_level8_positive(self):
        vec = mass_vector_certified(make_builtin("tent"), 8, 16, 0, max_n=16)
        assert np.all(np.isfinite(vec.log2_mids))


class TestCDF:
    def test_half_exact(self):
        tab = cdf(make_builtin("half"), 8, n=4, level=0)
        mids = np.array([v.mid for v in tab.values])
        assert np.max(np.abs(mids - np.arange(257) / 256)) < 1e-12

    def test_endpoints(self, guide):
        tab = cdf(guide, 3)
        assert tab.values[0].contains(0.0)
        assert tab.values[-1].contains(1.0, 1e-9)

    def test_tm_half(self):
        tab = cdf(make_builtin("tm"), 2)
        assert tab.values[2].contains(0.5, 1e-9)

    def test_monotone(self, guide):
        tab = cdf(guide, 5)
        mids = [v.mid for v in tab.values]
        assert all(a < b for a, b in zip(mids, mids[1:]))

    def test_off_grid_bracketed(self):
        tab = cdf(make_builtin("half"), 4, n=4, level=0)
        e = tab.cdf_at(0.3)
        assert e.value_lo <= 0.3 <= e.value_hi
        assert e.value_lo == pytest.approx(0.25) and e.value_hi == pytest.approx(0.3125)

    def test_dirac(self):
        tab = cdf(make_builtin("coshift"), 8, n=30)
        assert tab.values[1].mid >= 0.99
        assert tab.values[0].contains(1.0)

    def test_quadrature_method(self):
        tab = cdf(make_builtin("tent"), 3, method="quadrature", n=10)
        assert tab.values[-1].contains(1.0, 1e-9)

    def test_unknown_method(self):
        with pytest.raises(MeasureError):
            cdf(make_builtin("tm"), 2, method="bogus")

    def test_csv(self):
        lines = cdf(make_builtin("half"), 1, n=2, level=0).to_csv().splitlines()
        assert lines[0] == "x,F_lo,F_hi,log2F_mid" and len(lines) == 4


class TestKappa:
    @pytest.mark.parametrize("name", ["tm", "tent", "sqrt", "half"])
    def test_symmetric_half(self, name):
        e = kappa(make_builtin(name))
        assert e.contains(0.5) and e.width < 1e-6

    def test_asymmetric_computed(self):
        from gmeasure import parse_g_spec
        g = parse_g_spec("piecewise: 0 1/2 poly 0.1 0.8; 1/2 1 poly 1.3 -0.8; zeros none")
        assert not g.symmetric
        e = kappa(g)
        assert e.method != "symmetry" and 0 < e.value_lo <= e.value_hi < 1

    def test_dirac_refused(self):
        with pytest.raises(MeasureError):
            kappa(make_builtin("coshift"))


class TestAutocorrelation:
    def test_hand_values(self):
        eta = tm_autocorrelation(4)
        assert dict(enumerate(eta.eta)) == eta_by_hand()

    def test_invariants(self):
        eta = tm_autocorrelation(300)
        assert eta[0] == 1 and eta[1] == Fraction(-1, 3) and eta[3] == Fraction(1, 3)
        for m in range(150):
            assert eta[2 * m] == eta[m]
            if 2 * m + 1 <= 300:
                assert eta[2 * m + 1] == -(eta[m] + eta[m + 1]) / 2
        assert all(-1 <= e <= 1 for e in eta.eta)

    def test_csv_and_errors(self):
        assert tm_autocorrelation(1).to_csv().splitlines() == ["m,eta_num,eta_den", "0,1,1",
                                                               "1,-1,3"]
        with pytest.raises(MeasureError):
            tm_autocorrelation(-1)

    def test_riesz_product_oracle_converges(self):
        # coefficients of the finite Riesz product approach eta as the factor count grows
        c = riesz_fourier(14, 8)
        eta = tm_autocorrelation(8)
        assert max(abs(c[m] - float(eta[m])) for m in range(9)) < 1e-2


class TestFourier:
    def test_half_zero(self):
        tab = fourier_coefficients(make_builtin("half"), 6, n=4)
        assert tab.real[0].contains(1.0)
        for m in range(1, 7):
            assert tab.real[m].contains(0.0, 1e-15) and tab.imag[m].contains(0.0, 1e-15)

    def test_coshift_dirac(self):
        tab = fourier_coefficients(make_builtin("coshift"), 4)
        assert all(r.contains(1.0) for r in tab.real)
        assert all(i.contains(0.0) for i in tab.imag)

    def test_tm_matches_eta(self):
        tab = fourier_coefficients(make_builtin("tm"), 8, n=10)
        eta = tm_autocorrelation(8)
        for m in range(9):
            assert abs(tab.real[m].mid - float(eta[m])) < 1e-3
            assert abs(tab.imag[m].mid) < 1e-9

    def test_bounded_by_one(self):
        tab = fourier_coefficients(make_builtin("tent"), 4, n=8)
        assert np.all(np.abs(tab.mids()) <= 1 + 1e-12)

    def test_aliasing_guard(self):
        with pytest.raises(MeasureError):
            fourier_coefficients(make_builtin("tm"), 32, level=5)

    def test_dft_close(self):
        tab = fourier_dft(make_builtin("tm"), 4, 14)
        eta = tm_autocorrelation(4)
        assert np.allclose(tab.mids().real, [float(e) for e in eta.eta], atol=1e-3)
        assert tab.method == "dft" and not tab.real[1].certified

    def test_csv(self):
        lines = fourier_coefficients(make_builtin("half"), 2, n=2).to_csv().splitlines()
        assert lines[0] == "n,re_lo,re_hi,im_lo,im_hi" and len(lines) == 4


class TestDoubling:
    def test_half(self):
        assert doubling_relation_check(fourier_coefficients(make_builtin("half"), 8, n=4)).ok

    def test_tm(self):
        rep = doubling_relation_check(fourier_coefficients(make_builtin("tm"), 8, n=10))
        assert rep.ok and len(rep.pairs) == 4

    def test_corrupted_flagged(self):
        tab = fourier_coefficients(make_builtin("tm"), 4, n=10)
        tab.real[4] = Enclosure(0.5, 0.5)
        rep = doubling_relation_check(tab)
        assert not rep.ok and 2 in rep.violations

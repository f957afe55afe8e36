"""The compiled kernels and their numpy twins must agree."""
import numpy as np
import pytest

from gmeasure import BACKEND, available_backends, make_builtin
from gmeasure._kernels_py import _EPS
from gmeasure.measure import dyadic_interval_mass, mass_vector_certified
from gmeasure.transfer import TrigMode, density_g_n, iterate_transfer, mu_of_function

BACKENDS = available_backends()
PAIRS = [(a, b) for a in BACKENDS for b in BACKENDS if a < b]


def test_selected_backend_listed():
    assert BACKEND in BACKENDS
    assert "python" in BACKENDS


def test_twins_have_same_api():
    names = ["grid_step", "cell_step", "log_density", "sinpi_sq_affine", "cell_products"]
    for mod in BACKENDS.values():
        assert all(callable(getattr(mod, n)) for n in names)


@pytest.mark.parametrize("a,b", PAIRS)
class TestKernelEquivalence:
    def test_grid_step(self, a, b):
        rng = np.random.default_rng(3)
        f = rng.standard_normal(1024)
        g = rng.random(1024)
        fa, fb = f.copy(), f.copy()
        ra = BACKENDS[a].grid_step(fa, g, 512)
        rb = BACKENDS[b].grid_step(fb, g, 512)
        assert np.array_equal(fa, fb)
        assert ra[:2] == rb[:2]
        assert ra[2] == pytest.approx(rb[2], rel=1e-12)

    def test_cell_step(self, a, b):
        rng = np.random.default_rng(4)
        lo = rng.standard_normal(256)
        hi = lo + rng.random(256)
        gl = rng.random(256) * 0.5
        gh = gl + rng.random(256) * 0.5
        out = []
        for name in (a, b):
            l, h = lo.copy(), hi.copy()
            BACKENDS[name].cell_step(l, h, gl, gh, 128)
            out.append((l, h))
        assert np.array_equal(out[0][0], out[1][0]) and np.array_equal(out[0][1], out[1][1])

    def test_log_density(self, a, b):
        with np.errstate(divide="ignore"):
            logg = np.log2(make_builtin("sqrt").sample(10))
        da = BACKENDS[a].log_density(logg, 10, 7)
        db = BACKENDS[b].log_density(logg, 10, 7)
        assert np.array_equal(np.isinf(da), np.isinf(db))
        fin = np.isfinite(da)
        assert np.allclose(da[fin], db[fin], rtol=0, atol=1e-12)

    def test_sinpi(self, a, b):
        for level, start, step in ((12, 0, 1), (20, 12345, 17), (26, 3, 1 << 10)):
            va = BACKENDS[a].sinpi_sq_affine(level, start, step, 4096)
            vb = BACKENDS[b].sinpi_sq_affine(level, start, step, 4096)
            assert np.max(np.abs(va - vb)) <= 4 * _EPS

    def test_cell_products(self, a, b):
        g = make_builtin("tent")
        level, top, k = 14, 4, 10
        gtab = np.ascontiguousarray(g.sample(level))
        pads = np.zeros(k)
        res = []
        for name in (a, b):
            prod = np.ones((1 << top) + 1)
            plo, phi = np.ones(1 << top), np.ones(1 << top)
            e = BACKENDS[name].cell_products(gtab, level, top, 5, k, pads, prod, plo, phi, True)
            res.append((e, prod, plo, phi))
        assert res[0][0] == res[1][0]
        for x, y in zip(res[0][1:], res[1][1:]):
            assert np.allclose(x, y, rtol=1e-14, atol=0)


def test_high_level_results(backend):
    g = make_builtin("tm")
    d = density_g_n(g, 6, 10).values
    assert d.sum() / d.size == pytest.approx(1.0, abs=1e-3)
    e = mu_of_function(g, TrigMode(1), 12, 4)
    assert e.contains(-1 / 3)
    m = dyadic_interval_mass(g, 0, 6)
    assert -30 < m.log2_lo < m.log2_hi < -29
    vec = mass_vector_certified(make_builtin("sqrt"), 4)
    assert abs(vec.total() - 1) < 1e-9
    out = iterate_transfer(g, TrigMode(3), 5, 3).values
    assert np.all(np.abs(out) <= 1 + 1e-12)


def test_backends_match_end_to_end(monkeypatch):
    from gmeasure import gfunction, measure, transfer
    results = {}
    for name, mod in BACKENDS.items():
        for m in (gfunction, transfer, measure):
            monkeypatch.setattr(m, "kernels", mod)
        vec = mass_vector_certified(make_builtin("tent"), 5)
        results[name] = np.array([(e.value_lo, e.value_hi) for e in vec.masses])
    ref = results["python"]
    for arr in results.values():
        assert np.allclose(arr, ref, rtol=1e-12, atol=0)

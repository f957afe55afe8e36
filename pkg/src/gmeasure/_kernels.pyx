# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the dyadic transfer-operator dynamic program.

Every function here has a numpy twin with the same signature in
``_kernels_py``; ``_backend`` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, M_PI, INFINITY, log2, frexp, ldexp

cnp.import_array()


def grid_step(double[::1] f, const double[:] g, Py_ssize_t half):
    """One transfer step in place on a point grid; returns (min, max, sum) of the output.

    ``f`` holds 2*half samples at level l; ``g`` holds g at the first ``half``
    level-l points. The output occupies ``f[:half]``.
    """
    cdef Py_ssize_t j
    cdef double a, b, v
    cdef double lo = INFINITY, hi = -INFINITY, total = 0.0
    for j in range(half):
        a = f[j]
        b = f[j + half]
        v = b + g[j] * (a - b)
        f[j] = v
        total += v
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    return lo, hi, total


def cell_step(double[::1] lo, double[::1] hi, const double[:] gl,
              const double[:] gh, Py_ssize_t half):
    """One transfer step in place on cell enclosures.

    Output cell j gets the extreme values of ``g*a + (1-g)*b`` over
    ``g in [gl[j], gh[j]]``, which is attained at an endpoint.
    """
    cdef Py_ssize_t j
    cdef double al, bl, ah, bh, x0, x1, y0, y1
    for j in range(half):
        al = lo[j]
        bl = lo[j + half]
        ah = hi[j]
        bh = hi[j + half]
        x0 = bl + gl[j] * (al - bl)
        x1 = bl + gh[j] * (al - bl)
        y0 = bh + gl[j] * (ah - bh)
        y1 = bh + gh[j] * (ah - bh)
        lo[j] = x0 if x0 < x1 else x1
        hi[j] = y0 if y0 > y1 else y1


def log_density(const double[::1] logg, int level, int n):
    """log2 of g_n(x) = 2^n prod_{k<n} g(2^k x) on the level grid, from a log2 g table."""
    cdef Py_ssize_t size = (<Py_ssize_t>1) << level
    cdef Py_ssize_t mask = size - 1
    cdef Py_ssize_t j, idx
    cdef int k
    cdef double acc
    out = np.empty(size, dtype=np.float64)
    cdef double[::1] o = out
    for j in range(size):
        acc = n
        idx = j
        for k in range(n):
            acc += logg[idx]
            idx = (idx << 1) & mask
        o[j] = acc
    return out


cdef inline double _sinpi_reflected(long long u, long long full, int s,
                                    const double[::1] sa, const double[::1] ca,
                                    const double[::1] sb, const double[::1] cb):
    cdef long long hi_idx, lo_idx
    if u > (full >> 1):
        u = full - u
    hi_idx = u >> s
    lo_idx = u & (((<long long>1) << s) - 1)
    return sa[hi_idx] * cb[lo_idx] + ca[hi_idx] * sb[lo_idx]


def sinpi_sq_affine(int level, long long start, long long step, Py_ssize_t count):
    """sin(pi x)^2 at x = ((start + i*step) mod 2^level) / 2^level, i < count.

    Uses angle addition over two tables of size ~2^(level/2); after reflecting
    into [0, 1/2] both angles lie in [0, pi/2], so no cancellation occurs.
    """
    cdef long long full = (<long long>1) << level
    cdef long long mask = full - 1
    cdef int s = (level + 1) // 2
    cdef long long nb = (<long long>1) << s
    cdef long long na = ((full >> 1) >> s) + 1
    cdef Py_ssize_t i
    cdef long long u
    cdef double v
    ia = np.arange(na, dtype=np.float64) * (M_PI * nb / full)
    ib = np.arange(nb, dtype=np.float64) * (M_PI / full)
    cdef double[::1] sa = np.sin(ia)
    cdef double[::1] ca = np.cos(ia)
    cdef double[::1] sb = np.sin(ib)
    cdef double[::1] cb = np.cos(ib)
    out = np.empty(count, dtype=np.float64)
    cdef double[::1] o = out
    u = start & mask
    step = step & mask
    for i in range(count):
        v = _sinpi_reflected(u, full, s, sa, ca, sb, cb)
        o[i] = v * v
        u = (u + step) & mask
    return out


def cell_products(const double[::1] gtab, int level, int top, long long j, int k,
                  const double[::1] pads, double[::1] prod, double[::1] plo,
                  double[::1] phi, bint cells):
    """Multiply in the k factors ``g(2**(r-k) (j + x))`` of a dyadic cell density.

    ``gtab`` is g on the level grid (level = top + k). ``prod`` holds the
    2**top + 1 grid values; ``plo``/``phi`` the 2**top cell bounds, widened
    by ``pads[r]`` and a relative 4 ulp per factor. Rows are rescaled by
    powers of two to avoid underflow; returns the accumulated exponent.
    """
    cdef Py_ssize_t n = (<Py_ssize_t>1) << top
    cdef long long mask = ((<long long>1) << level) - 1
    cdef long long base = j << top
    cdef Py_ssize_t i
    cdef int r, e
    cdef long long expo = 0
    cdef double prev, cur, lo, hi, pad, peak, scale
    cdef double down = 1.0 - 4.0 * 2.220446049250313e-16
    cdef double up = 1.0 + 4.0 * 2.220446049250313e-16
    for r in range(k):
        pad = pads[r]
        prev = gtab[(base << r) & mask]
        prod[0] *= prev
        peak = prod[0]
        for i in range(1, n + 1):
            cur = gtab[((base + i) << r) & mask]
            prod[i] *= cur
            if prod[i] > peak:
                peak = prod[i]
            if cells:
                if prev < cur:
                    lo = prev
                    hi = cur
                else:
                    lo = cur
                    hi = prev
                if pad > 0:
                    lo = lo - pad
                    if lo < 0:
                        lo = 0
                    hi = hi + pad
                    if hi > 1:
                        hi = 1
                plo[i - 1] *= lo * down
                phi[i - 1] *= hi * up
                if phi[i - 1] > peak:
                    peak = phi[i - 1]
            prev = cur
        if 0 < peak < 1e-120:
            frexp(peak, &e)
            scale = ldexp(1.0, -e)
            for i in range(n + 1):
                prod[i] *= scale
            if cells:
                for i in range(n):
                    plo[i] *= scale
                    phi[i] *= scale
            expo += e
    return expo

"""Independent reference computations, written without the package's kernels.

Each oracle uses a different route from the code under test: explicit
preimage sums, Fraction arithmetic, or closed forms worked out by hand.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


# scalar closed forms of the builtins, written out separately from the package
def g_tm(x):
    return math.sin(math.pi * (x % 1.0)) ** 2


def g_tent(x):
    x = x % 1.0
    return 2 * x if x <= 0.5 else 2 * (1 - x)


def g_sqrt(x):
    x = x % 1.0
    if x <= 0.25:
        return math.sqrt(x)
    if x <= 0.75:
        return 1 - math.sqrt(abs(x - 0.5))
    return math.sqrt(1 - x)


def g_half(x):
    return 0.5


def g_coshift(x):
    return math.cos(math.pi * (x % 1.0)) ** 2


SCALAR = {"tm": g_tm, "tent": g_tent, "sqrt": g_sqrt, "half": g_half, "coshift": g_coshift}


def preimage_sum(g, f, n, x):
    """``2**-n sum_{y in T^-n x} g_n(y) f(y)`` with ``g_n(y) = 2**n prod g(2**k y)``."""
    total = 0.0
    for i in range(1 << n):
        y = (x + i) / (1 << n)
        w = 1.0
        for k in range(n):
            w *= g((y * (1 << k)) % 1.0)
        total += w * f(y)
    return total


def riesz_density(g, n, x):
    w = float(1 << n)
    for k in range(n):
        w *= g((x * (1 << k)) % 1.0)
    return w


def riesz_fourier(n_factors, max_freq):
    """Fourier coefficients ``c[0..max_freq]`` of prod_{k<n} (1 - cos 2 pi 2**k x).

    Each factor is ``1 - (e_{2^k} + e_{-2^k}) / 2``; the product is formed by
    convolving sparse spectra. Converges to the Thue-Morse coefficients.
    """
    spec = {0: 1.0}
    for k in range(n_factors):
        s = 1 << k
        new = {}
        for f, c in spec.items():
            for df, w in ((0, 1.0), (s, -0.5), (-s, -0.5)):
                new[f + df] = new.get(f + df, 0.0) + c * w
        spec = new
    return [spec.get(m, 0.0) for m in range(max_freq + 1)]


def eta_by_hand():
    """The first Thue-Morse autocorrelation values, solved by hand."""
    third = Fraction(1, 3)
    return {0: Fraction(1), 1: -third, 2: -third, 3: third, 4: -third}


def orbit_by_iteration(p, q, limit=10_000):
    """(preperiod, period) of p/q under doubling via integer residues mod q."""
    seen = {}
    r = p % q
    i = 0
    while r not in seen:
        seen[r] = i
        r = (2 * r) % q
        i += 1
        if i > limit:
            raise RuntimeError("no cycle found")
    return seen[r], i - seen[r]


def bound_tm(m):
    """log2 of the tm lower and upper bounds at x = 2**-m, expanded by hand.

    lower = 2**-5 x**(-log2 x) x**5, upper = x**(-log2 x) x**(-1 - 2 log2 pi).
    """
    return -5 - m * m - 5 * m, -m * m + m * (1 + 2 * math.log2(math.pi))


def bound_tent(m):
    """2**-3 x**(-log2(x)/2) x**(5/2) and x**(-log2(x)/2) x**(-3/2)."""
    return -3 - m * m / 2 - 2.5 * m, -m * m / 2 + 1.5 * m


def bound_sqrt(m):
    """2**-2 x**(-log2(x)/4) x**(5/4) and x**(-log2(x)/4) x**(-3/4)."""
    return -2 - m * m / 4 - 1.25 * m, -m * m / 4 + 0.75 * m


BOUNDS = {"tm": bound_tm, "tent": bound_tent, "sqrt": bound_sqrt}


def lebesgue_mass(j, k):
    return Fraction(1, 1 << k)


def trapezoid_periodic(values):
    return float(np.mean(values))

"""Dyadic masses, distribution function, kappa and Fourier coefficients of mu_g.

The mass of ``I = [j 2**-k, (j+1) 2**-k]`` equals ``mu_g(f_jk)`` for

    f_jk(x) = 2**-k g_k(2**-k (j + x)) = prod_{r<k} g(2**(r-k) (j + x)),

the k-th transfer iterate of the indicator of I. On the level-N grid every
factor is g on the level-(N+k) grid at an affine index, so f_jk is sampled
exactly (no composition error) and its cell ranges come from g's.
Products are formed in log2 so masses near 2**-900 stay representable.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .classify import check_goodness, classify_spectral_type
from ._backend import kernels
from .gfunction import GFunction
from .transfer import (EPS, MAX_LEVEL, BudgetError, ClosedForm, Enclosure, GridData,
                       NotGoodError, TrigMode, density_g_n, enclose,
                       mu_of_function)

MASS_N = 16
MASS_LEVEL = 0
FOURIER_N = 12
MAX_ADAPT_N = 24
ADAPT_CAP = 26
TABLE_LEVEL = 26


class MeasureError(ValueError):
    pass


# ---------------------------------------------------------------------------
# g-measure regime
# ---------------------------------------------------------------------------


def _regime(g: GFunction, override: bool) -> str:
    """``pp`` for the Dirac case, else ``cont``; raises for non-good g."""
    try:
        report = check_goodness(g)
    except ValueError:
        if override:
            return "cont"
        raise
    if not report.good:
        if override:
            return "cont"
        raise NotGoodError(f"g-function {g.name!r} is not good")
    return "pp" if classify_spectral_type(g, report=report).kind == "pp" else "cont"


# ---------------------------------------------------------------------------
# Closed forms of the cell test functions
# ---------------------------------------------------------------------------


def _log2(v):
    with np.errstate(divide="ignore"):
        return np.log2(v)


def cell_density_data(g: GFunction, js: Sequence[int], k: int, top: int,
                      cells: bool = True) -> GridData:
    """Samples of ``f_jk`` (rows over ``js``) on the level-``top`` grid, in scaled form."""
    js = np.asarray(js, dtype=np.int64)
    if k < 0 or np.any(js < 0) or np.any(js >= (1 << k)):
        raise MeasureError(f"need 0 <= j < 2**k, got j={js.tolist()} k={k}")
    if top + k > 62:
        raise MeasureError("top + k too large for integer indices")
    n_pts = (1 << top) + 1
    rows = len(js)
    level = top + k
    prod = np.ones((rows, n_pts))
    plo = np.ones((rows, n_pts - 1)) if cells else np.ones((rows, 0))
    phi = np.ones((rows, n_pts - 1)) if cells else np.ones((rows, 0))
    expo = np.zeros(rows, dtype=np.int64)
    pads = np.zeros(max(k, 1))
    certified = True
    for r in range(k):
        cell_level = level - r
        if g.monotone_level is not None and cell_level >= g.monotone_level:
            continue
        if g.holder is not None:
            pads[r] = g.modulus_bound(2.0 ** -(cell_level + 1))
        else:
            certified = False
    if level <= TABLE_LEVEL and (rows * k) << top >= 1 << max(level - 2, 0):
        gtab = g.sample(level)
        for row, j in enumerate(js):
            expo[row] = kernels.cell_products(gtab, level, top, int(j), k, pads, prod[row],
                                              plo[row], phi[row], cells)
    else:
        for row, j in enumerate(js):
            expo[row] = _cell_products_affine(g, level, top, int(j), k, pads, prod[row],
                                              plo[row], phi[row], cells)
    # normalize every row so its upper bound peaks in [1/2, 1)
    peak = np.max(phi if cells else prod, axis=1)
    shift = np.where(peak > 0, np.frexp(peak)[1], 0).astype(np.int64)
    expo += shift
    for row in np.nonzero(shift)[0]:
        scale = math.ldexp(1.0, -int(shift[row]))
        prod[row] *= scale
        if cells:
            plo[row] *= scale
            phi[row] *= scale
    rel = 4 * (k + 2) * EPS
    if cells:
        return GridData(prod[:, :-1], plo, phi, expo, cells_certified=certified, rel_err=rel)
    return GridData(prod[:, :-1], exponent=expo, rel_err=rel)


def _cell_products_affine(g, level, top, j, k, pads, prod, plo, phi, cells):
    # same contract as kernels.cell_products, sampling g factor by factor
    n_pts = (1 << top) + 1
    expo = 0
    for r in range(k):
        vals = g.sample_affine(level, j << (top + r), 1 << r, n_pts)
        prod *= vals
        peak = prod.max()
        if cells:
            lo = np.minimum(vals[:-1], vals[1:])
            hi = np.maximum(vals[:-1], vals[1:])
            if pads[r] > 0:
                lo = np.maximum(lo - pads[r], 0.0)
                hi = np.minimum(hi + pads[r], 1.0)
            plo *= lo * (1 - 4 * EPS)
            phi *= hi * (1 + 4 * EPS)
            peak = max(peak, phi.max())
        if 0 < peak < 1e-120:
            e = int(np.frexp(peak)[1])
            prod *= 2.0**-e
            plo *= 2.0**-e
            phi *= 2.0**-e
            expo += e
    return expo


class CellDensity(ClosedForm):
    """``f_jk``, the k-th transfer iterate of the indicator of the cell (j, k)."""

    def __init__(self, g: GFunction, j: int, k: int):
        if not 0 <= j < (1 << k):
            raise MeasureError(f"need 0 <= j < 2**k, got j={j} k={k}")
        self.g, self.j, self.k = g, j, k

        def func(x):
            out = np.ones_like(x)
            for r in range(k):
                out = out * g(2.0 ** (r - k) * (j + x))
            return out

        super().__init__(func, None, 1.0, name=f"f_{j},{k}")

    def grid_data(self, level, cells=True):
        return cell_density_data(self.g, [self.j], self.k, level, cells)


def _fixed_point_mass(g: GFunction, j: int, k: int) -> Enclosure:
    # mu_g = delta_0, and phi_g^n f(0) = f(0) since 0 is its own preimage with weight 1
    x = (j + np.zeros(1)) * 2.0**-k
    val = 1.0
    for r in range(k):
        val *= float(g(x * 2.0**r)[0])
    enc = Enclosure(val, val, method="fixed-point")
    enc.notes.append("Dirac measure at 0: mass evaluated as f_jk(0)")
    return enc


def dyadic_interval_mass(g: GFunction, j: int, k: int, n: int = MASS_N,
                         level: int = MASS_LEVEL, *, cells: bool = True,
                         override: bool = False) -> Enclosure:
    """Enclosure of ``mu_g([j 2**-k, (j+1) 2**-k])``.

    In the Dirac case (g(1/2) = 0) the cell containing 0 receives the atom.
    """
    if not 0 <= j < (1 << k):
        raise MeasureError(f"need 0 <= j < 2**k, got j={j} k={k}")
    if _regime(g, override) == "pp":
        return _fixed_point_mass(g, j, k)
    if k == 0:
        return Enclosure.exact(1.0)
    data = cell_density_data(g, [j], k, n + level, cells)
    return enclose(g, data, n, level, cells, extrapolate=False)[0]


def mass_F(g: GFunction, m: int, n: int = MASS_N, level: int = MASS_LEVEL,
           **kw) -> Enclosure:
    """``F_g(2**-m) = mu_g([0, 2**-m])``."""
    return dyadic_interval_mass(g, 0, m, n, level, **kw)


# ---------------------------------------------------------------------------
# Mass vectors
# ---------------------------------------------------------------------------


@dataclass
class DyadicMassVector:
    level: int
    masses: list
    method: str
    notes: list = field(default_factory=list)

    @property
    def mids(self) -> np.ndarray:
        return np.array([e.mid for e in self.masses])

    @property
    def log2_mids(self) -> np.ndarray:
        return np.array([e.log2_mid for e in self.masses])

    @property
    def widths(self) -> np.ndarray:
        return np.array([e.width for e in self.masses])

    def total(self) -> float:
        return math.fsum(self.mids)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "k", "lo", "hi", "log2_mid"])
        for j, e in enumerate(self.masses):
            w.writerow([j, self.level, repr(e.value_lo), repr(e.value_hi), repr(e.log2_mid)])
        return buf.getvalue()


def mass_vector_certified(g: GFunction, k: int, n: int = MASS_N, level: int = MASS_LEVEL,
                          *, rtol: float = 1e-3, max_n: int = MAX_ADAPT_N,
                          override: bool = False) -> DyadicMassVector:
    """Enclosures of all ``2**k`` level-k masses.

    Intervals whose relative width exceeds ``rtol`` are recomputed with n
    raised by 4 until ``max_n`` or the memory cap; leftovers are noted.
    """
    if k < 0:
        raise MeasureError("k must be >= 0")
    if _regime(g, override) == "pp":
        return DyadicMassVector(k, [_fixed_point_mass(g, j, k) for j in range(1 << k)],
                                "certified-enclosure", ["Dirac measure at 0"])
    if k == 0:
        return DyadicMassVector(0, [Enclosure.exact(1.0)], "certified-enclosure")
    if level + n + k > MAX_LEVEL:
        raise BudgetError(f"level + n + k = {level + n + k} exceeds {MAX_LEVEL}")
    js = list(range(1 << k))
    data = cell_density_data(g, js, k, n + level)
    masses = enclose(g, data, n, level, extrapolate=False)
    notes = []
    todo = [j for j in js if masses[j].relative_width > rtol]
    cur = n
    while todo and cur + 4 <= max_n and level + cur + 4 + k <= ADAPT_CAP:
        cur += 4
        # rerun in batches to bound memory
        batch = max(1, (1 << 22) >> (cur + level))
        for s in range(0, len(todo), batch):
            part = todo[s:s + batch]
            data = cell_density_data(g, part, k, cur + level)
            for j, e in zip(part, enclose(g, data, cur, level, extrapolate=False)):
                masses[j] = e
        todo = [j for j in todo if masses[j].relative_width > rtol]
    if todo:
        notes.append(f"budget exhausted: {len(todo)} interval(s) wider than rtol={rtol:g}: "
                     f"{todo[:8]}")
    return DyadicMassVector(k, masses, "certified-enclosure", notes)


def mass_vector_quadrature(g: GFunction, k: int, N: int = 14,
                           level: Optional[int] = None) -> DyadicMassVector:
    """Masses ``int_I g_N dx`` by one sweep of g_N, binned half-open into level-k cells."""
    level = N + 8 if level is None else level
    if level < N + 8:
        warnings.warn(f"level {level} < N + 8: g_N is undersampled", stacklevel=2)
    if level < k:
        raise MeasureError("quadrature level must be >= k")
    dens = density_g_n(g, N, level, log_space=True).values
    binned = dens.reshape(1 << k, -1)
    top = np.max(binned, axis=1, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(invalid="ignore"):
        logm = top[:, 0] + _log2(np.sum(np.exp2(binned - top), axis=1)) - level
    masses = [_point(v) for v in logm]
    return DyadicMassVector(k, masses, "density-quadrature",
                            [f"uncertified: g_{N} on the level {level} grid"])


def _point(log2_value: float) -> Enclosure:
    if not np.isfinite(log2_value):
        return Enclosure(0.0, 0.0, certified=False, method="quadrature")
    e = int(math.ceil(log2_value))
    v = 2.0 ** (log2_value - e)
    return Enclosure(v, v, certified=False, exponent=e, method="quadrature")


# ---------------------------------------------------------------------------
# Distribution function
# ---------------------------------------------------------------------------


@dataclass
class CDFTable:
    """``F_g(j / 2**k)`` for ``j = 0..2**k`` as enclosures and log2 midpoints."""

    level: int
    values: list
    log2_values: np.ndarray
    notes: list = field(default_factory=list)

    def cdf_at(self, x: float) -> Enclosure:
        """Bracket ``F_g(x)`` between neighbouring dyadic values (F is non-decreasing)."""
        if not 0.0 <= x <= 1.0:
            raise MeasureError("x must lie in [0, 1]")
        n = 1 << self.level
        a = math.floor(x * n)
        b = math.ceil(x * n)
        lo, hi = self.values[a], self.values[b]
        if a == b:
            return lo
        e = max(lo.exponent, hi.exponent)
        return Enclosure(math.ldexp(lo.lo, lo.exponent - e), math.ldexp(hi.hi, hi.exponent - e),
                         certified=lo.certified and hi.certified, exponent=e, method="bracket")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "F_lo", "F_hi", "log2F_mid"])
        n = 1 << self.level
        for j, (e, lm) in enumerate(zip(self.values, self.log2_values)):
            w.writerow([repr(j / n), repr(e.value_lo), repr(e.value_hi), repr(float(lm))])
        return buf.getvalue()


def _log_prefix(vals: np.ndarray) -> np.ndarray:
    """Prefix sums in log2; the first entry is the empty sum."""
    out = np.empty(len(vals) + 1)
    out[0] = -np.inf
    out[1:] = np.logaddexp2.accumulate(vals)
    return out


def cdf_from_masses(vec: DyadicMassVector, atom_at_zero: bool = False) -> CDFTable:
    """Prefix sums of masses, accumulated in log2 from the small end at 0."""
    def logs(attr):
        return np.array([e._log2(getattr(e, attr), e.exponent) for e in vec.masses])

    lo = _log_prefix(logs("lo"))
    hi = _log_prefix(logs("hi"))
    mid = _log_prefix(vec.log2_mids)
    # each log-add step is accurate to a few ulp of its magnitude
    steps = np.arange(len(lo))
    slack = 8 * EPS * (steps + 2) * np.maximum(1.0, np.abs(np.where(np.isfinite(lo), lo, 0)))
    lo = lo - slack
    hi = hi + slack
    certified = all(e.certified for e in vec.masses)
    values = []
    for j in range(len(lo)):
        if j == 0:
            f0 = 1.0 if atom_at_zero else 0.0
            values.append(Enclosure(f0, f0, method="cdf"))
            mid[0] = 0.0 if atom_at_zero else -np.inf
            continue
        e = int(math.ceil(hi[j])) if np.isfinite(hi[j]) else 0
        vlo = 2.0 ** (lo[j] - e) if np.isfinite(lo[j]) else 0.0
        vhi = 2.0 ** (hi[j] - e) if np.isfinite(hi[j]) else 0.0
        vmid = 2.0 ** (mid[j] - e) if np.isfinite(mid[j]) else 0.0
        values.append(Enclosure(vlo, vhi, certified=certified, exponent=e, method="cdf",
                                estimate=vmid))
    return CDFTable(vec.level, values, mid, list(vec.notes))


def cdf(g: GFunction, k: int, method: str = "certified", n: Optional[int] = None,
        level: Optional[int] = None, **kw) -> CDFTable:
    """Distribution function ``F_g(x) = mu_g([0, x])`` at the level-k dyadic points."""
    if method == "certified":
        vec = mass_vector_certified(g, k, MASS_N if n is None else n,
                                    MASS_LEVEL if level is None else level, **kw)
    elif method == "quadrature":
        vec = mass_vector_quadrature(g, k, 14 if n is None else n, level)
    else:
        raise MeasureError(f"unknown method {method!r}; use certified or quadrature")
    pp = any(e.method == "fixed-point" for e in vec.masses)
    return cdf_from_masses(vec, atom_at_zero=pp)


def kappa(g: GFunction, n: int = MASS_N, level: int = MASS_LEVEL,
          override: bool = False) -> Enclosure:
    """``kappa = mu_g([1/2, 1])``; exactly 1/2 for symmetric g."""
    if _regime(g, override) == "pp":
        raise MeasureError("kappa is not defined for the Dirac case g(1/2) = 0")
    if g.symmetric:
        return Enclosure(0.5, 0.5, method="symmetry")
    return dyadic_interval_mass(g, 1, 1, n, level, override=override)


# ---------------------------------------------------------------------------
# Fourier coefficients
# ---------------------------------------------------------------------------


@dataclass
class FourierTable:
    """``mu_hat(n) = int exp(-2 pi i n x) dmu`` with real and imaginary parts enclosed."""

    n: list
    real: list
    imag: list
    method: str = "transfer"

    def index(self, m: int) -> int:
        return self.n.index(m)

    def mids(self) -> np.ndarray:
        return np.array([complex(r.mid, i.mid) for r, i in zip(self.real, self.imag)])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "re_lo", "re_hi", "im_lo", "im_hi"])
        for m, r, i in zip(self.n, self.real, self.imag):
            w.writerow([m, repr(r.value_lo), repr(r.value_hi), repr(i.value_lo),
                        repr(i.value_hi)])
        return buf.getvalue()


def fourier_coefficients(g: GFunction, N: int, n: int = FOURIER_N,
                         level: Optional[int] = None, override: bool = False) -> FourierTable:
    """Enclosures of ``mu_hat(0..N)`` via ``mu_g(cos 2 pi m x)`` and ``mu_g(sin 2 pi m x)``."""
    if N < 0:
        raise MeasureError("N must be >= 0")
    need = math.ceil(math.log2(max(N, 1))) + 4
    level = need if level is None else level
    if level < need:
        raise MeasureError(f"level {level} does not resolve frequency {N}; need >= {need}")
    if _regime(g, override) == "pp":
        # mu_g = delta_0: every coefficient is exp(0) = 1
        re = [Enclosure(1.0, 1.0, method="fixed-point") for _ in range(N + 1)]
        im = [Enclosure(0.0, 0.0, method="fixed-point") for _ in range(N + 1)]
        return FourierTable(list(range(N + 1)), re, im, "fixed-point")
    re, im = [], []
    for m in range(N + 1):
        if m == 0:
            re.append(Enclosure.exact(1.0))
            im.append(Enclosure.exact(0.0))
            continue
        re.append(mu_of_function(g, TrigMode(m, "cos"), n, level, override=True))
        s = mu_of_function(g, TrigMode(m, "sin"), n, level, override=True)
        im.append(Enclosure(-s.hi, -s.lo, s.modulus_pad, s.n_iterations, s.certified,
                            -s.raw_hi, -s.raw_lo, method=s.method,
                            estimate=None if s.estimate is None else -s.estimate))
    return FourierTable(list(range(N + 1)), re, im)


def fourier_dft(g: GFunction, N: int, n: int = 14, level: Optional[int] = None) -> FourierTable:
    """Uncertified coefficients from an FFT of g_n sampled on the level grid."""
    level = n + 8 if level is None else level
    dens = density_g_n(g, n, level).values
    coef = np.fft.fft(dens)[: N + 1] / len(dens)
    re = [Enclosure(c.real, c.real, certified=False, method="dft") for c in coef]
    im = [Enclosure(c.imag, c.imag, certified=False, method="dft") for c in coef]
    return FourierTable(list(range(N + 1)), re, im, "dft")


@dataclass
class DoublingReport:
    pairs: list
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def doubling_relation_check(table: FourierTable, tol: float = 0.0) -> DoublingReport:
    """``mu_hat(m) = mu_hat(2m)`` holds for any doubling-invariant measure."""
    pairs, bad = [], []
    for m in table.n:
        if m == 0 or 2 * m not in table.n:
            continue
        a, b = table.index(m), table.index(2 * m)
        ok = (table.real[a].overlaps(table.real[b], tol)
              and table.imag[a].overlaps(table.imag[b], tol))
        pairs.append((m, 2 * m, ok))
        if not ok:
            bad.append(m)
    return DoublingReport(pairs, bad)


# ---------------------------------------------------------------------------
# Thue-Morse autocorrelation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AutocorrSeq:
    eta: tuple

    def __getitem__(self, m: int) -> Fraction:
        return self.eta[m]

    def __len__(self):
        return len(self.eta)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "eta_num", "eta_den"])
        for m, e in enumerate(self.eta):
            w.writerow([m, e.numerator, e.denominator])
        return buf.getvalue()


def tm_autocorrelation(M: int) -> AutocorrSeq:
    """Exact ``eta(0..M)`` from ``eta(2m) = eta(m)``, ``eta(2m+1) = -(eta(m) + eta(m+1))/2``.

    At m = 0 the odd rule reads ``eta(1) = -(1 + eta(1))/2``, so ``eta(1) = -1/3``;
    after that every index refers to strictly smaller ones.
    """
    if M < 0:
        raise MeasureError("M must be >= 0")
    eta = [Fraction(1)]
    if M >= 1:
        eta.append(Fraction(-1, 3))
    for i in range(2, M + 1):
        m = i // 2
        eta.append(eta[m] if i % 2 == 0 else -(eta[m] + eta[m + 1]) / 2)
    return AutocorrSeq(tuple(eta))

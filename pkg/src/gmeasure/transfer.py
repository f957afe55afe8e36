"""Transfer operator on dyadic grids and enclosures of mu_g(f).

One application of ``(phi_g f)(x) = g(x/2) f(x/2) + g((x+1)/2) f((x+1)/2)``
maps samples on the level-l grid to the level-(l-1) grid, because both
preimages of a level-(l-1) point are level-l points. Iterating n times from
level m+n costs Theta(2**(m+n)).

Enclosures combine two routes, each valid because ``mu_g(phi_g^n f) = mu_g(f)``
and mu_g is a probability measure, so ``mu_g(f)`` lies between the infimum and
supremum of ``phi_g^n f`` over the torus:

* point grid: grid min/max of ``phi_g^n f`` widened by a propagated modulus
  of continuity bound;
* cell grid: lower/upper bounds of ``phi_g^n f`` on every dyadic cell,
  carried through the recursion with interval bounds on g.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._backend import kernels
from .gfunction import GFunction

EPS = np.finfo(np.float64).eps
MAX_LEVEL = 30
_TINY = 2.0**-1070


class TransferError(ValueError):
    pass


class BudgetError(TransferError):
    """Requested grid exceeds the level + n memory cap."""


class NotGoodError(TransferError):
    """g fails every goodness condition, so phi_g^n f need not converge."""


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridFunction:
    """Samples ``values[j] = f(j / 2**level)``; log2 of f when ``log_space``."""

    level: int
    values: np.ndarray
    log_space: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (1 << self.level,):
            raise TransferError(
                f"level {self.level} grid needs {1 << self.level} values, got {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return np.arange(1 << self.level) / float(1 << self.level)

    def linear_values(self) -> np.ndarray:
        return np.exp2(self.values) if self.log_space else self.values

    def quadrature(self) -> float:
        """Periodic trapezoidal rule over the torus (the grid mean)."""
        if self.log_space:
            return float(2.0 ** (log2_sum(self.values) - self.level))
        return float(math.fsum(self.values) / len(self.values))


@dataclass
class Enclosure:
    """``[lo, hi] * 2**exponent`` contains the target value.

    ``raw_lo``/``raw_hi`` are the grid min/max before any widening, in the
    same scaled frame. ``certified`` is False when the widening rests on a
    heuristic rather than a propagated bound. ``estimate`` is an optional best
    point value inside ``[lo, hi]`` (for transfer enclosures, the grid mean of
    phi_g^n f); ``mid`` reports it when set and the center otherwise.
    """

    lo: float
    hi: float
    modulus_pad: float = 0.0
    n_iterations: int = 0
    certified: bool = True
    raw_lo: Optional[float] = None
    raw_hi: Optional[float] = None
    exponent: int = 0
    method: str = "exact"
    notes: list = field(default_factory=list)
    estimate: Optional[float] = None

    def __post_init__(self):
        self.lo, self.hi = float(self.lo), float(self.hi)
        if not self.lo <= self.hi:
            raise TransferError(f"enclosure lo {self.lo!r} > hi {self.hi!r}")
        if self.raw_lo is None:
            self.raw_lo, self.raw_hi = self.lo, self.hi
        self.raw_lo, self.raw_hi = float(self.raw_lo), float(self.raw_hi)
        if self.estimate is not None:
            self.estimate = min(max(float(self.estimate), self.lo), self.hi)

    @classmethod
    def exact(cls, value: float) -> "Enclosure":
        return cls(value, value)

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def mid(self) -> float:
        c = self.center if self.estimate is None else self.estimate
        return math.ldexp(c, self.exponent)

    @property
    def width(self) -> float:
        return math.ldexp(self.hi - self.lo, self.exponent)

    @property
    def raw_width(self) -> float:
        return math.ldexp(self.raw_hi - self.raw_lo, self.exponent)

    @property
    def value_lo(self) -> float:
        return math.ldexp(self.lo, self.exponent)

    @property
    def value_hi(self) -> float:
        return math.ldexp(self.hi, self.exponent)

    @staticmethod
    def _log2(v: float, e: int) -> float:
        return math.log2(v) + e if v > 0 else -math.inf

    @property
    def log2_lo(self) -> float:
        return self._log2(self.lo, self.exponent)

    @property
    def log2_hi(self) -> float:
        return self._log2(self.hi, self.exponent)

    @property
    def log2_mid(self) -> float:
        c = self.center if self.estimate is None else self.estimate
        return self._log2(c, self.exponent)

    @property
    def relative_width(self) -> float:
        m = self.center
        if m:
            return (self.hi - self.lo) / abs(m)
        return 0.0 if self.hi == self.lo else math.inf

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.value_lo - tol <= value <= self.value_hi + tol

    def overlaps(self, other: "Enclosure", tol: float = 0.0) -> bool:
        return self.value_lo <= other.value_hi + tol and other.value_lo <= self.value_hi + tol

    def __add__(self, other: "Enclosure") -> "Enclosure":
        e = max(self.exponent, other.exponent)
        lo = math.ldexp(self.lo, self.exponent - e) + math.ldexp(other.lo, other.exponent - e)
        hi = math.ldexp(self.hi, self.exponent - e) + math.ldexp(other.hi, other.exponent - e)
        return Enclosure(lo * (1 - 2 * EPS), hi * (1 + 2 * EPS) + _TINY, 0.0,
                         max(self.n_iterations, other.n_iterations),
                         self.certified and other.certified, exponent=e, method="sum")

    def __repr__(self):
        if self.exponent:
            return (f"Enclosure(log2 in [{self.log2_lo:.6f}, {self.log2_hi:.6f}], "
                    f"certified={self.certified})")
        return f"Enclosure([{self.lo!r}, {self.hi!r}], certified={self.certified})"


def log2_sum(log_values) -> float:
    """``log2(sum(2**v))`` accumulated smallest-first with compensated summation."""
    v = np.asarray(log_values, dtype=np.float64).ravel()
    v = v[np.isfinite(v) | (v > 0)]
    if v.size == 0:
        return -math.inf
    top = float(v.max())
    if math.isinf(top):
        return top
    scaled = np.sort(np.exp2(v - top))
    return top + math.log2(math.fsum(scaled))


# ---------------------------------------------------------------------------
# Closed-form test functions
# ---------------------------------------------------------------------------


@dataclass
class GridData:
    """Samples of one or more functions on the level-``top`` grid, ready for the DP.

    All arrays have shape (rows, 2**top). True values are ``values * 2**exponent``
    row-wise. ``lo``/``hi`` bound each row on the cells ``[j, j+1] / 2**top``.
    """

    values: np.ndarray
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    exponent: Optional[np.ndarray] = None
    cells_certified: bool = False
    modulus_top: Optional[np.ndarray] = None
    sup: Optional[np.ndarray] = None
    rel_err: float = 4 * EPS

    def __post_init__(self):
        self.values = np.atleast_2d(self.values)
        rows = self.values.shape[0]
        if self.exponent is None:
            self.exponent = np.zeros(rows, dtype=np.int64)
        if self.lo is not None:
            self.lo = np.atleast_2d(self.lo)
            self.hi = np.atleast_2d(self.hi)
            if self.modulus_top is None:
                # any |x - y| <= cell width spans at most two adjacent cells
                lo_next = np.roll(self.lo, -1, axis=1)
                hi_next = np.roll(self.hi, -1, axis=1)
                self.modulus_top = np.max(np.maximum(self.hi, hi_next)
                                          - np.minimum(self.lo, lo_next), axis=1)
        if self.sup is None:
            src = self.hi if self.hi is not None else self.values
            low = self.lo if self.lo is not None else self.values
            self.sup = np.maximum(np.abs(np.max(src, axis=1)), np.abs(np.min(low, axis=1)))


class ClosedForm:
    """A function on the torus that can be sampled on dyadic grids.

    Subclasses override :meth:`grid_data`; the default wraps a vectorized
    callable with optional Hoelder constants ``(C, alpha)``.
    """

    def __init__(self, func: Callable, holder: Optional[tuple] = None,
                 sup: Optional[float] = None, name: str = "f"):
        self.func = func
        self.holder = holder
        self.sup_bound = sup
        self.name = name

    def __call__(self, x):
        return self.func(np.mod(np.asarray(x, dtype=np.float64), 1.0))

    def grid_data(self, level: int, cells: bool = True) -> GridData:
        n = 1 << level
        x = np.arange(n + 1) / float(n)
        v = np.asarray(self.func(np.mod(x, 1.0)), dtype=np.float64)
        # the right end of the last cell is the limit x -> 1, evaluated as f(1)
        v[-1] = float(np.asarray(self.func(np.array([1.0])))[0])
        lo = hi = None
        certified = False
        if cells and self.holder is not None:
            c, alpha = self.holder
            pad = c * (0.5 / n) ** alpha
            lo = np.minimum(v[:-1], v[1:]) - pad
            hi = np.maximum(v[:-1], v[1:]) + pad
            certified = True
        sup = None if self.sup_bound is None else np.array([self.sup_bound])
        return GridData(v[:-1], lo, hi, cells_certified=certified, sup=sup)


class Constant(ClosedForm):
    def __init__(self, c: float):
        super().__init__(lambda x: np.full_like(x, c, dtype=np.float64), (0.0, 1.0), abs(c),
                         name=f"const({c})")
        self.c = c

    def grid_data(self, level, cells=True):
        n = 1 << level
        v = np.full(n, float(self.c))
        return GridData(v, v.copy(), v.copy(), cells_certified=True)


class TrigMode(ClosedForm):
    """``cos(2 pi m x)`` or ``sin(2 pi m x)`` with exact cell ranges."""

    def __init__(self, m: int, kind: str = "cos"):
        if kind not in ("cos", "sin"):
            raise ValueError("kind must be cos or sin")
        self.m, self.kind = int(m), kind
        fn = np.cos if kind == "cos" else np.sin
        super().__init__(lambda x: fn(2.0 * np.pi * self.m * x),
                         (2.0 * np.pi * abs(self.m), 1.0), 1.0, name=f"{kind}{m}")

    def _values(self, idx, level):
        # reduce m*j mod 2**level first so the phase stays exact
        n = 1 << level
        ph = (idx * (self.m % n)) % n
        ang = 2.0 * np.pi * ph / n
        return np.cos(ang) if self.kind == "cos" else np.sin(ang)

    def grid_data(self, level, cells=True):
        n = 1 << level
        idx = np.arange(n + 1, dtype=np.int64)
        v = self._values(idx, level)
        if not cells:
            return GridData(v[:-1], sup=np.array([1.0]))
        lo = np.minimum(v[:-1], v[1:])
        hi = np.maximum(v[:-1], v[1:])
        m = abs(self.m)
        if m:
            # extrema of cos(2 pi m x) sit at x = i / (2m); of sin at (2i + 1) / (4m)
            a = idx[:-1] / float(n)
            b = idx[1:] / float(n)
            if self.kind == "cos":
                i = np.ceil(2 * m * a)
                inside = i / (2 * m) <= b
                peak = np.where(i % 2 == 0, 1.0, -1.0)
            else:
                i = np.ceil((4 * m * a - 1) / 2)
                inside = (2 * i + 1) / (4 * m) <= b
                peak = np.where(i % 2 == 0, 1.0, -1.0)
            hi = np.where(inside & (peak > 0), 1.0, hi)
            lo = np.where(inside & (peak < 0), -1.0, lo)
        return GridData(v[:-1], lo - 4 * EPS, hi + 4 * EPS, cells_certified=True,
                        sup=np.array([1.0]))


def as_closed_form(f) -> ClosedForm:
    if isinstance(f, ClosedForm):
        return f
    if isinstance(f, (int, float)):
        return Constant(float(f))
    if callable(f):
        return ClosedForm(f)
    raise TypeError(f"cannot use {type(f).__name__} as a test function")


# ---------------------------------------------------------------------------
# Transfer steps
# ---------------------------------------------------------------------------


def _g_half(g: GFunction, level: int) -> np.ndarray:
    """g at ``j / 2**level`` for ``0 <= j <= 2**(level-1)``."""
    return g.sample(level, 0, (1 << (level - 1)) + 1)


def apply_transfer(g: GFunction, f: GridFunction) -> GridFunction:
    """One application of phi_g: level-l samples to level-(l-1) samples."""
    if f.level < 1:
        raise TransferError("cannot apply the transfer operator to a level-0 grid")
    v = np.array(f.linear_values(), dtype=np.float64)
    half = len(v) // 2
    kernels.grid_step(v, _g_half(g, f.level), half)
    return GridFunction(f.level - 1, v[:half].copy())


def _check_budget(level: int, n: int, max_level: int):
    if n < 0 or level < 0:
        raise TransferError("level and n must be non-negative")
    if level + n > max_level:
        raise BudgetError(
            f"level + n = {level + n} exceeds the memory cap {max_level}")


def iterate_transfer(g: GFunction, f, n: int, target_level: int,
                     max_level: int = MAX_LEVEL) -> GridFunction:
    """``phi_g^n f`` on the level-``target_level`` grid, from samples at level m+n."""
    _check_budget(target_level, n, max_level)
    data = as_closed_form(f).grid_data(target_level + n, cells=False)
    run = _propagate(g, data, target_level + n, n, cells=False)
    values = np.ldexp(run.values[0], int(data.exponent[0]))
    return GridFunction(target_level, values)


def density_g_n(g: GFunction, n: int, level: int, log_space: bool = False) -> GridFunction:
    """``g_n(x) = 2**n prod_{k<n} g(2**k x)`` on the level grid.

    In log space zeros of g give ``-inf``. Doubling a level-m point stays on
    the level-m grid, so the product is a table lookup along each orbit.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if level < n:
        warnings.warn(f"level {level} < n={n}: g_n is undersampled", stacklevel=2)
    vals = g.sample(level)
    with np.errstate(divide="ignore"):
        logg = np.log2(np.maximum(vals, 0.0))
    out = kernels.log_density(np.ascontiguousarray(logg), level, n)
    if log_space:
        return GridFunction(level, out, log_space=True)
    return GridFunction(level, np.exp2(out))


# ---------------------------------------------------------------------------
# The dynamic program
# ---------------------------------------------------------------------------


@dataclass
class _Run:
    values: np.ndarray
    lo: Optional[np.ndarray]
    hi: Optional[np.ndarray]
    grid_osc: np.ndarray  # shape (rows, n + 1): osc of phi^k f on its grid, k = 0..n
    means: np.ndarray  # grid means of phi^k f, same shape
    g_cells_certified: bool


def _propagate(g: GFunction, data: GridData, top: int, n: int, cells: bool = True) -> _Run:
    # the DP works in place: contiguous rows of ``data`` are overwritten
    rows = data.values.shape[0]
    vals = [np.ascontiguousarray(data.values[r], dtype=np.float64) for r in range(rows)]
    use_cells = cells and data.lo is not None
    lows = [np.ascontiguousarray(data.lo[r]) for r in range(rows)] if use_cells else None
    highs = [np.ascontiguousarray(data.hi[r]) for r in range(rows)] if use_cells else None
    osc = np.empty((rows, n + 1))
    means = np.empty((rows, n + 1))
    for r in range(rows):
        osc[r, 0] = vals[r].max() - vals[r].min()
        means[r, 0] = vals[r].mean()
    g_cert = True
    gtop = _g_half(g, top) if n else None
    for k in range(n):
        lev = top - k
        half = 1 << (lev - 1)
        gpts = gtop[:: 1 << k]
        if use_cells:
            gl, gh, cert = g.cell_ranges(lev, 0, 1, half, endpoints=gpts)
            g_cert = g_cert and cert
        for r in range(rows):
            mn, mx, total = kernels.grid_step(vals[r], gpts, half)
            osc[r, k + 1] = mx - mn
            means[r, k + 1] = total / half
            vals[r] = vals[r][:half]
            if use_cells:
                kernels.cell_step(lows[r], highs[r], gl, gh, half)
                lows[r] = lows[r][:half]
                highs[r] = highs[r][:half]
    return _Run(np.array(vals), np.array(lows) if use_cells else None,
                np.array(highs) if use_cells else None, osc, means, g_cert)


def extrapolate_means(means: Sequence[float]) -> float:
    """Aitken's delta-squared on the last three grid means of phi^k f.

    The grid mean of phi^k f is the level-(m+n) trapezoid value of
    ``int g_k f dx``, which converges geometrically in k; the extrapolated
    value is only a point estimate and is clipped to the enclosure.
    """
    if len(means) < 3:
        return float(means[-1])
    a0, a1, a2 = (float(v) for v in means[-3:])
    d1, d2 = a1 - a0, a2 - a1
    denom = d2 - d1
    if d1 == 0 or denom == 0 or not abs(d2 / d1) < 1:
        return a2
    return a2 - d2 * d2 / denom


def modulus_propagation(f_modulus, sup_f: float, g_modulus, n: int, delta: float,
                        grid_osc: Optional[Sequence[float]] = None) -> float:
    """Bound on ``(phi_g^n f)[delta]`` by iterating
    ``(phi_g h)[d] <= osc(h) g[d/2] + h[d/2]`` with ``osc(h) <= osc(f) <= 2 sup|f|``.

    ``f_modulus`` and ``g_modulus`` are callables or ModulusProfiles, queried
    at the scales ``delta / 2**k``. ``grid_osc[k]``, if given, is the observed
    oscillation of ``phi_g^k f`` on its sampling grid (spacing
    ``delta / 2**(n-k)``); it tightens the oscillation bound to
    ``grid_osc[k] + 2 * (modulus at that spacing)``.
    """
    def lookup(mod, d):
        try:
            return float(mod(d))
        except KeyError as exc:
            raise TransferError(f"missing modulus entry at scale {d!r}") from exc

    d0 = delta * 2.0**-n
    bound = lookup(f_modulus, d0)
    # points of the torus are at most 1/2 apart, so chaining steps of d0 gives
    # osc(f) <= ceil(1 / (2 d0)) f[d0]; phi_g never increases the oscillation
    osc_f = min(2.0 * sup_f, math.ceil(0.5 / d0) * bound)
    for k in range(1, n + 1):
        scale = delta * 2.0 ** -(n - k + 1)
        osc = osc_f
        if grid_osc is not None:
            osc = min(osc, grid_osc[k - 1] + 2.0 * bound)
        bound = osc * lookup(g_modulus, scale) + bound
    return bound


def _heuristic_pad(v: np.ndarray) -> float:
    if len(v) < 3:
        return float(np.max(v) - np.min(v))
    d2 = np.roll(v, 1) - 2 * v + np.roll(v, -1)
    return float(np.max(np.abs(d2)))


def enclose(g: GFunction, data: GridData, n: int, level: int, cells: bool = True,
            extrapolate: bool = True) -> list:
    """Enclosures of ``mu_g`` applied to every row of ``data`` (sampled at level+n).

    The point estimate is the extrapolated grid mean, or the plain grid mean
    when ``extrapolate`` is False; the plain mean is linear in f, so estimates
    for a partition of unity still add up to 1.
    """
    top = level + n
    run = _propagate(g, data, top, n, cells=cells)
    out = []
    for r in range(run.values.shape[0]):
        v = run.values[r]
        raw_lo, raw_hi = float(v.min()), float(v.max())
        sup = float(data.sup[r])
        roundoff = (4 * (n + 2) * EPS + data.rel_err) * sup + (n + 2) * _TINY
        notes = []
        if data.modulus_top is not None and g.holder is not None:
            pad = modulus_propagation(lambda d, m=float(data.modulus_top[r]): m, sup,
                                      g.modulus_bound, n, 2.0**-level, run.grid_osc[r])
            pad_certified = data.cells_certified
        else:
            pad = _heuristic_pad(v)
            pad_certified = False
            notes.append("heuristic modulus pad")
        lo, hi = raw_lo - pad - roundoff, raw_hi + pad + roundoff
        certified = pad_certified
        c_lo = c_hi = None
        if run.lo is not None:
            c_lo = float(run.lo[r].min()) - roundoff
            c_hi = float(run.hi[r].max()) + roundoff
            c_cert = data.cells_certified and run.g_cells_certified
            if c_cert and not certified:
                lo, hi = c_lo, c_hi
                certified = True
            elif c_cert or not certified:
                lo, hi = max(lo, c_lo), min(hi, c_hi)
            if lo > hi:
                notes.append("point and cell routes disagree")
                lo, hi = min(lo, c_lo), max(hi, c_hi)
                certified = False
        if pad > raw_hi - raw_lo and pad > 0 and hi - lo > (c_hi - c_lo if run.lo is not None
                                                            else math.inf):
            notes.append("modulus pad exceeds raw width")
        out.append(Enclosure(lo, hi, pad, n, certified, raw_lo, raw_hi,
                             int(data.exponent[r]), "transfer", notes,
                             estimate=(extrapolate_means(run.means[r]) if extrapolate
                                       else run.means[r, -1])))
    return out


def contraction_profile(g: GFunction, f, n: int, level: int,
                        max_level: int = MAX_LEVEL) -> np.ndarray:
    """Raw grid width ``max - min`` of ``phi_g^k f`` for ``k = 0..n``.

    One pass from level+n: the k-th entry is taken on the level+n-k grid.
    Each output value is a convex combination of inputs, so the widths
    never increase.
    """
    _check_budget(level, n, max_level)
    data = as_closed_form(f).grid_data(level + n, cells=False)
    run = _propagate(g, data, level + n, n, cells=False)
    return np.ldexp(run.grid_osc[0], int(data.exponent[0]))


def mu_of_function(g: GFunction, f, n: int = 20, level: int = 6, *, cells: bool = True,
                   override: bool = False, max_level: int = MAX_LEVEL) -> Enclosure:
    """Enclosure of ``mu_g(f)`` from ``phi_g^n f`` on the level grid.

    ``override`` skips the goodness check for g.
    """
    if not override:
        from .classify import check_goodness

        report = check_goodness(g)
        if not report.good:
            raise NotGoodError(f"g-function {g.name!r} is not good: {'; '.join(report.notes)}")
    _check_budget(level, n, max_level)
    f = as_closed_form(f)
    data = f.grid_data(level + n, cells=cells)
    return enclose(g, data, n, level, cells=cells)[0]

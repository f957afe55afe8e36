"""g-functions on the circle: construction, validation, moduli and scaling envelopes.

A g-function satisfies ``g >= 0`` and ``g(x) + g(x + 1/2) = 1`` on the torus
``[0, 1)``. Points are plain floats; dyadic grid points ``j / 2**m`` are
exact in binary floating point.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from ._backend import kernels

DEFAULT_TOL = 1e-9
BUILTIN_NAMES = ("tm", "tent", "sqrt", "half", "coshift")
_CHUNK = 1 << 22


class GFunctionError(ValueError):
    """Raised for malformed or invalid g-function descriptions."""


# ---------------------------------------------------------------------------
# Zero sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IrrationalZero:
    """A zero localized in ``[lo, hi]`` that the user asserts is irrational.

    ``not_eventually_periodic`` records the assertion that the doubling orbit
    of the zero never enters a cycle; it cannot be checked numerically.
    """

    lo: float
    hi: float
    not_eventually_periodic: bool = True

    def __post_init__(self):
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            raise GFunctionError(f"bad bracket [{self.lo}, {self.hi}]")

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


Zero = Union[Fraction, IrrationalZero]


@dataclass(frozen=True)
class ZeroSpec:
    zeros: tuple = ()
    complete: bool = True

    def __post_init__(self):
        fixed = []
        for z in self.zeros:
            if isinstance(z, IrrationalZero):
                fixed.append(z)
                continue
            q = Fraction(z)
            if not 0 <= q < 1:
                raise GFunctionError(f"rational zero {q} not in [0, 1)")
            fixed.append(q)
        object.__setattr__(self, "zeros", tuple(fixed))

    @property
    def rational(self) -> list[Fraction]:
        return [z for z in self.zeros if isinstance(z, Fraction)]

    @property
    def irrational(self) -> list[IrrationalZero]:
        return [z for z in self.zeros if isinstance(z, IrrationalZero)]

    def __len__(self):
        return len(self.zeros)


# ---------------------------------------------------------------------------
# Scaling envelope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingEnvelope:
    """Constants with ``c1 x**theta1 <= g(x) <= c2 x**theta2`` on ``[0, 1/2]``."""

    c1: float
    theta1: float
    c2: float
    theta2: float

    def __post_init__(self):
        if min(self.c1, self.c2, self.theta1, self.theta2) <= 0:
            raise GFunctionError("envelope constants must be positive")
        if self.theta2 > self.theta1:
            raise GFunctionError("envelope needs theta2 <= theta1")

    @property
    def s(self) -> float:
        return min(1.0, self.c1)

    @property
    def S(self) -> float:
        return max(1.0, self.c2)


@dataclass
class EnvelopeReport:
    envelope: ScalingEnvelope
    verified: bool
    fitted: bool
    level: int
    witness: Optional[float] = None
    violated: Optional[str] = None

    def __str__(self):
        e = self.envelope
        head = (f"envelope c1={e.c1:.6g} theta1={e.theta1:.6g} "
                f"c2={e.c2:.6g} theta2={e.theta2:.6g}")
        if self.verified:
            return f"{head}: verified on level {self.level} grid"
        return f"{head}: {self.violated} bound violated at x={self.witness!r}"


# ---------------------------------------------------------------------------
# g-functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GFunction:
    """An evaluatable g-function with metadata.

    ``holder = (C, alpha)`` certifies the modulus ``g[delta] <= C delta**alpha``.
    ``monotone_level = l`` certifies that g is monotone on every dyadic cell
    of level ``>= l``, so cell ranges come from endpoint values.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    zero_spec: ZeroSpec = field(default_factory=ZeroSpec)
    envelope: Optional[ScalingEnvelope] = None
    symmetric: bool = False
    holder: Optional[tuple[float, float]] = None
    monotone_level: Optional[int] = None
    sampler: Optional[Callable[[int, int, int, int], np.ndarray]] = None
    description: str = ""
    notes: tuple = ()

    def __call__(self, x):
        x = np.mod(np.asarray(x, dtype=np.float64), 1.0)
        return self.func(x)

    def riesz_factor(self, x):
        """h = 2g, the factor of the Riesz product."""
        return 2.0 * self(x)

    def modulus_bound(self, delta: float) -> Optional[float]:
        """Certified upper bound on g[delta], or None if no closed form is known."""
        if self.holder is None:
            return None
        c, alpha = self.holder
        return min(1.0, c * delta**alpha)

    def sample_affine(self, level: int, start: int, step: int, count: int) -> np.ndarray:
        """g at ``((start + i*step) mod 2**level) / 2**level`` for ``i < count``."""
        if self.sampler is not None:
            return self.sampler(level, start, step, count)
        full = 1 << level
        out = np.empty(count, dtype=np.float64)
        for lo in range(0, count, _CHUNK):
            hi = min(count, lo + _CHUNK)
            idx = (start + np.arange(lo, hi, dtype=np.int64) * step) % full
            out[lo:hi] = self.func(idx * (1.0 / full))
        return out

    def sample(self, level: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        """g at the level grid points ``j / 2**level`` for ``start <= j < stop``."""
        if stop is None:
            stop = 1 << level
        return self.sample_affine(level, start, 1, stop - start)

    def cell_ranges(self, level: int, start: int, step: int, count: int,
                    endpoints: Optional[np.ndarray] = None):
        """Enclose g on the level cells ``[a, a + 2**-level]`` with affine left indices.

        Returns ``(lo, hi, certified)``. ``endpoints`` may pass precomputed
        values at the ``count + 1`` cell endpoints when ``step == 1``.
        """
        if endpoints is None:
            if step == 1:
                endpoints = self.sample_affine(level, start, 1, count + 1)
                left, right = endpoints[:-1], endpoints[1:]
            else:
                left = self.sample_affine(level, start, step, count)
                right = self.sample_affine(level, start + 1, step, count)
        else:
            left, right = endpoints[:-1], endpoints[1:]
        lo = np.minimum(left, right)
        hi = np.maximum(left, right)
        width = 2.0**-level
        if self.monotone_level is not None and level >= self.monotone_level:
            return lo, hi, True
        if self.holder is not None:
            pad = self.modulus_bound(0.5 * width)
            return np.maximum(lo - pad, 0.0), np.minimum(hi + pad, 1.0), True
        # no certificate: refine with interior samples
        mids = self.sample_affine(level + 3, 8 * start + 4, 8 * step, count)
        return np.minimum(lo, mids), np.maximum(hi, mids), False

    def with_notes(self, *notes: str) -> "GFunction":
        return GFunction(**{**self.__dict__, "notes": self.notes + tuple(notes)})


def _tm(x):
    x = np.minimum(x, 1.0 - x)
    return np.sin(np.pi * x) ** 2


def _coshift(x):
    return _tm(np.mod(x + 0.5, 1.0))


def _tent(x):
    return np.where(x <= 0.5, 2.0 * x, 2.0 * (1.0 - x))


def _sqrt(x):
    out = np.empty_like(x)
    a = x <= 0.25
    c = x > 0.75
    b = ~(a | c)
    out[a] = np.sqrt(x[a])
    out[b] = 1.0 - np.sqrt(np.abs(x[b] - 0.5))
    out[c] = np.sqrt(1.0 - x[c])
    return out


def _half(x):
    return np.full_like(x, 0.5)


def _tm_sampler(level, start, step, count):
    return kernels.sinpi_sq_affine(level, start, step, count)


def _coshift_sampler(level, start, step, count):
    if level == 0:
        return np.ones(count)
    return kernels.sinpi_sq_affine(level, start + (1 << (level - 1)), step, count)


def make_builtin(name: str) -> GFunction:
    """One of the guide g-functions ``tm``, ``tent``, ``sqrt``, ``half``, ``coshift``."""
    zero = Fraction(0)
    if name == "tm":
        return GFunction(
            "tm", _tm, ZeroSpec((zero,)), ScalingEnvelope(4.0, 2.0, math.pi**2, 2.0),
            symmetric=True, holder=(math.pi, 1.0), monotone_level=1,
            sampler=_tm_sampler, description="builtin:tm")
    if name == "tent":
        return GFunction(
            "tent", _tent, ZeroSpec((zero,)), ScalingEnvelope(2.0, 1.0, 2.0, 1.0),
            symmetric=True, holder=(2.0, 1.0), monotone_level=1, description="builtin:tent")
    if name == "sqrt":
        return GFunction(
            "sqrt", _sqrt, ZeroSpec((zero,)),
            ScalingEnvelope(1.0, 0.5, math.sqrt(2.0), 0.5),
            symmetric=True, holder=(math.sqrt(2.0), 0.5), monotone_level=1,
            description="builtin:sqrt")
    if name == "half":
        return GFunction("half", _half, ZeroSpec(()), None, symmetric=True,
                         holder=(0.0, 1.0), monotone_level=0, description="builtin:half")
    if name == "coshift":
        return GFunction(
            "coshift", _coshift, ZeroSpec((Fraction(1, 2),)), None, symmetric=True,
            holder=(math.pi, 1.0), monotone_level=1, sampler=_coshift_sampler,
            description="builtin:coshift")
    raise GFunctionError(
        f"unknown builtin g-function {name!r}; valid names: {', '.join(BUILTIN_NAMES)}")


# ---------------------------------------------------------------------------
# Piecewise g-functions and the text format
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    kind: str
    coeffs: tuple

    def __post_init__(self):
        if self.kind not in ("poly", "cos"):
            raise GFunctionError(f"segment kind must be poly or cos, got {self.kind!r}")
        if not self.coeffs:
            raise GFunctionError("segment needs at least one coefficient")
        if not self.lo < self.hi:
            raise GFunctionError(f"empty segment [{self.lo}, {self.hi})")

    def evaluate(self, x):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if self.kind == "poly":
            return np.polynomial.polynomial.polyval(x, c)
        k = np.arange(len(c))
        return np.cos(2.0 * np.pi * np.multiply.outer(x, k)) @ c

    def lipschitz(self) -> float:
        """Bound on |derivative| over the segment."""
        if self.kind == "poly":
            r = max(abs(self.lo), abs(self.hi))
            return sum(abs(c) * i * r ** (i - 1) for i, c in enumerate(self.coeffs) if i)
        return sum(abs(c) * 2.0 * math.pi * i for i, c in enumerate(self.coeffs))


def make_piecewise(segments: Sequence, name: str = "piecewise",
                   zero_spec: Optional[ZeroSpec] = None, symmetric: bool = False,
                   tol: float = DEFAULT_TOL, level: int = 14,
                   validate: bool = True) -> GFunction:
    """Build a g-function from ``(lo, hi, kind, coeffs)`` segments covering [0, 1).

    ``poly`` coefficients are in increasing degree in x; ``cos`` coefficients
    ``a_k`` give ``sum_k a_k cos(2 pi k x)``. The g-identity is checked on the
    level grid and a residual above ``tol`` is rejected, unless ``validate``
    is False (used to inspect broken inputs).
    """
    segs = [s if isinstance(s, Segment) else Segment(float(s[0]), float(s[1]), s[2],
                                                     tuple(float(c) for c in s[3]))
            for s in segments]
    if not segs:
        raise GFunctionError("coverage gap: no segments given")
    segs.sort(key=lambda s: s.lo)
    if segs[0].lo != 0.0:
        raise GFunctionError(f"coverage gap: [0, {segs[0].lo})")
    for a, b in zip(segs, segs[1:]):
        if b.lo < a.hi:
            raise GFunctionError(f"segments overlap at [{b.lo}, {a.hi})")
        if b.lo > a.hi:
            raise GFunctionError(f"coverage gap: [{a.hi}, {b.lo})")
    if segs[-1].hi != 1.0:
        raise GFunctionError(f"coverage gap: [{segs[-1].hi}, 1)")

    starts = np.array([s.lo for s in segs])

    def func(x):
        x = np.asarray(x, dtype=np.float64)
        which = np.searchsorted(starts, x, side="right") - 1
        out = np.empty_like(x)
        for i, s in enumerate(segs):
            sel = which == i
            if np.any(sel):
                out[sel] = s.evaluate(x[sel])
        return out

    # continuity across breakpoints (including 1 -> 0) admits a global Lipschitz bound
    ends = [(a.evaluate(np.array([a.hi]))[0], b.evaluate(np.array([b.lo]))[0])
            for a, b in zip(segs, segs[1:] + segs[:1])]
    continuous = all(abs(u - v) <= 1e-12 for u, v in ends)
    holder = (max(s.lipschitz() for s in segs), 1.0) if continuous else None

    notes = () if continuous else ("discontinuous at a breakpoint; moduli uncertified",)
    if zero_spec is None:
        zero_spec = ZeroSpec((), complete=False)
    g = GFunction(name, func, zero_spec, None,
                  symmetric=symmetric, holder=holder, monotone_level=None,
                  description="piecewise", notes=notes)
    if not validate:
        return g
    residual = validate_g_identity(g, level)
    if residual > tol:
        raise GFunctionError(f"g-identity residual {residual:.3g} exceeds tolerance {tol:g}")
    vals = g.sample(level)
    if vals.min() < -tol or vals.max() > 1 + tol:
        raise GFunctionError("g leaves [0, 1] on the grid")
    problems = scan_zero_spec(g, level, tol)
    if problems:
        g = g.with_notes(*problems)
    return g


def _parse_number(tok: str) -> Fraction:
    try:
        return Fraction(tok)
    except ValueError as exc:
        raise GFunctionError(f"bad number {tok!r}") from exc


def parse_g_spec(text: str, validate: bool = True) -> GFunction:
    """Parse ``builtin:<name>`` or a ``piecewise:`` block.

    Piecewise lines (newline or ``;`` separated)::

        lo hi poly c0 c1 ...
        lo hi cos a0 a1 ...
        zero p/q
        zero-irrational lo hi
        symmetric
        name <identifier>
    """
    text = text.strip()
    if text.startswith("builtin:"):
        return make_builtin(text.split(":", 1)[1].strip())
    if not text.startswith("piecewise:"):
        raise GFunctionError("g spec must start with 'builtin:' or 'piecewise:'")
    body = text.split(":", 1)[1].replace(";", "\n")
    segments, zeros, symmetric, name = [], [], False, "piecewise"
    have_zero_line = False
    for raw in body.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0]
        if head == "zero":
            have_zero_line = True
            zeros.extend(_parse_number(t) % 1 for t in tok[1:])
        elif head == "zero-irrational":
            have_zero_line = True
            zeros.append(IrrationalZero(float(tok[1]), float(tok[2])))
        elif head == "zeros":
            have_zero_line = True
            zeros.extend(_parse_number(t) % 1 for t in tok[1:] if t != "none")
        elif head == "symmetric":
            symmetric = True
        elif head == "name":
            name = tok[1]
        else:
            if len(tok) < 4:
                raise GFunctionError(f"segment line needs 'lo hi kind coeffs...': {line!r}")
            segments.append((float(_parse_number(tok[0])), float(_parse_number(tok[1])),
                             tok[2], tuple(float(_parse_number(t)) for t in tok[3:])))
    spec = ZeroSpec(tuple(zeros), complete=have_zero_line)
    return make_piecewise(segments, name=name, zero_spec=spec, symmetric=symmetric,
                          validate=validate)


# ---------------------------------------------------------------------------
# Validation scans
# ---------------------------------------------------------------------------


def validate_g_identity(g: GFunction, level: int) -> float:
    """Max over the level grid of ``|g(x) + g(x + 1/2) - 1|``."""
    if level < 1:
        raise GFunctionError("level must be >= 1")
    v = g.sample(level)
    half = len(v) // 2
    return float(np.max(np.abs(v[:half] + v[half:] - 1.0)))


def symmetry_residual(g: GFunction, level: int) -> float:
    """Max over the level grid of ``|g(x) - g(1 - x)|``."""
    v = g.sample(level)
    return float(np.max(np.abs(v - np.roll(v[::-1], 1))))


def scan_zero_spec(g: GFunction, level: int = 14, tol: float = DEFAULT_TOL) -> list[str]:
    """Sanity scan of the declared zero set against grid values."""
    problems = []
    for z in g.zero_spec.rational:
        val = float(g(float(z)))
        if abs(val) > tol:
            problems.append(f"declared zero {z} has g = {val:.3g}")
    for z in g.zero_spec.irrational:
        val = float(g(z.mid))
        if abs(val) > tol:
            problems.append(f"declared zero in [{z.lo}, {z.hi}] has g(mid) = {val:.3g}")
    if g.zero_spec.complete:
        n = 1 << level
        v = g.sample(level)
        small = np.flatnonzero(v < tol) / n
        declared = [float(z) for z in g.zero_spec.rational] + [z.mid for z in g.zero_spec.irrational]
        for x in small:
            dist = min((min(abs(x - d), 1 - abs(x - d)) for d in declared), default=1.0)
            if dist > 2.0 / n:
                problems.append(f"undeclared near-zero of g at x = {x!r}")
                break
    return problems


# ---------------------------------------------------------------------------
# Moduli of continuity
# ---------------------------------------------------------------------------


@dataclass
class ModulusProfile:
    """Modulus estimates ``f[delta]`` at dyadic scales and their partial sum."""

    table: dict
    partial_sum: float
    tail_estimate: float
    tail_flag: bool = True
    bound_table: Optional[dict] = None
    bound_sum: Optional[float] = None

    def __call__(self, delta: float) -> float:
        if delta in self.table:
            return self.table[delta]
        raise KeyError(f"no modulus entry at delta={delta!r}")

    @property
    def total(self) -> float:
        return self.partial_sum + self.tail_estimate


def _grid_values(f, level: int) -> np.ndarray:
    from .transfer import GridFunction  # local import: transfer depends on this module

    if isinstance(f, GridFunction):
        return f.linear_values()
    if isinstance(f, GFunction):
        return f.sample(level)
    x = np.arange(1 << level) / float(1 << level)
    return np.asarray(f(x), dtype=np.float64)


def estimate_modulus(f, delta: float, level: Optional[int] = None) -> float:
    """Grid estimate of ``f[delta] = max_{|x-y| <= delta} |f(x) - f(y)|``.

    The maximum runs over grid pairs only, so this is a lower bound on the true
    modulus. ``f`` may be a GFunction, a GridFunction or a vectorized callable.
    """
    from .transfer import GridFunction

    if isinstance(f, GridFunction):
        level = f.level
    if level is None:
        raise ValueError("level is required unless f is a GridFunction")
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    v = _grid_values(f, level)
    n = len(v)
    width = int(math.floor(delta * n + 1e-9))
    if width < 1:
        raise ValueError(f"grid level {level} too coarse for delta={delta!r}")
    ext = np.concatenate([v, v[:width]])
    size = width + 1
    off = size // 2
    hi = maximum_filter1d(ext, size=size)[off:off + n]
    lo = minimum_filter1d(ext, size=size)[off:off + n]
    return float(np.max(hi - lo))


def estimate_summable_variation(g: GFunction, delta: float = 0.5, depth: int = 20,
                                max_level: int = 22) -> ModulusProfile:
    """Partial sum of ``g[2**-j * delta]`` for ``j <= depth`` plus a geometric tail guess."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    table = {}
    terms = []
    for j in range(depth + 1):
        d = delta * 2.0**-j
        level = min(max_level, math.ceil(-math.log2(d)) + 4)
        if d * (1 << level) < 1:
            break
        val = estimate_modulus(g, d, level)
        table[d] = val
        terms.append(val)
    partial = math.fsum(terms)
    if len(terms) >= 2 and terms[-1] > 0:
        ratio = terms[-1] / terms[-2] if terms[-2] > 0 else math.inf
        tail = terms[-1] * ratio / (1 - ratio) if ratio < 1 else math.inf
    else:
        tail = 0.0
    bound_table = bound_sum = None
    if g.holder is not None:
        c, alpha = g.holder
        bound_table = {d: g.modulus_bound(d) for d in table}
        last = delta * 2.0 ** -(len(terms))
        analytic_tail = 0.0 if c == 0 else c * last**alpha / (1 - 2.0**-alpha)
        bound_sum = math.fsum(bound_table.values()) + analytic_tail
    return ModulusProfile(table, partial, tail, True, bound_table, bound_sum)


# ---------------------------------------------------------------------------
# Scaling envelopes
# ---------------------------------------------------------------------------


def _check_envelope(g: GFunction, env: ScalingEnvelope, level: int, rtol: float = 1e-12):
    n = 1 << level
    j = np.arange(1, n // 2 + 1)
    x = j / float(n)
    v = g.sample(level, 1, n // 2 + 1)
    lower = env.c1 * x**env.theta1
    upper = env.c2 * x**env.theta2
    bad_lo = np.flatnonzero(lower > v * (1 + rtol))
    if bad_lo.size:
        return False, float(x[bad_lo[0]]), "lower"
    bad_hi = np.flatnonzero(v > upper * (1 + rtol))
    if bad_hi.size:
        return False, float(x[bad_hi[0]]), "upper"
    return True, None, None


def fit_or_verify_envelope(g: GFunction, proposed: Optional[ScalingEnvelope] = None,
                           level: int = 14) -> EnvelopeReport:
    """Verify a proposed power-law envelope on the grid, or fit one.

    Fitting regresses log g against log x on the points ``2**-j`` near 0, then
    takes c1, c2 as the extreme ratios ``g(x) / x**theta`` over the grid.
    """
    if abs(float(g(0.0))) > DEFAULT_TOL:
        raise GFunctionError(f"g(0) = {float(g(0.0)):.3g} != 0: no power-law scaling at 0")
    fitted = proposed is None
    if fitted:
        js = np.arange(4, level + 1)
        xs = 2.0**-js
        vs = g(xs)
        if np.any(vs <= 0):
            raise GFunctionError("g vanishes near 0 on the grid; cannot fit an envelope")
        theta = float(np.polyfit(np.log2(xs), np.log2(vs), 1)[0])
        n = 1 << level
        x = np.arange(1, n // 2 + 1) / float(n)
        ratio = g.sample(level, 1, n // 2 + 1) / x**theta
        if ratio.min() <= 0:
            raise GFunctionError("g has a zero in (0, 1/2]; no power-law envelope")
        proposed = ScalingEnvelope(float(ratio.min()), theta, float(ratio.max()), theta)
    ok, witness, which = _check_envelope(g, proposed, level)
    if not ok and not fitted:
        warnings.warn(f"envelope {which} bound fails at x={witness!r}", stacklevel=2)
    return EnvelopeReport(proposed, ok, fitted, level, witness, which)

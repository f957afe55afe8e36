"""Goodness, spectral type and atoms of g-measures.

Orbit questions are answered in exact rational arithmetic; the only
numerical decisions are "g is constant" and "g(1/2) = 0", both made on a
level-14 grid with a fixed tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .gfunction import DEFAULT_TOL, GFunction, GFunctionError, IrrationalZero

SPECTRAL_LEVEL = 14
MAX_ATOM_PERIOD = 20
QUARTER = Fraction(1, 4)
THREE_QUARTERS = Fraction(3, 4)


class ClassificationError(ValueError):
    pass


@dataclass(frozen=True)
class OrbitInfo:
    """Doubling orbit ``point, 2 point, ...`` split into a preperiod and a cycle."""

    point: Fraction
    preperiod: int
    period: int
    orbit: tuple

    @property
    def cycle(self) -> tuple:
        return self.orbit[self.preperiod:]

    def to_dict(self) -> dict:
        return {"point": str(self.point), "preperiod": self.preperiod,
                "period": self.period, "orbit": [str(q) for q in self.orbit]}


def doubling(q: Fraction) -> Fraction:
    q = 2 * q
    return q - (q.numerator // q.denominator)


def orbit_eventually_periodic(q) -> OrbitInfo:
    """Iterate ``q -> 2q mod 1`` exactly until a point repeats.

    Terminates because the denominator never grows.
    """
    q = Fraction(q)
    if not 0 <= q < 1:
        raise ClassificationError(f"{q} is not in [0, 1)")
    # work on numerators over the fixed denominator; doubling is r -> 2r mod d
    d = q.denominator
    seen = {}
    residues = []
    r = q.numerator
    while r not in seen:
        seen[r] = len(residues)
        residues.append(r)
        r = (r << 1) % d
    pre = seen[r]
    orbit = [Fraction(v, d) for v in residues]
    return OrbitInfo(q, pre, len(orbit) - pre, tuple(orbit))


# ---------------------------------------------------------------------------
# Goodness
# ---------------------------------------------------------------------------


@dataclass
class GoodnessReport:
    condition1: bool
    condition2: bool
    condition3: bool
    orbits: list = field(default_factory=list)
    spared: Optional[str] = None
    notes: list = field(default_factory=list)
    assumptions: list = field(default_factory=list)

    @property
    def good(self) -> bool:
        return self.condition1 or self.condition2 or self.condition3

    def to_dict(self) -> dict:
        return {"good": self.good,
                "conditions": {"c1": self.condition1, "c2": self.condition2,
                               "c3": self.condition3},
                "spared_endpoint": self.spared,
                "orbits": [o.to_dict() for o in self.orbits],
                "notes": list(self.notes)}


def _zero_bounds(z):
    """Closed interval known to contain the zero, and whether it is exact."""
    if isinstance(z, IrrationalZero):
        return Fraction(z.lo), Fraction(z.hi), False
    return z, z, True


def check_goodness(g: GFunction) -> GoodnessReport:
    """Test the three sufficient conditions for a unique g-measure.

    (1) at most one zero; (2) no zero has an eventually periodic orbit;
    (3) all zeros in ``[1/4, 3/4)`` or all in ``(1/4, 3/4]``.
    """
    spec = g.zero_spec
    if not spec.complete:
        raise ClassificationError(
            f"zero set of {g.name!r} is not marked complete; list every zero first")
    zeros = spec.zeros
    notes, assumptions = [], []

    c1 = len(zeros) <= 1
    notes.append(f"{len(zeros)} zero(s)")

    orbits = [orbit_eventually_periodic(z) for z in spec.rational]
    c2 = True
    for o in orbits:
        c2 = False
        notes.append(f"rational zero {o.point} enters a cycle of period {o.period} "
                     f"after {o.preperiod} step(s)")
    for z in spec.irrational:
        if z.not_eventually_periodic:
            assumptions.append(
                f"zero in [{z.lo}, {z.hi}] asserted irrational with non-periodic orbit")
        else:
            c2 = False
            notes.append(f"zero in [{z.lo}, {z.hi}] lacks the non-periodicity assertion")

    # half-open variants: every zero in [1/4, 3/4), or every zero in (1/4, 3/4]
    left_ok = right_ok = True
    for z in zeros:
        lo, hi, exact = _zero_bounds(z)
        inside = QUARTER <= lo and hi <= THREE_QUARTERS
        if not inside:
            left_ok = right_ok = False
            break
        if exact:
            left_ok = left_ok and z != THREE_QUARTERS
            right_ok = right_ok and z != QUARTER
    c3 = left_ok or right_ok
    spared = None
    if c3:
        spared = "both" if left_ok and right_ok else ("3/4" if left_ok else "1/4")
    notes.append("condition (3) uses the half-open intervals [1/4, 3/4) and (1/4, 3/4]")
    return GoodnessReport(c1, c2, c3, orbits, spared, notes, assumptions)


# ---------------------------------------------------------------------------
# Spectral type
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralType:
    kind: str
    witness: str

    def __post_init__(self):
        if self.kind not in ("ac", "pp", "sc"):
            raise ClassificationError(f"unknown spectral type {self.kind!r}")


def classify_spectral_type(g: GFunction, level: int = SPECTRAL_LEVEL,
                           tol: float = DEFAULT_TOL,
                           report: Optional[GoodnessReport] = None) -> SpectralType:
    """ac if g is constant (hence 1/2), pp if g(1/2) = 0, sc otherwise."""
    report = report or check_goodness(g)
    if not report.good:
        raise ClassificationError(
            f"{g.name!r} satisfies none of the goodness conditions; spectral type undefined")
    v = g.sample(level)
    resid = float(np.max(np.abs(v - 0.5)))
    if resid < tol:
        return SpectralType("ac", f"max |g - 1/2| = {resid:.3e} on the level {level} grid")
    g_half = float(g.sample(level, 1 << (level - 1), (1 << (level - 1)) + 1)[0])
    if g_half < tol:
        return SpectralType("pp", f"g(1/2) = {g_half:.3e}")
    return SpectralType(
        "sc", f"g not constant (residual {resid:.3e}) and g(1/2) = {g_half:.6g} > 0")


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------


def atom_candidates(g: GFunction, max_period: int = 12,
                    tol: float = DEFAULT_TOL) -> list[OrbitInfo]:
    """Periodic orbits of period <= max_period along which g >= 1 - tol.

    The period-p points are ``j / (2**p - 1)``; doubling acts on them as
    ``j -> 2j mod (2**p - 1)``. One orbit per cycle is returned, keyed by
    its smallest point, with minimal period.
    """
    if not 1 <= max_period <= MAX_ATOM_PERIOD:
        raise ClassificationError(f"max_period must be in 1..{MAX_ATOM_PERIOD}")
    found = []
    for p in range(1, max_period + 1):
        mod = (1 << p) - 1
        j = np.arange(mod, dtype=np.int64)
        ok = np.asarray(g(j / float(mod))) >= 1.0 - tol
        if not ok.any():
            continue
        along = ok.copy()
        rep = j.copy()
        minimal = np.ones(mod, dtype=bool)
        k = j
        for r in range(1, p):
            k = (k << 1) % mod
            along &= ok[k]
            rep = np.minimum(rep, k)
            minimal &= k != j
        for jj in np.nonzero(along & minimal & (rep == j))[0]:
            found.append(orbit_eventually_periodic(Fraction(int(jj), mod)))
    return found


def classification_report(g: GFunction, max_period: int = 12) -> dict:
    """JSON-ready summary ``{good, conditions, spectral_type, atoms, assumptions}``."""
    try:
        good = check_goodness(g)
    except ClassificationError as exc:
        raise GFunctionError(str(exc)) from exc
    out = {"g": g.name, "good": good.good,
           "conditions": {"c1": good.condition1, "c2": good.condition2,
                          "c3": good.condition3},
           "spared_endpoint": good.spared,
           "spectral_type": None, "witness": None,
           "atoms": [o.to_dict() for o in atom_candidates(g, max_period)],
           "assumptions": list(good.assumptions) + [
               "condition (3) checked with half-open intervals",
               f"numerical tolerance {DEFAULT_TOL:g} on a level {SPECTRAL_LEVEL} grid"],
           "notes": list(good.notes)}
    if good.good:
        st = classify_spectral_type(g, report=good)
        out["spectral_type"], out["witness"] = st.kind, st.witness
    return out

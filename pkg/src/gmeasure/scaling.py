"""Two-sided bounds on ``F_g(x) = mu_g([0, x])`` near 0 for power-law g.

With ``c1 x**theta1 <= g(x) <= c2 x**theta2`` on ``[0, 1/2]``,
``s = min(1, c1)``, ``S = max(1, c2)`` and ``kappa = mu_g([1/2, 1])``:

    log2 F >= log2(kappa s) - 2 theta1 + (-(theta1/2) L + 5 theta1/2 - log2 s) L
    log2 F <= (-(theta2/2) L - theta2/2 - log2 S) L,      L = log2 x.

Everything stays in log2; at x = 2**-m, L = -m exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

import numpy as np

from .gfunction import GFunction, ScalingEnvelope, fit_or_verify_envelope
from .measure import MASS_LEVEL, MASS_N, kappa as kappa_enclosure, mass_F
from .transfer import Enclosure


class ScalingError(ValueError):
    pass


def theorem42_bounds_log2x(env: ScalingEnvelope, kappa: float, log2x: float):
    """``(log2 lower, log2 upper)`` at ``x = 2**log2x``."""
    if log2x >= 0:
        raise ScalingError("x must lie in (0, 1)")
    if not kappa > 0:
        raise ScalingError("kappa must be positive")
    L = log2x
    ls, lS = math.log2(env.s), math.log2(env.S)
    lower = (math.log2(kappa) + ls - 2 * env.theta1
             + (-(env.theta1 / 2) * L + 2.5 * env.theta1 - ls) * L)
    upper = (-(env.theta2 / 2) * L - env.theta2 / 2 - lS) * L
    return lower, upper


def theorem42_bounds(env: ScalingEnvelope, kappa: float, x: float):
    """``(log2 lower, log2 upper)`` bounds on ``F_g(x)`` for ``0 < x < 1``."""
    if not 0 < x < 1:
        raise ScalingError("x must lie in (0, 1)")
    return theorem42_bounds_log2x(env, kappa, math.log2(x))


@dataclass
class ScalingRow:
    m: int
    log2F_lo: float
    log2F_hi: float
    log2_lower: float
    log2_upper: float
    status: str
    n_used: int

    @property
    def log2F_mid(self) -> float:
        return 0.5 * (self.log2F_lo + self.log2F_hi)

    @property
    def ratio(self) -> float:
        return self.log2F_mid / self.m**2

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass
class ScalingReport:
    g: str
    envelope: ScalingEnvelope
    kappa: Enclosure
    kappa_used: float
    envelope_verified: bool
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.rows) and all(r.passed for r in self.rows)

    @property
    def failures(self) -> list:
        return [r.m for r in self.rows if not r.passed]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "log2F_lo", "log2F_hi", "log2_lower", "log2_upper", "ratio"])
        for r in self.rows:
            w.writerow([r.m, repr(r.log2F_lo), repr(r.log2F_hi), repr(r.log2_lower),
                        repr(r.log2_upper), repr(r.ratio)])
        return buf.getvalue()

    def summary(self, fit: Optional["FitResult"] = None) -> dict:
        out = {"g": self.g, "envelope": asdict(self.envelope),
               "kappa": [self.kappa.value_lo, self.kappa.value_hi],
               "kappa_used": self.kappa_used, "envelope_verified": self.envelope_verified,
               "passed": self.passed,
               "rows": [{"m": r.m, "status": r.status, "n": r.n_used} for r in self.rows],
               "notes": list(self.notes)}
        if fit is not None:
            out["fit"] = asdict(fit)
        return out

    def to_json(self, fit: Optional["FitResult"] = None) -> str:
        return json.dumps(self.summary(fit), indent=2, sort_keys=True)


def _row_status(lo: float, hi: float, lower: float, upper: float) -> str:
    # strict on both sides; a tie counts as a failure
    if lower < lo and hi < upper:
        return "pass"
    if hi <= lower or lo >= upper:
        return "fail"
    return "undecided"


def verify_bounds(g: GFunction, env: Optional[ScalingEnvelope] = None,
                  m_range: Iterable[int] = range(1, 11), n: int = MASS_N,
                  level: int = MASS_LEVEL, max_n: int = 24) -> ScalingReport:
    """Check ``lower < F_g(2**-m) < upper`` on certified enclosures, row by row.

    Rows whose enclosure straddles a bound are retried with n raised by 4
    up to ``max_n``; any that stay straddling are reported as undecided.
    """
    env = env or g.envelope
    if env is None:
        raise ScalingError(f"{g.name!r} has no scaling envelope")
    notes = []
    try:
        env_report = fit_or_verify_envelope(g, env)
        verified = env_report.verified
        if not verified:
            notes.append(str(env_report))
    except ValueError as exc:
        verified = False
        notes.append(f"envelope not verifiable: {exc}")
    kap = kappa_enclosure(g, n, level)
    if g.symmetric:
        k_used = 0.5
    else:
        k_used = kap.value_lo
        notes.append("kappa taken as the lower enclosure endpoint")
    if not k_used > 0:
        raise ScalingError("kappa enclosure does not exclude 0")
    report = ScalingReport(g.name, env, kap, k_used, verified, notes=notes)
    for m in m_range:
        if m < 1:
            raise ScalingError("m must be >= 1")
        lower, upper = theorem42_bounds_log2x(env, k_used, -float(m))
        cur = n
        while True:
            e = mass_F(g, m, cur, level)
            status = _row_status(e.log2_lo, e.log2_hi, lower, upper)
            if status != "undecided" or cur + 4 > max_n:
                break
            cur += 4
        report.rows.append(ScalingRow(m, e.log2_lo, e.log2_hi, lower, upper, status, cur))
    return report


@dataclass
class FitResult:
    slope: float
    intercept: float
    band: tuple
    in_band: bool
    m_min: int
    m_max: int


def slope_band(env: ScalingEnvelope, m_min: int) -> tuple:
    """Interval the ``log2 F`` vs ``m**2`` slope must lie in, from the bound exponents."""
    lo = -env.theta1 / 2 - 5 * env.theta1 / (2 * m_min)
    hi = -env.theta2 / 2 + (env.theta2 / 2 + math.log2(env.S)) / m_min
    return lo, hi


def asymptotic_fit(report: ScalingReport, m_min: Optional[int] = None) -> FitResult:
    """Least-squares slope of ``log2 F(2**-m)`` against ``m**2`` over rows with m >= m_min."""
    rows = [r for r in report.rows if m_min is None or r.m >= m_min]
    if len(rows) < 4:
        raise ScalingError("need at least 4 rows for the slope fit")
    m = np.array([r.m for r in rows], dtype=float)
    y = np.array([r.log2F_mid for r in rows])
    if not np.all(np.isfinite(y)) or np.ptp(m) == 0:
        raise ScalingError("degenerate fit data")
    slope, intercept = np.polyfit(m**2, y, 1)
    lo_m = int(m.min())
    band = slope_band(report.envelope, lo_m)
    return FitResult(float(slope), float(intercept), band, bool(band[0] <= slope <= band[1]),
                     lo_m, int(m.max()))

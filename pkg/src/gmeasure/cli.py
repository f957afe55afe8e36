"""Command-line entry point ``gmeasure``.

Subcommands emit plot-ready tables (CSV with a header row, or JSON):

    gmeasure density --g builtin:tm --n 1,2,3,6,11 --level 12
    gmeasure mass --g builtin:tm --k 1
    gmeasure cdf --g builtin:half --k 8
    gmeasure fourier --g builtin:tm --m 0..32
    gmeasure autocorr-tm --m 0..64
    gmeasure classify --g builtin:coshift
    gmeasure scaling --g builtin:tent --m 1..10
    gmeasure validate --g @my_g.txt

``--g`` takes ``builtin:<name>``, a ``piecewise:`` block, or ``@path`` to a
file holding either. ``--config`` names a ``key=value`` file (keys: g, n,
level, k, m, out, format); command-line flags take precedence.

Exit codes: 0 success, 1 validation or verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import classify as cls
from . import measure as ms
from . import scaling as sc
from . import transfer as tr
from .gfunction import GFunctionError, parse_g_spec, validate_g_identity

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "density": {"g": "builtin:tm", "n": "1,2,3,6,11", "level": 12},
    "mass": {"g": "builtin:tm", "n": ms.MASS_N, "level": ms.MASS_LEVEL, "k": 4},
    "cdf": {"g": "builtin:tm", "n": ms.MASS_N, "level": ms.MASS_LEVEL, "k": 4},
    "fourier": {"g": "builtin:tm", "n": ms.FOURIER_N, "level": None, "m": "0..16"},
    "autocorr-tm": {"m": "0..32"},
    "classify": {"g": "builtin:tm", "format": "json"},
    "scaling": {"g": "builtin:tm", "n": ms.MASS_N, "level": ms.MASS_LEVEL, "m": "1..10"},
    "validate": {"g": "builtin:tm", "n": 8, "level": 6, "k": 4},
}
CONFIG_KEYS = ("g", "n", "level", "k", "m", "out", "format")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def read_config(path: str) -> dict:
    out = {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{i}: unknown key {key!r}")
        out[key] = value
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge subcommand defaults < config file < command-line flags."""
    conf = dict(DEFAULTS[args.command])
    conf.setdefault("out", None)
    conf.setdefault("format", "csv")
    if args.config:
        conf.update(read_config(args.config))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            conf[key] = val
    if conf["format"] not in ("csv", "json"):
        raise UsageError(f"--format must be csv or json, not {conf['format']!r}")
    return conf


def parse_int(value, name: str):
    if value is None:
        return None
    try:
        return int(value)
    except (TypeError, ValueError):
        raise UsageError(f"--{name} needs an integer, got {value!r}") from None


def parse_int_list(value, name: str) -> list:
    """``"1..10"`` (inclusive), ``"1,2,5"`` or a single integer."""
    text = str(value).strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            a, b = int(a), int(b)
            if b < a:
                raise ValueError
            return list(range(a, b + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--{name}: cannot read {value!r} as a range or list") from None


def load_g(spec: str, validate: bool = True):
    text = spec
    if spec.startswith("@"):
        try:
            text = Path(spec[1:]).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read g file: {exc}") from None
    try:
        return parse_g_spec(text, validate=validate)
    except GFunctionError as exc:
        raise UsageError(f"bad g spec: {exc}") from None


def emit(text: str, out) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _enc_dict(e: tr.Enclosure) -> dict:
    return {"lo": e.value_lo, "hi": e.value_hi, "log2_mid": e.log2_mid,
            "certified": e.certified}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_density(conf) -> int:
    g = load_g(conf["g"])
    ns = parse_int_list(conf["n"], "n")
    level = parse_int(conf["level"], "level")
    if level is None or not 1 <= level <= tr.MAX_LEVEL:
        raise UsageError("--level must be in 1..30")
    cols = [tr.density_g_n(g, n, level).values for n in ns]
    x = np.arange(1 << level) / float(1 << level)
    if conf["format"] == "json":
        emit(to_json({"g": g.name, "level": level, "x": x.tolist(),
                      **{f"g_{n}": c.tolist() for n, c in zip(ns, cols)}}), conf["out"])
        return EXIT_OK
    header = ["x"] + [f"g_{n}(x)" for n in ns]
    rows = ([repr(float(x[i]))] + [repr(float(c[i])) for c in cols] for i in range(len(x)))
    emit(_csv(header, rows), conf["out"])
    return EXIT_OK


def _mass_vector(conf):
    g = load_g(conf["g"])
    k = parse_int(conf["k"], "k")
    if k is None or k < 0:
        raise UsageError("--k must be a non-negative integer")
    n = parse_int(conf["n"], "n")
    level = parse_int(conf["level"], "level")
    return g, ms.mass_vector_certified(g, k, n, level)


def cmd_mass(conf) -> int:
    g, vec = _mass_vector(conf)
    if conf["format"] == "json":
        emit(to_json({"g": g.name, "k": vec.level, "method": vec.method, "notes": vec.notes,
                      "masses": [_enc_dict(e) for e in vec.masses]}), conf["out"])
    else:
        emit(vec.to_csv(), conf["out"])
    return EXIT_OK


def cmd_cdf(conf) -> int:
    g, vec = _mass_vector(conf)
    table = ms.cdf_from_masses(vec, atom_at_zero=any(e.method == "fixed-point"
                                                     for e in vec.masses))
    if conf["format"] == "json":
        n = 1 << table.level
        emit(to_json({"g": g.name, "k": table.level,
                      "values": [{"x": j / n, **_enc_dict(e)}
                                 for j, e in enumerate(table.values)]}), conf["out"])
    else:
        emit(table.to_csv(), conf["out"])
    return EXIT_OK


def cmd_fourier(conf) -> int:
    g = load_g(conf["g"])
    ms_list = parse_int_list(conf["m"], "m")
    if not ms_list or min(ms_list) < 0:
        raise UsageError("--m must list non-negative frequencies")
    n = parse_int(conf["n"], "n")
    level = parse_int(conf["level"], "level")
    try:
        table = ms.fourier_coefficients(g, max(ms_list), n, level)
    except ms.MeasureError as exc:
        raise UsageError(str(exc)) from None
    keep = set(ms_list)
    rows = [(m, r, i) for m, r, i in zip(table.n, table.real, table.imag) if m in keep]
    if conf["format"] == "json":
        emit(to_json({"g": g.name, "coefficients": [
            {"n": m, "re": [r.value_lo, r.value_hi], "im": [i.value_lo, i.value_hi]}
            for m, r, i in rows]}), conf["out"])
    else:
        emit(_csv(["n", "re_lo", "re_hi", "im_lo", "im_hi"],
                  ([m, repr(r.value_lo), repr(r.value_hi), repr(i.value_lo),
                    repr(i.value_hi)] for m, r, i in rows)), conf["out"])
    return EXIT_OK


def cmd_autocorr(conf) -> int:
    M = max(parse_int_list(conf["m"], "m"))
    seq = ms.tm_autocorrelation(M)
    if conf["format"] == "json":
        emit(to_json({"eta": [[e.numerator, e.denominator] for e in seq.eta]}), conf["out"])
    else:
        emit(seq.to_csv(), conf["out"])
    return EXIT_OK


def cmd_classify(conf) -> int:
    g = load_g(conf["g"])
    try:
        report = cls.classification_report(g)
    except GFunctionError as exc:
        raise UsageError(str(exc)) from None
    if conf["format"] == "csv":
        rows = [("good", report["good"]), ("c1", report["conditions"]["c1"]),
                ("c2", report["conditions"]["c2"]), ("c3", report["conditions"]["c3"]),
                ("spectral_type", report["spectral_type"]),
                ("atoms", ";".join(a["point"] for a in report["atoms"]))]
        emit(_csv(["key", "value"], rows), conf["out"])
    else:
        emit(to_json(report), conf["out"])
    return EXIT_OK


def cmd_scaling(conf) -> int:
    g = load_g(conf["g"])
    m_range = parse_int_list(conf["m"], "m")
    if not m_range or min(m_range) < 1:
        raise UsageError("--m must list integers >= 1")
    if g.envelope is None:
        raise UsageError(f"{g.name!r} has no power-law scaling envelope")
    report = sc.verify_bounds(g, None, m_range, parse_int(conf["n"], "n"),
                              parse_int(conf["level"], "level"))
    fit = sc.asymptotic_fit(report) if len(report.rows) >= 4 else None
    if conf["format"] == "json":
        emit(report.to_json(fit) + "\n", conf["out"])
    else:
        emit(report.to_csv(), conf["out"])
        if conf["out"]:
            Path(conf["out"]).with_suffix(".json").write_text(report.to_json(fit) + "\n")
    return EXIT_OK if report.passed else EXIT_FAIL


def run_validation(g, n: int = 8, level: int = 6, k: int = 4) -> list:
    """Property checks as ``(name, passed, detail)``; stops after a broken g-identity."""
    results = []
    resid = validate_g_identity(g, 14)
    results.append(("g-identity", resid < 1e-9, f"residual {resid:.3e}"))
    vals = g.sample(14)
    in_range = bool(vals.min() >= -1e-9 and vals.max() <= 1 + 1e-9)
    results.append(("range [0,1]", in_range, f"min {vals.min():.3g} max {vals.max():.3g}"))
    if not (results[0][1] and in_range):
        return results
    one = tr.apply_transfer(g, tr.GridFunction(level + 1, np.ones(1 << (level + 1))))
    dev = float(np.max(np.abs(one.values - 1.0)))
    results.append(("Markov fixed point", dev < 1e-12, f"max |phi 1 - 1| = {dev:.3e}"))
    worst = max(abs(tr.density_g_n(g, m, m + 8).quadrature() - 1.0) for m in range(1, n + 1))
    results.append(("density normalization", worst < 1e-3, f"max error {worst:.3e}"))
    try:
        good = cls.check_goodness(g)
    except ValueError as exc:
        results.append(("goodness", False, str(exc)))
        return results
    results.append(("goodness", good.good, "; ".join(good.notes)))
    if not good.good:
        return results
    vecs = [ms.mass_vector_certified(g, kk, 12, 0, rtol=1.0) for kk in range(0, k + 1)]
    bad = 0
    for parent, child in zip(vecs, vecs[1:]):
        for j, e in enumerate(parent.masses):
            if not e.overlaps(child.masses[2 * j] + child.masses[2 * j + 1], 1e-15):
                bad += 1
    results.append(("refinement consistency", bad == 0, f"{bad} mismatched cell(s)"))
    total = vecs[-1].total()
    results.append(("total mass", abs(total - 1) < 1e-6, f"sum of level {k} masses {total!r}"))
    if g.description == "builtin:tm":
        eta = ms.tm_autocorrelation(16)
        table = ms.fourier_coefficients(g, 16)
        err = max(abs(table.real[m].mid - float(eta[m])) for m in range(17))
        results.append(("Fourier vs autocorrelation", err < 1e-3, f"max error {err:.3e}"))
    return results


def cmd_validate(conf) -> int:
    g = load_g(conf["g"], validate=False)
    results = run_validation(g, parse_int(conf["n"], "n"), parse_int(conf["level"], "level"),
                             parse_int(conf["k"], "k"))
    ok = all(p for _, p, _ in results)
    if conf["format"] == "json":
        emit(to_json({"g": g.name, "passed": ok,
                      "checks": [{"name": a, "passed": p, "detail": d}
                                 for a, p, d in results]}), conf["out"])
    else:
        emit(_csv(["check", "passed", "detail"], results), conf["out"])
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "density": (cmd_density, "Riesz-product densities g_n on a dyadic grid"),
    "mass": (cmd_mass, "enclosures of mu_g on level-k dyadic intervals"),
    "cdf": (cmd_cdf, "distribution function F_g at level-k dyadic points"),
    "fourier": (cmd_fourier, "Fourier-Stieltjes coefficient enclosures"),
    "autocorr-tm": (cmd_autocorr, "exact Thue-Morse autocorrelation"),
    "classify": (cmd_classify, "goodness, spectral type and atoms"),
    "scaling": (cmd_scaling, "check the small-x bounds on F_g"),
    "validate": (cmd_validate, "property suite for a g-function"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--g", help="builtin:<name>, piecewise:<lines> or @file")
    common.add_argument("--n", help="iteration count (density: list of n)")
    common.add_argument("--level", help="grid level")
    common.add_argument("--k", help="dyadic level")
    common.add_argument("--m", help="range a..b or list a,b,c")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--config", help="key=value file; flags override it")
    parser = argparse.ArgumentParser(
        prog="gmeasure", description="g-measures of the doubling map on the circle",
        formatter_class=argparse.RawDescriptionHelpFormatter, epilog=__doc__.split("\n\n")[1])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        conf = resolve(args)
        return COMMANDS[args.command][0](conf)
    except (UsageError, OSError, tr.BudgetError) as exc:
        print(f"gmeasure: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (tr.TransferError, ms.MeasureError, sc.ScalingError, cls.ClassificationError) as exc:
        print(f"gmeasure: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

"""Numpy implementations of the compiled kernels (same signatures as ``_kernels``)."""
import numpy as np

_CHUNK = 1 << 22
_EPS = np.finfo(np.float64).eps


def grid_step(f, g, half):
    a = f[:half]
    b = f[half : 2 * half]
    v = b + g[:half] * (a - b)
    f[:half] = v
    return float(v.min()), float(v.max()), float(v.sum())


def cell_step(lo, hi, gl, gh, half):
    al, bl = lo[:half], lo[half : 2 * half]
    ah, bh = hi[:half], hi[half : 2 * half]
    gl, gh = gl[:half], gh[:half]
    dl = al - bl
    dh = ah - bh
    new_lo = np.minimum(bl + gl * dl, bl + gh * dl)
    new_hi = np.maximum(bh + gl * dh, bh + gh * dh)
    lo[:half] = new_lo
    hi[:half] = new_hi


def log_density(logg, level, n):
    size = 1 << level
    mask = size - 1
    idx = np.arange(size, dtype=np.int64)
    acc = np.full(size, float(n))
    for _ in range(n):
        acc += logg[idx]
        idx = (idx << 1) & mask
    return acc


def sinpi_sq_affine(level, start, step, count):
    full = 1 << level
    out = np.empty(count, dtype=np.float64)
    for lo in range(0, count, _CHUNK):
        hi = min(count, lo + _CHUNK)
        u = (start + np.arange(lo, hi, dtype=np.int64) * step) % full
        u = np.minimum(u, full - u)
        v = np.sin(u * (np.pi / full))
        out[lo:hi] = v * v
    return out


def cell_products(gtab, level, top, j, k, pads, prod, plo, phi, cells):
    n = 1 << top
    mask = (1 << level) - 1
    idx = (j << top) + np.arange(n + 1, dtype=np.int64)
    expo = 0
    for r in range(k):
        vals = gtab[(idx << r) & mask]
        prod *= vals
        peak = prod.max()
        if cells:
            lo = np.minimum(vals[:-1], vals[1:])
            hi = np.maximum(vals[:-1], vals[1:])
            if pads[r] > 0:
                lo = np.maximum(lo - pads[r], 0.0)
                hi = np.minimum(hi + pads[r], 1.0)
            plo *= lo * (1.0 - 4 * _EPS)
            phi *= hi * (1.0 + 4 * _EPS)
            peak = max(peak, phi.max())
        if 0 < peak < 1e-120:
            e = int(np.frexp(peak)[1])
            prod *= 2.0**-e
            if cells:
                plo *= 2.0**-e
                phi *= 2.0**-e
            expo += e
    return expo

"""Invariant measures of the doubling map defined by g-functions.

Submodules:

* ``gfunction``: g-function objects, built-ins and the piecewise DSL
* ``transfer``: the transfer operator on dyadic grids and enclosures of mu_g(f)
* ``measure``: dyadic masses, CDF, kappa, Fourier coefficients
* ``classify``: goodness conditions and spectral type
* ``scaling``: small-scale bounds for mu_g([0, x])
"""
from ._backend import BACKEND, available_backends
from .gfunction import (
    GFunction,
    GFunctionError,
    ScalingEnvelope,
    ZeroSpec,
    make_builtin,
    make_piecewise,
    parse_g_spec,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "available_backends",
    "GFunction",
    "GFunctionError",
    "ScalingEnvelope",
    "ZeroSpec",
    "make_builtin",
    "make_piecewise",
    "parse_g_spec",
]

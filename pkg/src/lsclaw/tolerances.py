"""Tolerance classes used by the diagnostics.

Scheme-exact tolerances cover floating-point rounding of identities that
hold exactly for the discrete scheme.  Discretization tolerances cover
one-cell quadrature and interpolation effects; they are multiplied by the
``LSCLAW_TOL_SCALE`` environment variable (default 1).
"""

from __future__ import annotations

import math
import os

from .errors import ConfigError

SCHEME_EXACT = 1e-12

# semi-integral / p-consistency margins must stay above -C*(h + dx).
# Calibrated on Burgers runs started from the travelling test field itself
# (n_x = 100..800): the worst observed ratio was 5.6e-5, improving under
# refinement.
SEMI_INTEGRAL_C = 1e-3

# TV of the y = 1 slice may exceed its initial value by this many levels 1/n_a
TV_LEVELS = 2.0


def tol_scale() -> float:
    """Multiplier for discretization tolerances; ``0`` demands exactness."""
    raw = os.environ.get("LSCLAW_TOL_SCALE", "1")
    try:
        scale = float(raw)
    except ValueError:
        raise ConfigError(f"LSCLAW_TOL_SCALE must be a number, got {raw!r}") from None
    if not (math.isfinite(scale) and scale >= 0):
        raise ConfigError(f"LSCLAW_TOL_SCALE must be finite and nonnegative, got {raw!r}")
    return scale


def discretization(tol: float) -> float:
    return tol * tol_scale()


def coarea_tol(dy: float, n_a: int, volume: float = 1.0) -> float:
    """Allowed gap between the level-set and conserved L1 distances."""
    return discretization(2.0 * (dy + 1.0 / n_a) * volume)

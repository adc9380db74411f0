"""Level-set transport-collapse solver for multidimensional scalar conservation laws.

The entropy solution ``u(t, y, x)`` is carried by a level-set field
``Y(t, a, x)`` nondecreasing in the level ``a``; ``u`` is recovered as
``u = mean_a H(y - Y)``.  Time stepping alternates exact transport of each
level with a per-column sort in ``a``.
"""

from .errors import ConfigError, GridError, InvariantError, ValidityError
from .fields import (
    AGrid,
    ConservedField,
    KineticDensity,
    LevelSetField,
    XGrid,
    YGrid,
    build_kinetic,
    coarea_l1,
    field_lp,
    generalized_inverse,
    inverse_recover,
    kinetic_consistency,
    level_slice,
    lp_norm,
    mk_distance_1d,
    rearrange,
    total_variation,
)
from .flux import FluxSpec, builtin_flux, flux_bounds
from .scheme import SchemeConfig, Trajectory, collapse, predictor, run, sample, step, u_step

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "GridError",
    "InvariantError",
    "ValidityError",
    "AGrid",
    "ConservedField",
    "KineticDensity",
    "LevelSetField",
    "XGrid",
    "YGrid",
    "build_kinetic",
    "coarea_l1",
    "field_lp",
    "generalized_inverse",
    "inverse_recover",
    "kinetic_consistency",
    "level_slice",
    "lp_norm",
    "mk_distance_1d",
    "rearrange",
    "total_variation",
    "FluxSpec",
    "builtin_flux",
    "flux_bounds",
    "SchemeConfig",
    "Trajectory",
    "collapse",
    "predictor",
    "run",
    "sample",
    "step",
    "u_step",
]

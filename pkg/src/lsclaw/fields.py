"""Discrete level-set and conserved fields and the transforms between them.

Layout conventions
------------------
A level-set field ``Y`` is stored as an array of shape ``(n_a, *n_x)``: axis 0
is the level variable ``a`` sampled at cell midpoints, the trailing axes are
the periodic torus cells.  A conserved field ``u`` has shape ``(n_y, *n_x)``.
Integrals over ``a`` are equal-weight averages of the cell values.

All counting sums use the strict Heaviside ``H(s) = 1`` iff ``s > 0``, so
that ``H(y - Y) == H(u(y) - a)`` holds cell by cell whenever ``u`` is the
discrete generalized inverse of ``Y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridError, InvariantError

__all__ = [
    "AGrid",
    "XGrid",
    "YGrid",
    "LevelSetField",
    "ConservedField",
    "KineticDensity",
    "Snapshot",
    "generalized_inverse",
    "inverse_recover",
    "rearrange",
    "level_slice",
    "coarea_l1",
    "mk_distance_1d",
    "lp_norm",
    "field_lp",
    "total_variation",
    "build_kinetic",
    "kinetic_consistency",
    "monotone_violations",
    "write_snapshot",
    "read_snapshot",
]


# ---------------------------------------------------------------- grids


@dataclass(frozen=True)
class AGrid:
    """Uniform midpoint partition of the level interval ``[0, 1]``."""

    n_a: int

    def __post_init__(self):
        if self.n_a < 2:
            raise GridError(f"n_a must be >= 2, got {self.n_a}")

    @cached_property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_a) + 0.5) / self.n_a

    @property
    def weight(self) -> float:
        return 1.0 / self.n_a


@dataclass(frozen=True)
class XGrid:
    """Periodic uniform grid on the unit torus ``T^d``, ``d`` in {1, 2}."""

    shape: tuple[int, ...]

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        object.__setattr__(self, "shape", shape)
        if len(shape) not in (1, 2) or min(shape) < 1:
            raise GridError(f"unsupported x-grid shape {shape}")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(1.0 / n for n in self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def centers(self, axis: int = 0) -> np.ndarray:
        n = self.shape[axis]
        return (np.arange(n) + 0.5) / n

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates broadcast to ``shape``, one array per axis."""
        return tuple(np.meshgrid(*[self.centers(k) for k in range(self.dim)], indexing="ij"))


@dataclass(frozen=True)
class YGrid:
    """Uniform grid on ``[y_min, y_max]`` with ``n_y`` cells."""

    y_min: float
    y_max: float
    n_y: int

    def __post_init__(self):
        if not self.y_max > self.y_min or self.n_y < 2:
            raise GridError(f"bad y-grid [{self.y_min}, {self.y_max}] x {self.n_y}")

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.n_y

    @cached_property
    def centers(self) -> np.ndarray:
        return self.y_min + (np.arange(self.n_y) + 0.5) * self.dy

    @classmethod
    def from_bounds(cls, lower: float, upper: float, n_y: int, margin: float = 0.1) -> "YGrid":
        """Grid covering ``[min(lower, 0), upper]`` plus a relative margin.

        ``y = 0`` is placed on a cell edge so that integrals over ``y >= 0``
        count whole cells.
        """
        lo = min(float(lower), 0.0)
        hi = float(upper)
        pad = margin * max(hi - lo, 1e-12)
        lo, hi = lo - pad, hi + pad
        dy = (hi - lo) / (n_y - 1)
        y_min = -math.ceil(-lo / dy - 1e-12) * dy
        return cls(y_min, y_min + n_y * dy, n_y)


# ---------------------------------------------------------------- fields


def monotone_violations(values: np.ndarray, axis: int = 0) -> int:
    """Number of adjacent pairs that decrease along ``axis``."""
    return int(np.count_nonzero(np.diff(values, axis=axis) < 0))


@dataclass(frozen=True, eq=False)
class LevelSetField:
    """Level-set values ``Y[i, j...]``, nondecreasing in the level index."""

    values: np.ndarray
    agrid: AGrid
    xgrid: XGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (self.agrid.n_a,) + self.xgrid.shape:
            raise GridError(f"values shape {v.shape} does not match grids")
        if not np.all(np.isfinite(v)):
            raise InvariantError("level-set field has non-finite values")
        bad = monotone_violations(v)
        if bad:
            raise InvariantError(f"level-set field decreases in a at {bad} cells")

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())

    def with_values(self, values: np.ndarray) -> "LevelSetField":
        return LevelSetField(values, self.agrid, self.xgrid)


@dataclass(frozen=True, eq=False)
class ConservedField:
    """Conserved values ``u[k, j...]`` in ``[0, 1]``, nondecreasing in ``y``."""

    values: np.ndarray
    ygrid: YGrid
    xgrid: XGrid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (self.ygrid.n_y,) + self.xgrid.shape:
            raise GridError(f"values shape {v.shape} does not match grids")
        if np.any(v < 0) or np.any(v > 1):
            raise InvariantError("conserved field leaves [0, 1]")
        bad = monotone_violations(v)
        if bad:
            raise InvariantError(f"conserved field decreases in y at {bad} cells")
        if np.any(v[0] != 0) or np.any(v[-1] != 1):
            raise GridError("conserved field is not 0 at y_min and 1 at y_max; y-grid too small")


@dataclass(frozen=True, eq=False)
class KineticDensity:
    """Indicator ``f[i, k, j...] = H(u[k, j] - a_i)`` as a boolean array."""

    values: np.ndarray
    agrid: AGrid
    ygrid: YGrid
    xgrid: XGrid


# ---------------------------------------------------------------- transforms


def _check_range(Z: np.ndarray, yg: YGrid) -> None:
    lo, hi = float(Z.min()), float(Z.max())
    if lo <= yg.y_min:
        raise GridError(f"profile minimum {lo:g} not above y_min={yg.y_min:g}")
    if hi >= yg.y_max:
        raise GridError(f"profile maximum {hi:g} not below y_max={yg.y_max:g}")


def generalized_inverse(Z, yg: YGrid) -> np.ndarray:
    """``v[k] = (1/n_a) #{i : Z[i] < y_k}`` column by column.

    ``Z`` has the level index on axis 0 and must be nondecreasing along it;
    the result has shape ``(n_y,) + Z.shape[1:]``.
    """
    Z = np.asarray(Z, dtype=float)
    if monotone_violations(Z):
        raise InvariantError("generalized_inverse needs a profile nondecreasing in a")
    _check_range(Z, yg)
    n_a = Z.shape[0]
    cols = Z.reshape(n_a, -1)
    y = yg.centers
    out = np.empty((yg.n_y, cols.shape[1]))
    for j in range(cols.shape[1]):
        out[:, j] = np.searchsorted(cols[:, j], y, side="left")
    out /= n_a
    return out.reshape((yg.n_y,) + Z.shape[1:])


def inverse_recover(v, yg: YGrid, ag: AGrid, lower: float = 0.0) -> np.ndarray:
    """``Z[i] = lower + dy #{k : v[k] < a_i, y_k >= lower}`` column by column.

    With ``lower = 0`` this is the level-set recovery from a conserved field;
    ``lower = yg.y_min`` gives the full quantile function, which also handles
    profiles with negative support.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != yg.n_y:
        raise GridError(f"profile has {v.shape[0]} y-cells, grid has {yg.n_y}")
    if monotone_violations(v):
        raise InvariantError("inverse_recover needs a profile nondecreasing in y")
    if np.any(v < 0) or np.any(v > 1):
        raise InvariantError("inverse_recover needs values in [0, 1]")
    k0 = int(np.searchsorted(yg.centers, lower, side="left"))
    a = ag.centers
    cols = v.reshape(yg.n_y, -1)
    out = np.empty((ag.n_a, cols.shape[1]))
    for j in range(cols.shape[1]):
        out[:, j] = np.searchsorted(cols[:, j], a, side="left")
    out = lower + yg.dy * np.maximum(out - k0, 0)
    return out.reshape((ag.n_a,) + v.shape[1:])


def rearrange(X, axis: int = 0) -> np.ndarray:
    """Nondecreasing rearrangement of ``X`` along ``axis`` (a stable sort)."""
    return np.sort(np.asarray(X, dtype=float), axis=axis, kind="stable")


def level_slice(Y, y: float) -> np.ndarray:
    """The conserved field at one fixed ``y``: ``mean_i H(y - Y[i])``."""
    Y = np.asarray(Y)
    return np.count_nonzero(Y < y, axis=0) / Y.shape[0]


def coarea_l1(Y: LevelSetField, Yt: LevelSetField, yg: YGrid) -> tuple[float, float]:
    """L1 distance of two level-set fields and of their generalized inverses.

    Returns ``(int |Y - Yt| da dx, int |u - ut| dy dx)``; the two agree up to
    one-cell quadrature effects.
    """
    if Y.agrid != Yt.agrid or Y.xgrid != Yt.xgrid:
        raise GridError("coarea_l1 needs fields on identical grids")
    vol = Y.xgrid.cell_volume
    l1_y = float(np.sum(np.abs(Y.values - Yt.values))) * vol / Y.agrid.n_a
    u = generalized_inverse(Y.values, yg)
    ut = generalized_inverse(Yt.values, yg)
    l1_u = float(np.sum(np.abs(u - ut))) * vol * yg.dy
    return l1_y, l1_u


def mk_distance_1d(v, vt, p: float, ag: AGrid, yg: YGrid) -> float:
    """``p``-Monge-Kantorovich distance between two CDF-like profiles on ``yg``.

    Computed as the ``L^p(da)`` distance of their quantile functions.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    Z = inverse_recover(v, yg, ag, lower=yg.y_min)
    Zt = inverse_recover(vt, yg, ag, lower=yg.y_min)
    return lp_norm(Z - Zt, p, ag.weight)


def lp_norm(values, p: float, weight: float = 1.0) -> float:
    """``(sum |v|^p * weight)^(1/p)``; ``p = inf`` gives the max norm."""
    v = np.abs(np.asarray(values, dtype=float))
    if math.isinf(p):
        return float(v.max()) if v.size else 0.0
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if p == 1:
        return float(np.sum(v) * weight)
    return float((np.sum(v**p) * weight) ** (1.0 / p))


def field_lp(values, p: float, xgrid: XGrid) -> float:
    """``L^p`` norm over ``[0, 1] x T^d`` of an ``(n_a, *n_x)`` array."""
    values = np.asarray(values)
    return lp_norm(values, p, xgrid.cell_volume / values.shape[0])


def total_variation(v, axis: int | None = None, periodic: bool = True) -> float:
    """Total variation from one-cell difference quotients.

    For a unit-length axis with spacing ``dx`` the quotient
    ``int |v(x + dx) - v(x)| / dx dx`` reduces to the sum of absolute
    neighbour differences, averaged over the remaining axes.  With
    ``axis=None`` the largest per-axis value is returned.  ``periodic=False``
    treats the axis as an interval (used for the level axis).
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        return 0.0
    if axis is None:
        return max(total_variation(v, k, periodic) for k in range(v.ndim))
    if periodic:
        d = np.roll(v, -1, axis=axis) - v
    else:
        d = np.diff(v, axis=axis)
    other = v.size // v.shape[axis]
    return float(np.sum(np.abs(d)) / other)


def build_kinetic(u: ConservedField, ag: AGrid) -> KineticDensity:
    """Kinetic indicator ``f[i, k, j] = 1`` iff ``u[k, j] >= a_i``."""
    a = ag.centers.reshape((-1,) + (1,) * u.values.ndim)
    return KineticDensity(u.values[None] >= a, ag, u.ygrid, u.xgrid)


def kinetic_consistency(f: KineticDensity, Y: LevelSetField) -> int:
    """Count cells where ``H(y_k - Y[i, j]) != f[i, k, j]``."""
    if f.agrid != Y.agrid or f.xgrid != Y.xgrid:
        raise GridError("kinetic density and level-set field live on different grids")
    y = f.ygrid.centers.reshape((1, -1) + (1,) * Y.xgrid.dim)
    h = y > Y.values[:, None]
    return int(np.count_nonzero(h != f.values))


# ---------------------------------------------------------------- snapshot files


@dataclass(frozen=True, eq=False)
class Snapshot:
    kind: str  # "levelset" or "conserved"
    values: np.ndarray
    xgrid: XGrid
    y_min: float
    y_max: float


def write_snapshot(path, kind: str, values, xgrid: XGrid, yg: YGrid) -> None:
    """Write a field as ``<kind> d n n_x... y_min y_max`` then one x-column per line.

    ``n`` is ``n_a`` for level-set fields and ``n_y`` for conserved fields.
    Values are printed with 17 significant digits so files round-trip exactly.
    """
    if kind not in ("levelset", "conserved"):
        raise ValueError(f"unknown snapshot kind {kind!r}")
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    cols = values.reshape(n, -1).T
    header = [kind, str(xgrid.dim), str(n), *map(str, xgrid.shape), repr(float(yg.y_min)), repr(float(yg.y_max))]
    with open(Path(path), "w") as fh:
        fh.write(" ".join(header) + "\n")
        np.savetxt(fh, cols, fmt="%.17g")


def read_snapshot(path) -> Snapshot:
    with open(Path(path)) as fh:
        header = fh.readline().split()
        kind, d = header[0], int(header[1])
        n = int(header[2])
        shape = tuple(int(s) for s in header[3:3 + d])
        y_min, y_max = float(header[3 + d]), float(header[4 + d])
        cols = np.loadtxt(fh, ndmin=2)
    values = cols.T.reshape((n,) + shape)
    return Snapshot(kind, values, XGrid(shape), y_min, y_max)

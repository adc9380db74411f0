"""Transport-collapse time stepping for the level-set field.

One step maps ``Y_{n-1}`` to ``Y_n`` in two stages:

* predictor: every level slab ``Y(a_i, .)`` is transported on the torus by
  ``h q(a_i)`` and lifted by ``h q0(a_i)``;
* collapse: every torus column is sorted in ``a``.

The same update written on the conserved field is :func:`u_step`.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .errors import ConfigError, GridError
from .fields import (
    AGrid,
    ConservedField,
    LevelSetField,
    XGrid,
    YGrid,
    generalized_inverse,
    level_slice,
    rearrange,
)
from .flux import FluxSpec, flux_bounds, flux_from_config

__all__ = [
    "INTERP_MODES",
    "SchemeConfig",
    "Trajectory",
    "cell_shifts",
    "predictor",
    "collapse",
    "step",
    "u_step",
    "run",
    "sample",
]

INTERP_MODES = ("linear", "exact_shift")

# |shift - round(shift)| allowed in exact_shift mode, in cells
SHIFT_TOL = 1e-9


@dataclass(frozen=True)
class SchemeConfig:
    """Time step, horizon, grids, interpolation mode and flux of a run."""

    flux: FluxSpec
    h: float
    T: float
    n_a: int
    n_x: tuple[int, ...]
    n_y: int = 200
    y_margin: float = 0.1
    interp_mode: str = "linear"
    diagnostics_every: int = 1
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_x", tuple(int(n) for n in np.atleast_1d(self.n_x)))
        if len(self.n_x) == 1 and self.flux.dim == 2:
            object.__setattr__(self, "n_x", self.n_x * 2)
        if len(self.n_x) != self.flux.dim:
            raise ConfigError(f"n_x {self.n_x} does not match flux dimension {self.flux.dim}")
        if not self.h > 0:
            raise ConfigError(f"time step must be positive, got {self.h}")
        if not self.T >= 0:
            raise ConfigError(f"horizon must be nonnegative, got {self.T}")
        if self.interp_mode not in INTERP_MODES:
            raise ConfigError(f"interp_mode must be one of {INTERP_MODES}")
        if self.diagnostics_every < 1 or self.threads < 1:
            raise ConfigError("diagnostics_every and threads must be >= 1")
        if self.interp_mode == "exact_shift":
            s = cell_shifts(self.flux, self.agrid, self.xgrid, self.h)
            err = np.abs(s - np.round(s))
            if np.any(err > SHIFT_TOL):
                i = int(np.argmax(err.max(axis=0)))
                raise ConfigError(
                    f"exact_shift: h*q(a_{i}) is not a whole number of cells "
                    f"(shift {s[:, i].tolist()})")

    @property
    def agrid(self) -> AGrid:
        return AGrid(self.n_a)

    @property
    def xgrid(self) -> XGrid:
        return XGrid(self.n_x)

    @property
    def n_steps(self) -> int:
        return max(0, math.ceil(self.T / self.h - 1e-9))

    def ygrid(self, Y0: LevelSetField) -> YGrid:
        """A y-grid wide enough for every level value the run can reach."""
        plus, minus, _ = flux_bounds(self.flux)
        lo, hi = Y0.bounds
        horizon = self.n_steps * self.h
        return YGrid.from_bounds(lo - horizon * minus, hi + horizon * plus, self.n_y, self.y_margin)

    def with_(self, **kw) -> "SchemeConfig":
        return replace(self, **kw)

    @classmethod
    def from_dict(cls, cfg: Mapping) -> "SchemeConfig":
        """Build from the JSON keys ``flux, d, n_a, n_x, n_y, y_margin, h, T, interp_mode, diagnostics_every``."""
        try:
            d = int(cfg.get("d", 1))
            flux = flux_from_config(cfg["flux"], d)
            return cls(
                flux=flux,
                h=float(cfg["h"]),
                T=float(cfg["T"]),
                n_a=int(cfg["n_a"]),
                n_x=tuple(np.atleast_1d(cfg["n_x"]).tolist()),
                n_y=int(cfg.get("n_y", 200)),
                y_margin=float(cfg.get("y_margin", 0.1)),
                interp_mode=cfg.get("interp_mode", "linear"),
                diagnostics_every=int(cfg.get("diagnostics_every", 1)),
                threads=int(cfg.get("threads", 1)),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config key {exc}") from None


def cell_shifts(flux: FluxSpec, ag: AGrid, xg: XGrid, h: float) -> np.ndarray:
    """Displacement ``h q(a_i)`` in cells, shape ``(d, n_a)``."""
    q = np.asarray(flux.q(ag.centers), dtype=float)
    return h * q * np.asarray(xg.shape, dtype=float)[:, None]


def _chunks(n: int, parts: int) -> list[slice]:
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [slice(edges[k], edges[k + 1]) for k in range(parts)]


def _run_chunks(fn: Callable[[slice], None], n: int, threads: int) -> None:
    chunks = _chunks(n, threads)
    if len(chunks) == 1:
        fn(chunks[0])
        return
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        for fut in [pool.submit(fn, c) for c in chunks]:
            fut.result()


def _shift_axis(V: np.ndarray, s: np.ndarray, axis: int, mode: str) -> np.ndarray:
    """Evaluate each slab ``V[i]`` at ``x - s[i]`` cells along ``axis`` (periodic)."""
    n = V.shape[axis]
    j = np.arange(n)
    bshape = [1] * V.ndim
    bshape[0] = V.shape[0]
    bshape[axis] = n
    if mode == "exact_shift":
        m = np.round(s).astype(np.int64)
        idx = np.mod(j[None, :] - m[:, None], n).reshape(bshape)
        return np.take_along_axis(V, np.broadcast_to(idx, V.shape), axis=axis)
    m = np.floor(s).astype(np.int64)
    theta = (s - m).reshape([-1] + [1] * (V.ndim - 1))
    idx0 = np.broadcast_to(np.mod(j[None, :] - m[:, None], n).reshape(bshape), V.shape)
    idx1 = np.broadcast_to(np.mod(j[None, :] - m[:, None] - 1, n).reshape(bshape), V.shape)
    A = np.take_along_axis(V, idx0, axis=axis)
    B = np.take_along_axis(V, idx1, axis=axis)
    out = A + theta * (B - A)
    # a convex combination must stay inside [min(A, B), max(A, B)]
    return np.clip(out, np.minimum(A, B), np.maximum(A, B))


def predictor(Y, h: float, flux: FluxSpec, mode: str = "linear", threads: int = 1) -> np.ndarray:
    """Transported field ``Y*(a_i, x) = Y(a_i, x - h q(a_i)) + h q0(a_i)``.

    ``Y`` is a :class:`LevelSetField` or a raw ``(n_a, *n_x)`` array.  The
    result is generally not monotone in ``a``.
    """
    V = Y.values if isinstance(Y, LevelSetField) else np.asarray(Y, dtype=float)
    if h < 0:
        raise ValueError("time step must be nonnegative")
    if mode not in INTERP_MODES:
        raise ConfigError(f"interp_mode must be one of {INTERP_MODES}")
    ag, xg = AGrid(V.shape[0]), XGrid(V.shape[1:])
    s = cell_shifts(flux, ag, xg, h)
    if mode == "exact_shift":
        err = np.abs(s - np.round(s))
        if np.any(err > SHIFT_TOL):
            raise ConfigError("exact_shift: h*q(a) is not a whole number of cells")
    lift = h * np.asarray(flux.q0(ag.centers), dtype=float)
    out = np.empty_like(V)

    def work(sl: slice) -> None:
        W = V[sl]
        for k in range(xg.dim):
            W = _shift_axis(W, s[k, sl], 1 + k, mode)
        out[sl] = W + lift[sl].reshape([-1] + [1] * xg.dim)

    _run_chunks(work, V.shape[0], threads)
    return out


def collapse(Ystar, xgrid: XGrid | None = None, threads: int = 1) -> LevelSetField:
    """Sort every torus column of ``Ystar`` in ``a``."""
    V = np.asarray(Ystar, dtype=float)
    xg = xgrid or XGrid(V.shape[1:])
    flat = V.reshape(V.shape[0], -1)
    out = np.empty_like(flat)

    def work(sl: slice) -> None:
        out[:, sl] = rearrange(flat[:, sl], axis=0)

    _run_chunks(work, flat.shape[1], threads)
    return LevelSetField(out.reshape(V.shape), AGrid(V.shape[0]), xg)


def step(Y: LevelSetField, config: SchemeConfig) -> LevelSetField:
    """One transport-collapse step: :func:`predictor` then :func:`collapse`."""
    Ys = predictor(Y, config.h, config.flux, config.interp_mode, config.threads)
    return collapse(Ys, Y.xgrid, config.threads)


def _shift_y(V: np.ndarray, s: float, mode: str) -> np.ndarray:
    """Evaluate ``V`` at ``y - s`` cells along axis 0, clamping at the ends."""
    n = V.shape[0]
    k = np.arange(n)
    if mode == "exact_shift":
        return V[np.clip(k - int(round(s)), 0, n - 1)]
    pos = np.clip(k - s, 0, n - 1)
    k0 = np.floor(pos).astype(np.int64)
    k1 = np.minimum(k0 + 1, n - 1)
    w = (pos - k0).reshape([-1] + [1] * (V.ndim - 1))
    return V[k0] + w * (V[k1] - V[k0])


def u_step(u: ConservedField, config: SchemeConfig) -> ConservedField:
    """Kinetic form of one step.

    ``u_n(y, x) = mean_i H(u_{n-1}(y - h q0(a_i), x - h q(a_i)) - a_i)`` with
    ``H(s) = 1`` iff ``s >= 0`` as in the kinetic indicator.  Departure points
    below or above the y-grid take the boundary value (0 or 1).
    """
    ag, xg, yg = config.agrid, u.xgrid, u.ygrid
    mode = config.interp_mode
    s = cell_shifts(config.flux, ag, xg, config.h)
    sy = config.h * np.asarray(config.flux.q0(ag.centers), dtype=float) / yg.dy
    a = ag.centers
    count = np.zeros(u.values.shape, dtype=np.int64)
    for i in range(ag.n_a):
        V = u.values[None]
        for k in range(xg.dim):
            V = _shift_axis(V, s[k, i:i + 1], 2 + k, mode)
        V = V[0]
        if sy[i] != 0:
            V = _shift_y(V, sy[i], mode)
        count += V >= a[i]
    vals = count / ag.n_a
    try:
        return ConservedField(vals, yg, xg)
    except GridError as exc:
        raise GridError(f"departure points left the y-grid: {exc}") from None


@dataclass(eq=False)
class Trajectory:
    """Stored snapshots of a run.

    ``steps[k]`` is the step index of ``values[k]``; the snapshot time is
    ``steps[k] * h``.  Snapshots are kept every ``diagnostics_every`` steps
    and always at the last step.
    """

    config: SchemeConfig
    ygrid: YGrid
    steps: list[int] = field(default_factory=list)
    values: list[np.ndarray] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.steps, dtype=float) * self.config.h

    @property
    def agrid(self) -> AGrid:
        return self.config.agrid

    @property
    def xgrid(self) -> XGrid:
        return self.config.xgrid

    @property
    def flux(self) -> FluxSpec:
        return self.config.flux

    def __len__(self) -> int:
        return len(self.steps)

    def snapshot(self, k: int) -> LevelSetField:
        return LevelSetField(self.values[k], self.agrid, self.xgrid)

    def conserved(self, k: int) -> ConservedField:
        """Generalized inverse of snapshot ``k`` on the run's y-grid."""
        return ConservedField(generalized_inverse(self.values[k], self.ygrid), self.ygrid, self.xgrid)

    def slice_at(self, k: int, y: float = 1.0) -> np.ndarray:
        """Conserved field ``u(t_k, y, .)`` at one fixed ``y``."""
        return level_slice(self.values[k], y)


def run(Y0: LevelSetField, config: SchemeConfig,
        callback: Callable[[int, LevelSetField], None] | None = None) -> Trajectory:
    """Advance ``Y0`` for ``ceil(T / h)`` steps.

    ``callback(n, Y_n)`` is invoked after every step (and for ``n = 0``),
    independently of the snapshot cadence.
    """
    traj = Trajectory(config, config.ygrid(Y0))
    Y = Y0
    traj.steps.append(0)
    traj.values.append(Y0.values.copy())
    if callback is not None:
        callback(0, Y)
    n_steps = config.n_steps
    for n in range(1, n_steps + 1):
        Y = step(Y, config)
        if callback is not None:
            callback(n, Y)
        if n % config.diagnostics_every == 0 or n == n_steps:
            traj.steps.append(n)
            traj.values.append(Y.values)
    return traj


def sample(traj: Trajectory, t: float, form: str = "levelset"):
    """Piecewise-linear-in-time interpolant of the stored snapshots.

    ``form="levelset"`` returns a :class:`LevelSetField`;
    ``form="conserved"`` interpolates the conserved fields instead.
    """
    times = traj.times
    if not (0.0 <= t <= times[-1] + 1e-12 * max(1.0, times[-1])):
        raise ValueError(f"t={t} outside [0, {times[-1]}]")
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), len(times) - 1)

    def get(idx: int) -> np.ndarray:
        if form == "levelset":
            return traj.values[idx]
        if form == "conserved":
            return traj.conserved(idx).values
        raise ValueError(f"unknown form {form!r}")

    if t == times[k] or k == len(times) - 1:
        vals = get(k).copy()
    else:
        w = (t - times[k]) / (times[k + 1] - times[k])
        vals = get(k + 1) * w + get(k) * (1.0 - w)
    if form == "levelset":
        return LevelSetField(vals, traj.agrid, traj.xgrid)
    return ConservedField(vals, traj.ygrid, traj.xgrid)

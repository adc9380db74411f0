"""Flux data for scalar conservation laws.

A flux pair ``(Q0, Q)`` enters the level-set scheme only through its
derivatives ``q0 = Q0'`` (speed along the auxiliary ``y`` axis) and
``q = Q'`` (velocity on the torus), sampled at level values ``a`` in
``[0, 1]``.  Primitives ``Q0`` and ``Q`` are kept when known in closed form
because the entropy fluxes and the Godunov oracle need them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate

from .errors import ConfigError

__all__ = [
    "ConfigError",
    "FluxSpec",
    "builtin_flux",
    "flux_bounds",
    "flux_from_config",
    "FLUX_NAMES",
]

FLUX_NAMES = ("advection", "burgers", "buckley")

# uniform scan used for sup-bounds; doubling it nests the samples
BOUND_SAMPLES = 10_000


@dataclass(frozen=True)
class FluxSpec:
    """Derivative samplers ``q0(a)`` and ``q(a)`` of a flux pair.

    ``q0`` maps an array of levels to an array of the same shape; ``q`` maps
    it to an array of shape ``(dim,) + a.shape``.
    """

    name: str
    dim: int
    q0: Callable[[np.ndarray], np.ndarray]
    q: Callable[[np.ndarray], np.ndarray]
    q0_nonneg: bool = True
    Q0: Callable[[np.ndarray], np.ndarray] | None = None
    Q: Callable[[np.ndarray], np.ndarray] | None = None
    bounds: tuple[float, float] = field(init=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        a = np.linspace(0.0, 1.0, 257)
        q0 = np.asarray(self.q0(a), dtype=float)
        q = np.asarray(self.q(a), dtype=float)
        if q0.shape != a.shape or q.shape != (self.dim,) + a.shape:
            raise ConfigError(f"flux {self.name!r}: sampler shapes {q0.shape}, {q.shape}")
        if not (np.all(np.isfinite(q0)) and np.all(np.isfinite(q))):
            raise ConfigError(f"flux {self.name!r} is not bounded on [0, 1]")
        if self.q0_nonneg and np.any(q0 < 0):
            raise ConfigError(f"flux {self.name!r} flagged q0_nonneg but q0 < 0 somewhere")
        plus, minus, qn = flux_bounds(self)
        object.__setattr__(self, "bounds", (max(plus, minus), qn))

    def flux(self, u) -> np.ndarray:
        """Evaluate ``Q(u)``, shape ``(dim,) + u.shape``.

        Falls back to adaptive quadrature of ``q`` from 0 when no primitive
        was supplied.
        """
        u = np.asarray(u, dtype=float)
        if self.Q is not None:
            return np.asarray(self.Q(u), dtype=float)
        out = np.empty((self.dim,) + u.shape)
        flat = u.ravel()
        for d in range(self.dim):
            vals = [integrate.quad(lambda s: float(self.q(np.array(s))[d]), 0.0, v)[0] for v in flat]
            out[d] = np.reshape(vals, u.shape)
        return out


def flux_bounds(spec: FluxSpec, n_samples: int = BOUND_SAMPLES) -> tuple[float, float, float]:
    """Return ``(sup (q0)_+, sup (-q0)_+, sup |q|)`` from a uniform scan.

    The scan uses ``n_samples + 1`` equispaced points of ``[0, 1]``, so the
    estimate only grows when ``n_samples`` is doubled.  Exact for the
    catalog fluxes, approximate for arbitrary user samplers.
    """
    a = np.linspace(0.0, 1.0, n_samples + 1)
    q0 = np.asarray(spec.q0(a), dtype=float)
    q = np.asarray(spec.q(a), dtype=float)
    sup_plus = float(np.max(np.maximum(q0, 0.0)))
    sup_minus = float(np.max(np.maximum(-q0, 0.0)))
    sup_q = float(np.max(np.sqrt(np.sum(q**2, axis=0))))
    return sup_plus, sup_minus, sup_q


def _direction(dim: int, direction: Sequence[float] | None) -> np.ndarray:
    if direction is None:
        return np.ones(dim)
    v = np.asarray(direction, dtype=float).reshape(-1)
    if v.size == 1:
        return np.full(dim, float(v[0]))
    if v.size != dim:
        raise ConfigError(f"direction has {v.size} components, expected {dim}")
    return v


def _buckley_Q(u):
    return u**2 / (u**2 + (1.0 - u) ** 2)


def _buckley_q(u):
    return 2.0 * u * (1.0 - u) / (u**2 + (1.0 - u) ** 2) ** 2


def builtin_flux(name: str, dim: int = 1, *, c: float | Sequence[float] = 1.0,
                 direction: Sequence[float] | None = None, q0: float = 0.0) -> FluxSpec:
    """Build a catalog flux.

    ``advection``: ``q(a) = c`` (scalar or one entry per axis).
    ``burgers``: ``Q(u) = u^2/2`` along ``direction`` (default all ones).
    ``buckley``: ``Q(u) = u^2 / (u^2 + (1-u)^2)`` along ``direction``.

    ``q0`` is an optional constant speed in ``y``; it gives ``Q0(u) = q0 u``.
    ``name`` may carry its parameter inline, e.g. ``"advection(-2)"``.
    """
    if dim not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {dim}")
    m = re.fullmatch(r"\s*(\w+)\s*\((.*)\)\s*", name)
    if m:
        # "advection(-2)" shorthand
        name = m.group(1)
        try:
            c = [float(t) for t in m.group(2).split(",")]
        except ValueError:
            raise ConfigError(f"cannot parse flux parameter in {m.group(0)!r}") from None
        if name != "advection":
            direction = c
    q0c = float(q0)

    def q0_fn(a):
        return np.full(np.shape(a), q0c)

    def Q0_fn(u):
        return q0c * np.asarray(u, dtype=float)

    if name == "advection":
        cv = _direction(dim, c)

        def q_fn(a):
            a = np.asarray(a, dtype=float)
            return cv.reshape((dim,) + (1,) * a.ndim) * np.ones((1,) + a.shape)

        def Q_fn(u):
            u = np.asarray(u, dtype=float)
            return cv.reshape((dim,) + (1,) * u.ndim) * u[None]

    elif name in ("burgers", "buckley"):
        dv = _direction(dim, direction)
        base_q = (lambda a: a) if name == "burgers" else _buckley_q
        base_Q = (lambda u: 0.5 * u**2) if name == "burgers" else _buckley_Q

        def q_fn(a):
            a = np.asarray(a, dtype=float)
            return dv.reshape((dim,) + (1,) * a.ndim) * base_q(a)[None]

        def Q_fn(u):
            u = np.asarray(u, dtype=float)
            return dv.reshape((dim,) + (1,) * u.ndim) * base_Q(u)[None]

    else:
        raise ConfigError(f"unknown flux {name!r}; expected one of {FLUX_NAMES}")

    return FluxSpec(name=name, dim=dim, q0=q0_fn, q=q_fn, q0_nonneg=q0c >= 0,
                    Q0=Q0_fn, Q=Q_fn)


def flux_from_config(cfg: Mapping, dim: int) -> FluxSpec:
    """Build a flux from a ``{"name": ..., "params": {...}}`` mapping."""
    if isinstance(cfg, str):
        cfg = {"name": cfg}
    try:
        name = cfg["name"]
    except (KeyError, TypeError):
        raise ConfigError(f"flux config needs a 'name': {cfg!r}") from None
    params = dict(cfg.get("params") or {})
    unknown = set(params) - {"c", "direction", "q0"}
    if unknown:
        raise ConfigError(f"unknown flux params {sorted(unknown)}")
    return builtin_flux(name, dim, **params)

"""Independent 1-D oracles: exact Riemann solutions, a Godunov scheme, and
the weak-form entropy residual with Kruzhkov entropies ``|u - k|``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .errors import ConfigError, ValidityError
from .flux import FluxSpec, flux_bounds

__all__ = [
    "RiemannProblem",
    "BumpTestFunction",
    "exact_burgers",
    "exact_riemann_periodic",
    "exact_advection",
    "godunov_flux",
    "godunov_step",
    "godunov_solve",
    "entropy_residual",
]

# interior samples per interface for the min/max Godunov flux
GODUNOV_SAMPLES = 32


@dataclass(frozen=True)
class RiemannProblem:
    """Two constant states separated by a jump at ``x0``.

    On the torus the data is ``u_left`` on ``[0, x0)`` and ``u_right`` on
    ``[x0, 1)``, so a second jump (right state to left state) sits at
    ``x = 0``.
    """

    u_left: float
    u_right: float
    x0: float = 0.5
    flux: FluxSpec | None = None

    def __post_init__(self):
        for v in (self.u_left, self.u_right):
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"Riemann states must lie in [0, 1], got {v}")

    def initial(self, x) -> np.ndarray:
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        return np.where(x < self.x0, self.u_left, self.u_right)


def _burgers_line(ul: float, ur: float, x0: float, t: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if ul == ur or t == 0:
        return np.where(x < x0, ul, ur).astype(float)
    if ul > ur:
        s = 0.5 * (ul + ur)
        return np.where(x < x0 + s * t, ul, ur).astype(float)
    return np.clip((x - x0) / t, ul, ur)


def _wave_speeds(ul: float, ur: float) -> tuple[float, float]:
    if ul > ur:
        s = 0.5 * (ul + ur)
        return s, s
    return ul, ur


def _require_burgers(prob: RiemannProblem) -> None:
    if prob.flux is not None and (prob.flux.name != "burgers" or prob.flux.dim != 1):
        raise ConfigError(f"exact Riemann oracle needs the 1-D Burgers flux, got {prob.flux.name!r}")


def exact_burgers(prob: RiemannProblem, t: float, x) -> np.ndarray:
    """Entropy solution of Burgers' equation for Riemann data on the line.

    A decreasing jump is a shock moving at ``(u_L + u_R) / 2``; an increasing
    one opens the fan ``u = (x - x0) / t`` clamped to the states.
    """
    _require_burgers(prob)
    if t < 0:
        raise ValueError("t must be nonnegative")
    return _burgers_line(prob.u_left, prob.u_right, prob.x0, t, x)


def exact_riemann_periodic(prob: RiemannProblem, t: float, x) -> np.ndarray:
    """Burgers entropy solution for the torus version of ``prob``.

    Superposes the wave issued at ``x0`` with the one issued at the wrap
    point ``x = 0``.  Raises :class:`ValidityError` once the two wave zones
    touch.
    """
    _require_burgers(prob)
    ul, ur, x0 = prob.u_left, prob.u_right, prob.x0
    x = np.asarray(x, dtype=float)
    lo1, hi1 = _wave_speeds(ul, ur)
    lo2, hi2 = _wave_speeds(ur, ul)
    left_gap = (x0 + lo1 * t) - hi2 * t
    right_gap = (1.0 + lo2 * t) - (x0 + hi1 * t)
    if left_gap <= 0 or right_gap <= 0:
        raise ValidityError(f"waves reached the domain wrap by t={t}")
    b0 = 0.5 * (hi2 * t + x0 + lo1 * t)
    b1 = 0.5 * (x0 + hi1 * t + 1.0 + lo2 * t)
    xm = b0 + np.mod(x - b0, 1.0)
    return np.where(xm < b1, _burgers_line(ul, ur, x0, t, xm), _burgers_line(ur, ul, 0.0, t, xm - 1.0))


def exact_advection(u0, c: float, t: float, x) -> np.ndarray:
    """``u0(x - c t)`` on the unit torus; ``u0`` is a callable."""
    return np.asarray(u0(np.mod(np.asarray(x, dtype=float) - c * t, 1.0)), dtype=float)


def godunov_flux(ul, ur, flux: FluxSpec) -> np.ndarray:
    """Godunov interface flux: ``min Q`` on ``[u_L, u_R]`` if ``u_L <= u_R``,
    else ``max Q`` on ``[u_R, u_L]``.

    The extremum is taken over both endpoints plus equispaced interior
    samples, which is exact for monotone or convex fluxes.
    """
    ul = np.asarray(ul, dtype=float)
    ur = np.asarray(ur, dtype=float)
    s = np.linspace(0.0, 1.0, GODUNOV_SAMPLES + 2)
    pts = ul[..., None] + (ur - ul)[..., None] * s
    Q = flux.flux(pts)[0]
    return np.where(ul <= ur, Q.min(axis=-1), Q.max(axis=-1))


def godunov_step(u, flux: FluxSpec, dt: float, dx: float) -> np.ndarray:
    """Conservative periodic Godunov update of 1-D cell averages."""
    if flux.dim != 1:
        raise ConfigError("the Godunov oracle is one-dimensional")
    _, _, qmax = flux_bounds(flux)
    if dt * qmax > dx * (1 + 1e-12):
        raise ValueError(f"CFL violated: dt*sup|q| = {dt * qmax:g} > dx = {dx:g}")
    u = np.asarray(u, dtype=float)
    F = godunov_flux(u, np.roll(u, -1), flux)  # F[j] lives at x_{j+1/2}
    return u - dt / dx * (F - np.roll(F, 1))


def godunov_solve(u0, flux: FluxSpec, T: float, cfl: float = 0.9) -> np.ndarray:
    """Advance cell averages ``u0`` on the unit torus to time ``T``."""
    u = np.asarray(u0, dtype=float).copy()
    dx = 1.0 / u.size
    _, _, qmax = flux_bounds(flux)
    dt_max = cfl * dx / max(qmax, 1e-300)
    n = max(1, int(np.ceil(T / dt_max - 1e-12))) if T > 0 else 0
    for _ in range(n):
        u = godunov_step(u, flux, T / n, dx)
    return u


def _bump(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    out = np.zeros_like(s)
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si**2))
    return out


def _bump_prime(s):
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    out = np.zeros_like(s)
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si**2)) * (-2.0 * si / (1.0 - si**2) ** 2)
    return out


@dataclass(frozen=True)
class BumpTestFunction:
    """``phi(t, x) = b((t - t_c)/t_w) b(dist(x, x_c)/x_w)`` with the smooth bump
    ``b(s) = exp(1 - 1/(1 - s^2))`` on ``|s| < 1``; ``dist`` is the signed
    periodic distance on the unit torus.  Peak value 1.
    """

    t_c: float
    t_w: float
    x_c: float
    x_w: float

    def _sx(self, x):
        return (np.mod(np.asarray(x, dtype=float) - self.x_c + 0.5, 1.0) - 0.5) / self.x_w

    def value(self, t, x):
        return _bump((np.asarray(t) - self.t_c) / self.t_w) * _bump(self._sx(x))

    def dt(self, t, x):
        return _bump_prime((np.asarray(t) - self.t_c) / self.t_w) / self.t_w * _bump(self._sx(x))

    def dx(self, t, x):
        return _bump((np.asarray(t) - self.t_c) / self.t_w) * _bump_prime(self._sx(x)) / self.x_w


def entropy_residual(u_slices, times, flux: FluxSpec, k: float, phi) -> float:
    """Weak-form entropy integral ``int int |u-k| phi_t + Q^k(u) phi_x dx dt``.

    ``u_slices`` has shape ``(n_t, n_x)`` (cell-center values on the unit
    torus) and ``times`` the matching snapshot times.  ``Q^k(u) =
    sign(u - k) (Q(u) - Q(k))``.  Midpoint rule in ``x``, trapezoid in ``t``.
    An entropy solution gives a value ``>= 0`` for every ``phi >= 0``
    compactly supported in ``(0, T) x T``.
    """
    u = np.asarray(u_slices, dtype=float)
    times = np.asarray(times, dtype=float)
    if u.ndim != 2 or u.shape[0] != times.size:
        raise ValueError("u_slices must be (n_t, n_x) with one row per time")
    n_x = u.shape[1]
    x = (np.arange(n_x) + 0.5) / n_x
    tt, xx = np.meshgrid(times, x, indexing="ij")
    if np.any(phi.value(tt, xx) < 0):
        raise ValueError("test function must be nonnegative")
    C = np.abs(u - k)
    Qk = float(flux.flux(np.array(k))[0])
    QC = np.sign(u - k) * (flux.flux(u)[0] - Qk)
    integrand = C * phi.dt(tt, xx) + QC * phi.dx(tt, xx)
    per_time = integrand.sum(axis=1) / n_x
    return float(trapezoid(per_time, times)) if times.size > 1 else 0.0

"""Machine-checkable versions of the inequalities satisfied by level-set runs.

Every checker returns a :class:`CheckReport` whose rows carry
``lhs``, ``rhs`` and ``margin = rhs - lhs``; a row passes when
``margin >= -tol``.  For equalities the margin is ``tol - |lhs - rhs|`` and
the row passes when it is nonnegative.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import tolerances as tols
from .errors import GridError, InvariantError
from .fields import (
    ConservedField,
    YGrid,
    build_kinetic,
    level_slice,
    field_lp,
    generalized_inverse,
    lp_norm,
    monotone_violations,
    total_variation,
)
from .flux import flux_bounds
from .scheme import Trajectory

__all__ = [
    "CheckRow",
    "CheckReport",
    "TestField",
    "zero_field",
    "identity_field",
    "travelling_field",
    "STANDARD_TEST_FIELDS",
    "check_max_principle",
    "check_monotonicity",
    "check_lp_contraction",
    "check_l1_kruzhkov_chain",
    "check_tv",
    "semi_integral_residual",
    "check_p_consistency",
    "RunMonitor",
    "write_checks_csv",
    "CSV_HEADER",
]

CSV_HEADER = ("check", "param", "t", "lhs", "rhs", "margin", "pass")


@dataclass
class CheckRow:
    check: str
    param: str
    t: float
    lhs: float
    rhs: float
    margin: float
    passed: bool

    def as_csv(self) -> list[str]:
        return [self.check, self.param, f"{self.t:.12g}", f"{self.lhs:.17g}", f"{self.rhs:.17g}",
                f"{self.margin:.17g}", "1" if self.passed else "0"]


@dataclass
class CheckReport:
    name: str
    rows: list[CheckRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def worst_margin(self) -> float:
        return min((r.margin for r in self.rows), default=float("inf"))

    def add(self, param: str, t: float, lhs: float, rhs: float, tol: float) -> None:
        margin = rhs - lhs
        self.rows.append(CheckRow(self.name, param, float(t), float(lhs), float(rhs), float(margin),
                                  bool(margin >= -tol)))

    def add_equal(self, param: str, t: float, lhs: float, rhs: float, tol: float) -> None:
        margin = tol - abs(lhs - rhs)
        self.rows.append(CheckRow(self.name, param, float(t), float(lhs), float(rhs), float(margin),
                                  bool(margin >= 0)))

    def failures(self) -> list[CheckRow]:
        return [r for r in self.rows if not r.passed]

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {len(self.rows)} rows, worst margin {self.worst_margin:.3e}"


def write_checks_csv(path, reports: Iterable[CheckReport], append: bool = True) -> None:
    """Append report rows to ``checks.csv`` (header written once)."""
    path = Path(path)
    new = not (append and path.exists())
    with open(path, "w" if new else "a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(CSV_HEADER)
        for rep in reports:
            for row in rep.rows:
                w.writerow(row.as_csv())


def _exact_mode(traj: Trajectory) -> bool:
    return traj.config.interp_mode == "exact_shift"


# ---------------------------------------------------------------- bounds and structure


def _max_principle_rows(rep: CheckReport, t: float, V: np.ndarray, lo0: float, hi0: float,
                        plus: float, minus: float, tol: float) -> None:
    rep.add("lower", t, lo0 - t * minus, float(V.min()), tol)
    rep.add("upper", t, float(V.max()), hi0 + t * plus, tol)


def check_max_principle(traj: Trajectory, tol: float = tols.SCHEME_EXACT) -> CheckReport:
    """``inf Y0 - t sup(-q0)_+ <= Y(t) <= sup Y0 + t sup(q0)_+`` per snapshot."""
    rep = CheckReport("max_principle")
    plus, minus, _ = flux_bounds(traj.flux)
    lo0, hi0 = float(traj.values[0].min()), float(traj.values[0].max())
    for t, V in zip(traj.times, traj.values):
        _max_principle_rows(rep, t, V, lo0, hi0, plus, minus, tol)
    return rep


def _u_counts(V: np.ndarray, yg: YGrid) -> np.ndarray:
    try:
        return generalized_inverse(V, yg)
    except InvariantError:
        y = yg.centers.reshape((-1,) + (1,) * (V.ndim - 1))
        return np.stack([np.mean(V < yk, axis=0) for yk in y])


def _monotonicity_rows(rep: CheckReport, t: float, V: np.ndarray, yg: YGrid) -> None:
    rep.add("dY/da", t, monotone_violations(V), 0.0, 0.0)
    rep.add("du/dy", t, monotone_violations(_u_counts(V, yg)), 0.0, 0.0)


def check_monotonicity(traj: Trajectory) -> CheckReport:
    """Zero decreasing neighbours in ``a`` for ``Y`` and in ``y`` for ``u``."""
    rep = CheckReport("monotonicity")
    for t, V in zip(traj.times, traj.values):
        _monotonicity_rows(rep, t, V, traj.ygrid)
    return rep


# ---------------------------------------------------------------- stability


def _same_grids(a: Trajectory, b: Trajectory) -> None:
    if a.agrid != b.agrid or a.xgrid != b.xgrid or a.steps != b.steps:
        raise GridError("trajectories must share grids and snapshot steps")


def check_lp_contraction(traj_a: Trajectory, traj_b: Trajectory,
                         ps: Sequence[float] = (1, 2, 4), tol: float | None = None) -> CheckReport:
    """``||Y(t) - Yt(t)||_p <= ||Y0 - Yt0||_p + t ||q0 - qt0||_p`` per snapshot and ``p``.

    Default tolerance: scheme-exact in ``exact_shift`` mode, ``dx * t`` (scaled)
    in linear mode.
    """
    _same_grids(traj_a, traj_b)
    rep = CheckReport("lp_contraction")
    ag, xg = traj_a.agrid, traj_a.xgrid
    dq0 = np.asarray(traj_a.flux.q0(ag.centers)) - np.asarray(traj_b.flux.q0(ag.centers))
    for p in ps:
        d0 = field_lp(traj_a.values[0] - traj_b.values[0], p, xg)
        q_term = lp_norm(dq0, p, ag.weight)
        for t, Va, Vb in zip(traj_a.times, traj_a.values, traj_b.values):
            if tol is not None:
                tl = tol
            elif _exact_mode(traj_a) and _exact_mode(traj_b):
                tl = tols.SCHEME_EXACT
            else:
                tl = tols.SCHEME_EXACT + tols.discretization(max(xg.spacing) * t)
            rep.add(f"p={p:g}", t, field_lp(Va - Vb, p, xg), d0 + t * q_term, tl)
    return rep


def _shared_ygrid(a: Trajectory, b: Trajectory) -> YGrid:
    if a.ygrid == b.ygrid:
        return a.ygrid
    lo = min(a.ygrid.y_min, b.ygrid.y_min)
    hi = max(a.ygrid.y_max, b.ygrid.y_max)
    return YGrid.from_bounds(lo, hi, max(a.ygrid.n_y, b.ygrid.n_y), margin=0.0)


def _heaviside_l1(Va: np.ndarray, Vb: np.ndarray, yg: YGrid) -> float:
    """``sum_{i,k,j} |H(y_k - Va) - H(y_k - Vb)|`` by per-cell counting."""
    y = yg.centers
    ca = np.searchsorted(y, Va.ravel(), side="right")
    cb = np.searchsorted(y, Vb.ravel(), side="right")
    return float(np.sum(np.abs(ca - cb)))


def check_l1_kruzhkov_chain(traj_a: Trajectory, traj_b: Trajectory) -> CheckReport:
    """Every link of the L1 chain from the conserved to the level-set side.

    Per snapshot: ``int|u - ut| dy dx = int|H(u-a) - H(ut-a)|`` (``u=kinetic``),
    ``= int|H(y-Y) - H(y-Yt)|`` (``kinetic=heaviside``),
    ``= int|Y - Yt|`` (``heaviside=levelset``, co-area quadrature tolerance),
    ``<= int|Y0 - Yt0|`` (``contraction``), plus ``int|Y0 - Yt0| = int|u0 - ut0|``
    and the end-to-end ``int|u - ut| <= int|u0 - ut0|`` (``kruzhkov``).
    """
    _same_grids(traj_a, traj_b)
    rep = CheckReport("l1_chain")
    yg = _shared_ygrid(traj_a, traj_b)
    ag, xg = traj_a.agrid, traj_a.xgrid
    vol = xg.cell_volume
    ctol = tols.coarea_tol(yg.dy, ag.n_a)
    if _exact_mode(traj_a):
        ktol = tols.SCHEME_EXACT
    else:
        ktol = tols.SCHEME_EXACT + tols.discretization(max(xg.spacing) * traj_a.times[-1])
    w_u = yg.dy * vol
    w_k = yg.dy * vol / ag.n_a

    def u_of(V):
        return ConservedField(generalized_inverse(V, yg), yg, xg)

    u0a, u0b = u_of(traj_a.values[0]), u_of(traj_b.values[0])
    l1_u0 = float(np.sum(np.abs(u0a.values - u0b.values))) * w_u
    l1_y0 = field_lp(traj_a.values[0] - traj_b.values[0], 1, xg)
    for t, Va, Vb in zip(traj_a.times, traj_a.values, traj_b.values):
        ua, ub = u_of(Va), u_of(Vb)
        l1_u = float(np.sum(np.abs(ua.values - ub.values))) * w_u
        fa, fb = build_kinetic(ua, ag), build_kinetic(ub, ag)
        l1_kin = float(np.count_nonzero(fa.values != fb.values)) * w_k
        l1_h = _heaviside_l1(Va, Vb, yg) * w_k
        l1_y = field_lp(Va - Vb, 1, xg)
        exact = tols.SCHEME_EXACT * max(1.0, l1_u)
        rep.add_equal("u=kinetic", t, l1_u, l1_kin, exact)
        rep.add_equal("kinetic=heaviside", t, l1_kin, l1_h, exact)
        rep.add_equal("heaviside=levelset", t, l1_h, l1_y, ctol)
        rep.add("contraction", t, l1_y, l1_y0, ktol)
        rep.add_equal("levelset0=u0", t, l1_y0, l1_u0, ctol)
        rep.add("kruzhkov", t, l1_u, l1_u0, 2 * ctol + ktol)
    return rep


def _tv_tol(n_a: int) -> float:
    return tols.discretization(tols.TV_LEVELS / n_a)


def check_tv(traj: Trajectory, y: float = 1.0, tol: float | None = None) -> CheckReport:
    """``TV_x(u(t, y, .)) <= TV_x(u0(y, .)) + tol`` per snapshot."""
    rep = CheckReport("tv")
    if tol is None:
        tol = _tv_tol(traj.agrid.n_a)
    tv0 = total_variation(traj.slice_at(0, y))
    for k, t in enumerate(traj.times):
        rep.add(f"y={y:g}", t, total_variation(traj.slice_at(k, y)), tv0, tol)
    return rep


# ---------------------------------------------------------------- semi-integral inequality


@dataclass(frozen=True)
class TestField:
    """Smooth test field ``Z(t, a, x)`` with ``dZ/da >= 0``.

    ``value``, ``dt`` take ``(t, A, X)`` where ``A`` broadcasts against the
    torus mesh ``X`` (a tuple of arrays); ``grad`` returns one array per axis.
    """

    __test__ = False  # not a pytest class

    name: str
    value: Callable
    dt: Callable
    grad: Callable


def zero_field() -> TestField:
    z = lambda t, A, X: np.zeros(np.broadcast_shapes(A.shape, X[0].shape))
    return TestField("zero", z, z, lambda t, A, X: [z(t, A, X) for _ in X])


def identity_field() -> TestField:
    """``Z = a``: stationary and monotone."""
    z = lambda t, A, X: np.zeros(np.broadcast_shapes(A.shape, X[0].shape))
    return TestField("identity", lambda t, A, X: A + z(t, A, X), z,
                     lambda t, A, X: [z(t, A, X) for _ in X])


def travelling_field(amplitude: float = 0.2, slope: float = 2.0, speed: float = 0.5) -> TestField:
    """``Z = slope*a + amplitude*sin(2 pi (x_1 - speed t))``."""
    k = 2 * np.pi

    def value(t, A, X):
        return slope * A + amplitude * np.sin(k * (X[0] - speed * t))

    def dt(t, A, X):
        return -speed * k * amplitude * np.cos(k * (X[0] - speed * t)) + 0 * A

    def grad(t, A, X):
        g0 = k * amplitude * np.cos(k * (X[0] - speed * t)) + 0 * A
        return [g0] + [np.zeros_like(g0) for _ in X[1:]]

    return TestField(f"travelling(amp={amplitude:g},slope={slope:g},speed={speed:g})", value, dt, grad)


STANDARD_TEST_FIELDS = (zero_field, identity_field, travelling_field)


class _ConsistencyTerms:
    """``int |Y - Z|^p`` and its formal time derivative at one snapshot."""

    def __init__(self, config, Z: TestField, p: float):
        ag, xg = config.agrid, config.xgrid
        self.Z, self.p = Z, p
        self.A = ag.centers.reshape((-1,) + (1,) * xg.dim)
        self.X = tuple(m[None] for m in xg.mesh())
        self.q0 = np.asarray(config.flux.q0(ag.centers)).reshape(self.A.shape)
        self.q = np.asarray(config.flux.q(ag.centers)).reshape((xg.dim,) + self.A.shape)
        self.w = xg.cell_volume / ag.n_a

    def __call__(self, t: float, V: np.ndarray) -> tuple[float, float]:
        Z, p, A, X = self.Z, self.p, self.A, self.X
        Zv = np.broadcast_to(Z.value(t, A, X), V.shape)
        if monotone_violations(Zv):
            raise InvariantError(f"test field {Z.name} decreases in a at t={t}")
        D = V - Zv
        absD = np.abs(D)
        integral = float(np.sum(absD**p)) * self.w
        transport = self.q0 - Z.dt(t, A, X) - sum(self.q[k] * g for k, g in enumerate(Z.grad(t, A, X)))
        weight = np.sign(D) if p == 1 else D * absD ** (p - 2)
        gamma = p * float(np.sum(weight * transport)) * self.w
        return integral, gamma


def _consistency_report(name: str, param: str, times, integrals, gammas, tol: float) -> CheckReport:
    rep = CheckReport(name)
    for n in range(len(times) - 1):
        dt = times[n + 1] - times[n]
        lhs = (integrals[n + 1] - integrals[n]) / dt
        rhs = 0.5 * (gammas[n] + gammas[n + 1])
        rep.add(param, times[n + 1], lhs, rhs, tol)
    return rep


def _consistency_tol(config, c: float | None) -> float:
    if c is None:
        c = tols.SEMI_INTEGRAL_C
    return tols.discretization(c * (config.h + max(config.xgrid.spacing)))


def check_p_consistency(traj: Trajectory, Z: TestField, p: float = 2,
                        c: float | None = None) -> CheckReport:
    """Discrete ``d/dt int |Y - Z|^p <= p int (Y-Z)|Y-Z|^(p-2) (q0 - Z_t - q.grad Z)``.

    For each pair of consecutive snapshots the difference quotient of the
    left side is compared with the trapezoid average of the right side.
    A row passes when ``margin >= -c (h + dx)``.  For ``p = 1`` the weight is
    ``sign(Y - Z)``, which is only meaningful while ``Y != Z`` almost
    everywhere.
    """
    terms = _ConsistencyTerms(traj.config, Z, p)
    vals = [terms(t, V) for t, V in zip(traj.times, traj.values)]
    return _consistency_report("semi_integral" if p == 2 else "p_consistency", f"{Z.name},p={p:g}",
                               traj.times, [v[0] for v in vals], [v[1] for v in vals],
                               _consistency_tol(traj.config, c))


def semi_integral_residual(traj: Trajectory, Z: TestField, c: float | None = None) -> CheckReport:
    """The ``p = 2`` case of :func:`check_p_consistency`."""
    return check_p_consistency(traj, Z, 2, c)


# ---------------------------------------------------------------- streaming


class RunMonitor:
    """Callback for :func:`lsclaw.scheme.run` evaluating checks at every step.

    Produces the same rows as the trajectory checkers without storing
    snapshots, which keeps fine-grid runs within memory.
    """

    def __init__(self, config, Y0, ygrid: YGrid, test_fields: Sequence[tuple[TestField, float]] = (),
                 tv_y: float | None = 1.0, c: float | None = None):
        self.config, self.ygrid = config, ygrid
        self.max_principle = CheckReport("max_principle")
        self.monotonicity = CheckReport("monotonicity")
        self.tv = CheckReport("tv") if (tv_y is not None and config.flux.dim == 1) else None
        self._tv_y = tv_y
        self._plus, self._minus, _ = flux_bounds(config.flux)
        self._lo0, self._hi0 = Y0.bounds
        self._tv0 = total_variation(level_slice(Y0.values, tv_y)) if self.tv is not None else 0.0
        self._terms = [(_ConsistencyTerms(config, Z, p), Z, p) for Z, p in test_fields]
        self._series: list[tuple[list, list]] = [([], []) for _ in self._terms]
        self._times: list[float] = []
        self._c = c

    def __call__(self, n: int, Y) -> None:
        t = n * self.config.h
        V = Y.values
        self._times.append(t)
        _max_principle_rows(self.max_principle, t, V, self._lo0, self._hi0, self._plus, self._minus,
                            tols.SCHEME_EXACT)
        _monotonicity_rows(self.monotonicity, t, V, self.ygrid)
        if self.tv is not None:
            self.tv.add(f"y={self._tv_y:g}", t, total_variation(level_slice(V, self._tv_y)), self._tv0,
                        _tv_tol(self.config.n_a))
        for (terms, _, _), (ints, gams) in zip(self._terms, self._series):
            i, g = terms(t, V)
            ints.append(i)
            gams.append(g)

    def consistency_reports(self) -> list[CheckReport]:
        tol = _consistency_tol(self.config, self._c)
        return [_consistency_report("semi_integral" if p == 2 else "p_consistency", f"{Z.name},p={p:g}",
                                    self._times, ints, gams, tol)
                for (_, Z, p), (ints, gams) in zip(self._terms, self._series)]

    def reports(self) -> list[CheckReport]:
        out = [self.max_principle, self.monotonicity]
        if self.tv is not None:
            out.append(self.tv)
        return out + self.consistency_reports()

"""Experiment definitions: initial data, lifts to level-set form, and the
``run`` / ``convergence`` / ``compare`` / ``checks`` drivers behind the CLI."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import diagnostics as dg
from .errors import ConfigError
from .fields import AGrid, LevelSetField, XGrid, field_lp, level_slice, monotone_violations, read_snapshot, \
    total_variation, write_snapshot
from .reference import BumpTestFunction, RiemannProblem, entropy_residual, exact_advection, \
    exact_riemann_periodic, godunov_solve
from .scheme import SchemeConfig, Trajectory, run

log = logging.getLogger(__name__)

__all__ = [
    "Experiment",
    "lift_initial",
    "lift_shift",
    "initial_profile",
    "initial_levelset",
    "random_monotone",
    "StepMonitor",
    "run_experiment",
    "DIAG_HEADER",
    "ERRORS_HEADER",
    "ENTROPY_LEVEL",
]

DIAG_HEADER = ("step", "t", "l1", "l2", "min", "max", "tv_x", "entropy_residual")
ERRORS_HEADER = ("n_x", "n_a", "h", "l1_error", "l1_error_oracle")
KINDS = ("run", "convergence", "compare", "checks")

# Kruzhkov level k used by the per-step entropy column of diag.csv
ENTROPY_LEVEL = 0.5


# ---------------------------------------------------------------- lifts


def lift_initial(U0, ag: AGrid, r: float | None = None, xgrid: XGrid | None = None) -> LevelSetField:
    """Level-set lift ``Y0(a, x) = a / U0(x)`` of data with ``r <= U0 <= 1 - r``.

    The conserved family ``u0(y, x) = clamp(y U0(x), 0, 1)`` has ``Y0`` as its
    generalized inverse and equals ``U0`` on the slice ``y = 1``.  ``Y0`` takes
    values in ``[0, 1/r]``.  When ``r`` is omitted it is read off the data.
    """
    U0 = np.asarray(U0, dtype=float)
    if r is None:
        r = float(min(U0.min(), 1.0 - U0.max()))
    if not r > 0:
        raise ConfigError("lift_initial needs data bounded away from 0 and 1 (r > 0)")
    if U0.min() < r or U0.max() > 1.0 - r:
        raise ConfigError(f"initial data leaves [{r:g}, {1 - r:g}]")
    a = ag.centers.reshape((-1,) + (1,) * U0.ndim)
    return LevelSetField(a / U0[None], ag, xgrid or XGrid(U0.shape))


def lift_shift(U0, ag: AGrid, xgrid: XGrid | None = None) -> LevelSetField:
    """Level-set lift ``Y0(a, x) = 1 + a - U0(x)`` for data in ``[0, 1]``.

    Generalized inverse of ``u0(y, x) = clamp(U0(x) + y - 1, 0, 1)``, which
    also equals ``U0`` at ``y = 1``.  Unlike :func:`lift_initial` it accepts
    data touching 0 or 1, e.g. Riemann states.
    """
    U0 = np.asarray(U0, dtype=float)
    if U0.min() < 0 or U0.max() > 1:
        raise ConfigError("lift_shift needs data in [0, 1]")
    a = ag.centers.reshape((-1,) + (1,) * U0.ndim)
    return LevelSetField(1.0 + a - U0[None], ag, xgrid or XGrid(U0.shape))


def random_monotone(rng: np.random.Generator, n_a: int, n_x, scale: float = 1.0) -> LevelSetField:
    """Random level-set field: nonnegative, sorted in ``a`` per column."""
    xg = XGrid(n_x)
    V = np.sort(rng.uniform(0.0, scale, size=(n_a,) + xg.shape), axis=0)
    return LevelSetField(V, AGrid(n_a), xg)


def initial_profile(spec: Mapping, xg: XGrid) -> np.ndarray:
    """Conserved data ``U0`` at cell centres for ``riemann`` or ``sine`` specs."""
    kind = spec.get("type")
    X = xg.mesh()
    if kind == "riemann":
        prob = RiemannProblem(float(spec["u_l"]), float(spec["u_r"]), float(spec.get("x0", 0.5)))
        return prob.initial(X[0])
    if kind == "sine":
        amp, mean = float(spec.get("amplitude", 0.3)), float(spec.get("mean", 0.5))
        return mean + amp * np.sin(2 * np.pi * sum(X))
    raise ConfigError(f"initial type {kind!r} has no conserved profile")


def initial_levelset(spec: Mapping, config: SchemeConfig) -> LevelSetField:
    """Build ``Y0`` from an initial-data spec.

    ``riemann`` and ``sine`` data are lifted with ``lift`` = ``ratio``,
    ``shift`` or ``auto`` (ratio when the data stays inside ``(0, 1)``);
    ``file`` reads a level-set snapshot; ``random`` draws sorted columns.
    """
    ag, xg = config.agrid, config.xgrid
    kind = spec.get("type")
    if kind == "file":
        snap = read_snapshot(spec["path"])
        if snap.kind != "levelset":
            raise ConfigError(f"{spec['path']} is not a level-set snapshot")
        return LevelSetField(snap.values, AGrid(snap.values.shape[0]), snap.xgrid)
    if kind == "random":
        rng = np.random.default_rng(int(spec.get("seed", 0)))
        return random_monotone(rng, ag.n_a, xg.shape, float(spec.get("scale", 1.0)))
    U0 = initial_profile(spec, xg)
    lift = spec.get("lift", "auto")
    if lift == "auto":
        lift = "ratio" if (U0.min() > 0 and U0.max() < 1) else "shift"
    if lift == "ratio":
        return lift_initial(U0, ag, spec.get("r"), xg)
    if lift == "shift":
        return lift_shift(U0, ag, xg)
    raise ConfigError(f"unknown lift {lift!r}")


# ---------------------------------------------------------------- per-step monitoring


@dataclass
class StepMonitor:
    """Callback for :func:`run` recording one ``diag.csv`` row per step."""

    every: int = 1
    y: float = 1.0
    rows: list[tuple] = field(default_factory=list)
    a_violations: int = 0
    _prev_entropy: float | None = None
    _h: float = 0.0

    def bind(self, config: SchemeConfig) -> "StepMonitor":
        self._h = config.h
        return self

    def __call__(self, n: int, Y: LevelSetField) -> None:
        self.a_violations += monotone_violations(Y.values)
        u = level_slice(Y.values, self.y)
        ent = float(np.mean(np.abs(u - ENTROPY_LEVEL)))
        # entropy dissipation rate of int |u - k| dx; zero at step 0
        rate = 0.0 if self._prev_entropy is None else (self._prev_entropy - ent) / self._h
        self._prev_entropy = ent
        if n % self.every:
            return
        xg = Y.xgrid
        self.rows.append((n, n * self._h, field_lp(Y.values, 1, xg), field_lp(Y.values, 2, xg),
                          float(Y.values.min()), float(Y.values.max()), total_variation(u), rate))

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DIAG_HEADER)
            for row in self.rows:
                w.writerow([row[0], f"{row[1]:.12g}"] + [f"{v:.17g}" for v in row[2:]])


# ---------------------------------------------------------------- experiments


@dataclass
class Experiment:
    kind: str
    config: SchemeConfig
    initial: dict
    ladder: list[dict] = field(default_factory=list)
    output_dir: Path = Path("out")
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"experiment kind must be one of {KINDS}")
        prev = None
        for entry in self.ladder:
            key = (int(entry["n_x"]), int(entry["n_a"]), float(entry["h"]))
            if prev is not None and not (key[0] > prev[0] and key[1] >= prev[1] and key[2] <= prev[2]):
                raise ConfigError("refinement ladder must be strictly refining")
            prev = key

    @classmethod
    def from_dict(cls, cfg: Mapping, kind: str | None = None, out: str | None = None) -> "Experiment":
        cfg = dict(cfg)
        return cls(
            kind=kind or cfg.get("kind", "run"),
            config=SchemeConfig.from_dict(cfg),
            initial=dict(cfg.get("initial", {"type": "riemann", "u_l": 1.0, "u_r": 0.0})),
            ladder=list(cfg.get("ladder", [])),
            output_dir=Path(out or cfg.get("output_dir", "out")),
            raw=cfg,
        )

    @classmethod
    def from_file(cls, path, kind: str | None = None, out: str | None = None) -> "Experiment":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), kind, out)


def _exact_solution(exp: Experiment, config: SchemeConfig, t: float) -> np.ndarray | None:
    """Exact ``u(t, .)`` at cell centres when an oracle exists, else ``None``."""
    init, flux = exp.initial, config.flux
    if flux.dim != 1:
        return None
    x = config.xgrid.centers(0)
    if init.get("type") == "riemann" and flux.name == "burgers":
        prob = RiemannProblem(float(init["u_l"]), float(init["u_r"]), float(init.get("x0", 0.5)), flux)
        return exact_riemann_periodic(prob, t, x)
    if init.get("type") in ("riemann", "sine") and flux.name == "advection":
        c = float(np.asarray(flux.q(np.array(0.5)))[0])
        return exact_advection(lambda s: _profile_at(init, s), c, t, x)
    return None


def _profile_at(init: Mapping, x: np.ndarray) -> np.ndarray:
    if init["type"] == "riemann":
        return RiemannProblem(float(init["u_l"]), float(init["u_r"]), float(init.get("x0", 0.5))).initial(x)
    return float(init.get("mean", 0.5)) + float(init.get("amplitude", 0.3)) * np.sin(2 * np.pi * x)


def _invariant_reports(traj: Trajectory, monitor: StepMonitor) -> list[dg.CheckReport]:
    reps = [dg.check_max_principle(traj), dg.check_monotonicity(traj)]
    steps = dg.CheckReport("step_monotonicity")
    steps.add("dY/da all steps", traj.times[-1], monitor.a_violations, 0.0, 0.0)
    reps.append(steps)
    return reps


def _single_run(exp: Experiment, config: SchemeConfig):
    Y0 = initial_levelset(exp.initial, config)
    monitor = StepMonitor(every=config.diagnostics_every).bind(config)
    traj = run(Y0, config, monitor)
    return traj, monitor


def _run_kind(exp: Experiment) -> bool:
    traj, monitor = _single_run(exp, exp.config)
    out = exp.output_dir
    for step_idx, V in zip(traj.steps, traj.values):
        write_snapshot(out / f"levelset_{step_idx:06d}.txt", "levelset", V, traj.xgrid, traj.ygrid)
    write_snapshot(out / f"conserved_{traj.steps[-1]:06d}.txt", "conserved",
                   traj.conserved(len(traj) - 1).values, traj.xgrid, traj.ygrid)
    monitor.write(out / "diag.csv")
    reps = _invariant_reports(traj, monitor)
    dg.write_checks_csv(out / "checks.csv", reps, append=False)
    for r in reps:
        log.info(r.summary())
    return all(r.passed for r in reps)


def _ladder_configs(exp: Experiment) -> list[SchemeConfig]:
    base = exp.config
    return [base.with_(n_x=(int(e["n_x"]),) * base.flux.dim, n_a=int(e["n_a"]), h=float(e["h"]),
                       n_y=int(e.get("n_y", base.n_y)), diagnostics_every=10**9)
            for e in exp.ladder]


def _convergence_entry(exp: Experiment, config: SchemeConfig):
    traj, monitor = _single_run(exp, config)
    t = traj.times[-1]
    exact = _exact_solution(exp, config, t)
    if exact is None:
        raise ConfigError("convergence study needs a 1-D Burgers Riemann or advection setup")
    u = traj.slice_at(len(traj) - 1, 1.0)
    dx = config.xgrid.spacing[0]
    l1 = float(np.sum(np.abs(u - exact)) * dx)
    u0 = initial_profile(exp.initial, config.xgrid)
    ug = godunov_solve(u0, config.flux, t)
    l1_oracle = float(np.sum(np.abs(ug - exact)) * dx)
    ok = all(r.passed for r in _invariant_reports(traj, monitor))
    return (config.n_x[0], config.n_a, config.h, l1, l1_oracle), ok


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _convergence_kind(exp: Experiment, threads: int) -> bool:
    if not exp.ladder:
        raise ConfigError("convergence experiment needs a 'ladder'")
    results = _map(lambda c: _convergence_entry(exp, c), _ladder_configs(exp), threads)
    with open(exp.output_dir / "errors.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ERRORS_HEADER)
        for row, _ in results:
            w.writerow([row[0], row[1], f"{row[2]:.12g}", f"{row[3]:.17g}", f"{row[4]:.17g}"])
    for row, _ in results:
        log.info("n_x=%d n_a=%d h=%g  TC L1 %.4e  Godunov L1 %.4e", *row)
    return all(ok for _, ok in results)


def _compare_kind(exp: Experiment) -> bool:
    traj, monitor = _single_run(exp, exp.config)
    t = traj.times[-1]
    exact = _exact_solution(exp, exp.config, t)
    if exact is None:
        raise ConfigError("compare needs a 1-D Burgers Riemann or advection setup")
    dx = exp.config.xgrid.spacing[0]
    u_tc = traj.slice_at(len(traj) - 1, 1.0)
    u_g = godunov_solve(initial_profile(exp.initial, exp.config.xgrid), exp.config.flux, t)
    with open(exp.output_dir / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("method", "n_x", "t", "l1_error"))
        w.writerow(("tc", exp.config.n_x[0], f"{t:.12g}", f"{np.sum(np.abs(u_tc - exact)) * dx:.17g}"))
        w.writerow(("godunov", exp.config.n_x[0], f"{t:.12g}", f"{np.sum(np.abs(u_g - exact)) * dx:.17g}"))
        w.writerow(("exact", exp.config.n_x[0], f"{t:.12g}", "0"))
    return all(r.passed for r in _invariant_reports(traj, monitor))


def _companion_initial(init: Mapping, config: SchemeConfig) -> dict:
    """Second initial datum for the pairwise checks: shifted jump or phase."""
    comp = dict(init)
    shift = float(init.get("companion_shift", 4.0 / config.n_x[0]))
    if comp.get("type") == "riemann":
        comp["x0"] = float(init.get("x0", 0.5)) + shift
    elif comp.get("type") == "random":
        comp["seed"] = int(init.get("seed", 0)) + 1
    elif comp.get("type") == "sine":
        comp["mean"] = float(init.get("mean", 0.5)) + 0.05
    return comp


def _checks_kind(exp: Experiment) -> bool:
    config = exp.config
    traj, monitor = _single_run(exp, config)
    comp = Experiment(exp.kind, config, _companion_initial(exp.initial, config))
    traj_b, _ = _single_run(comp, config)
    reps = _invariant_reports(traj, monitor)
    reps.append(dg.check_lp_contraction(traj, traj_b))
    reps.append(dg.check_l1_kruzhkov_chain(traj, traj_b))
    if config.flux.dim == 1:
        reps.append(dg.check_tv(traj))
        # the entropy tolerance is calibrated for CFL <= 1 runs only
        if config.h * config.flux.bounds[1] <= config.xgrid.spacing[0] * (1 + 1e-12):
            reps.append(_entropy_report(traj))
    for make in dg.STANDARD_TEST_FIELDS:
        reps.append(dg.semi_integral_residual(traj, make()))
    for p in (1, 3):
        reps.append(dg.check_p_consistency(traj, dg.zero_field(), p))
    dg.write_checks_csv(exp.output_dir / "checks.csv", reps, append=False)
    for r in reps:
        log.info(r.summary())
    return all(r.passed for r in reps)


def default_bump(T: float, x_c: float = 0.6, x_w: float = 0.2) -> BumpTestFunction:
    """Test function used by the entropy checks: centred in time on ``(0, T)``."""
    return BumpTestFunction(t_c=0.5 * T, t_w=0.5 * T, x_c=x_c, x_w=x_w)


def _entropy_report(traj: Trajectory, k: float = ENTROPY_LEVEL, tol: float = 5e-3) -> dg.CheckReport:
    from .tolerances import discretization

    rep = dg.CheckReport("entropy")
    slices = np.stack([traj.slice_at(i, 1.0) for i in range(len(traj))])
    T = traj.times[-1]
    if T > 0:
        res = entropy_residual(slices, traj.times, traj.flux, k, default_bump(T))
        rep.add(f"k={k:g}", T, 0.0, res, discretization(tol))
    return rep


def run_experiment(exp: Experiment, threads: int = 1) -> bool:
    """Run ``exp``, write its CSV and snapshot files, return ``True`` iff every
    invariant check passed."""
    exp.output_dir.mkdir(parents=True, exist_ok=True)
    if threads > 1:
        exp.config = exp.config.with_(threads=threads)
    if exp.kind == "run":
        return _run_kind(exp)
    if exp.kind == "convergence":
        return _convergence_kind(exp, threads)
    if exp.kind == "compare":
        return _compare_kind(exp)
    return _checks_kind(exp)

import csv

import numpy as np
import pytest

from lsclaw import diagnostics as dg
from lsclaw.errors import GridError, InvariantError
from lsclaw.experiment import lift_shift, random_monotone
from lsclaw.fields import LevelSetField, field_lp
from lsclaw.flux import builtin_flux
from lsclaw.reference import RiemannProblem
from lsclaw.scheme import SchemeConfig, run

BURGERS = builtin_flux("burgers", 1)


def riemann_run(x0=0.5, n_x=200, n_a=100, ul=1.0, ur=0.0, T=0.25, every=1):
    cfg = SchemeConfig(BURGERS, h=1 / n_x, T=T, n_a=n_a, n_x=n_x, n_y=n_a, diagnostics_every=every)
    U0 = RiemannProblem(ul, ur, x0).initial(cfg.xgrid.centers())
    return run(lift_shift(U0, cfg.agrid), cfg)


@pytest.fixture(scope="module")
def shock():
    return riemann_run()


@pytest.fixture(scope="module")
def shock_pair(shock):
    return shock, riemann_run(x0=0.55)


# ---------------------------------------------------------------- reports


def test_report_margins():
    rep = dg.CheckReport("demo")
    rep.add("p", 0.0, 1.0, 2.0, 0.0)
    rep.add("p", 1.0, 2.0, 1.0, 0.5)
    rep.add_equal("q", 2.0, 1.0, 1.2, 0.1)
    assert [r.margin for r in rep.rows] == pytest.approx([1.0, -1.0, -0.1])
    assert [r.passed for r in rep.rows] == [True, False, False]
    assert rep.worst_margin == pytest.approx(-1.0) and not rep.passed
    assert rep.summary().startswith("FAIL demo")


def test_checks_csv(tmp_path, shock):
    reps = [dg.check_max_principle(shock), dg.check_tv(shock)]
    dg.write_checks_csv(tmp_path / "checks.csv", reps, append=False)
    dg.write_checks_csv(tmp_path / "checks.csv", reps[:1])
    rows = list(csv.reader(open(tmp_path / "checks.csv")))
    assert tuple(rows[0]) == dg.CSV_HEADER
    assert len(rows) == 1 + 2 * len(reps[0].rows) + len(reps[1].rows)


def test_checkers_are_deterministic(shock):
    a = dg.semi_integral_residual(shock, dg.travelling_field())
    b = dg.semi_integral_residual(shock, dg.travelling_field())
    assert [r.as_csv() for r in a.rows] == [r.as_csv() for r in b.rows]


# ---------------------------------------------------------------- maximum principle


def test_max_principle_without_vertical_speed(shock):
    rep = dg.check_max_principle(shock)
    lo, hi = shock.values[0].min(), shock.values[0].max()
    assert all(r.lhs == lo for r in rep.rows if r.param == "lower")
    assert all(r.rhs == hi for r in rep.rows if r.param == "upper")
    assert rep.passed and rep.worst_margin == 0.0


def test_max_principle_constant_field():
    cfg = SchemeConfig(BURGERS, h=0.01, T=0.1, n_a=4, n_x=8)
    Y0 = LevelSetField(np.full((4, 8), 0.3), cfg.agrid, cfg.xgrid)
    traj = run(Y0, cfg)
    assert all(np.all(V == 0.3) for V in traj.values)
    assert dg.check_max_principle(traj).passed


def test_max_principle_with_unit_vertical_speed(rng):
    flux = builtin_flux("burgers", 1, q0=1.0)
    cfg = SchemeConfig(flux, h=0.01, T=0.3, n_a=10, n_x=40)
    Y0 = random_monotone(rng, 10, 40)
    traj = run(Y0, cfg)
    sup0 = Y0.values.max()
    for n, V in zip(traj.steps, traj.values):
        assert V.max() <= sup0 + n * cfg.h + 1e-12
    rep = dg.check_max_principle(traj)
    assert rep.passed


def test_max_principle_flags_violation(shock):
    bad = riemann_run(T=0.02)
    bad.values[-1] = bad.values[-1] + 1e-6
    assert not dg.check_max_principle(bad).passed


def test_monotonicity_report(shock):
    rep = dg.check_monotonicity(shock)
    assert rep.passed and len(rep.rows) == 2 * len(shock)


# ---------------------------------------------------------------- contraction and L1 chain


def test_identical_runs_contraction_margin_zero(shock):
    rep = dg.check_lp_contraction(shock, shock)
    assert rep.passed and all(r.margin == 0.0 for r in rep.rows)


def test_vertical_speed_difference_enters_margin(rng):
    Y0 = random_monotone(rng, 8, 16)
    cfg = SchemeConfig(builtin_flux("advection", 1), h=1 / 16, T=0.5, n_a=8, n_x=16, interp_mode="exact_shift")
    a = run(Y0, cfg)
    b = run(Y0, cfg.with_(flux=builtin_flux("advection", 1, q0=0.5)))
    rep = dg.check_lp_contraction(a, b)
    assert rep.passed
    for r in rep.rows:
        assert r.lhs == pytest.approx(0.5 * r.t, abs=1e-12)
        assert r.rhs == pytest.approx(0.5 * r.t, abs=1e-12)


def test_contraction_same_flux_nonincreasing(shock_pair):
    a, b = shock_pair
    rep = dg.check_lp_contraction(a, b)
    assert rep.passed
    for p in ("p=1", "p=2", "p=4"):
        lhs = [r.lhs for r in rep.rows if r.param == p]
        assert max(np.diff(lhs)) <= 1e-12


def test_contraction_grid_mismatch(shock):
    with pytest.raises(GridError):
        dg.check_lp_contraction(shock, riemann_run(n_x=100, n_a=50))


def test_chain_identical_runs(shock):
    rep = dg.check_l1_kruzhkov_chain(shock, shock)
    assert rep.passed
    assert all(r.lhs == 0.0 and r.rhs == 0.0 for r in rep.rows)


def test_chain_shifted_riemann(shock_pair):
    rep = dg.check_l1_kruzhkov_chain(*shock_pair)
    assert rep.passed, [r for r in rep.failures()]
    names = {r.param for r in rep.rows}
    assert names == {"u=kinetic", "kinetic=heaviside", "heaviside=levelset", "contraction", "levelset0=u0", "kruzhkov"}


def test_chain_constant_fields():
    cfg = SchemeConfig(BURGERS, h=0.05, T=0.2, n_a=10, n_x=20, n_y=200)
    a = run(LevelSetField(np.full((10, 20), 0.25), cfg.agrid, cfg.xgrid), cfg)
    b = run(LevelSetField(np.full((10, 20), 0.75), cfg.agrid, cfg.xgrid), cfg)
    rep = dg.check_l1_kruzhkov_chain(a, b)
    assert rep.passed
    dy = a.ygrid.dy
    for r in rep.rows:
        # level-set side is exact, u-side counts whole y-cells
        tol = 1e-12 if r.param == "contraction" else dy
        assert r.lhs == pytest.approx(0.5, abs=tol) and r.rhs == pytest.approx(0.5, abs=tol)


# ---------------------------------------------------------------- variation


def test_tv_on_shock_run(shock):
    rep = dg.check_tv(shock)
    assert rep.passed
    assert rep.rows[0].lhs == pytest.approx(2.0)


# ---------------------------------------------------------------- semi-integral and p-consistency


def test_identity_field_against_identity_data():
    cfg = SchemeConfig(BURGERS, h=0.01, T=0.1, n_a=10, n_x=20)
    V = np.repeat(cfg.agrid.centers[:, None], 20, axis=1)
    traj = run(LevelSetField(V, cfg.agrid, cfg.xgrid), cfg)
    rep = dg.semi_integral_residual(traj, dg.identity_field())
    assert all(r.lhs == 0.0 and r.rhs == 0.0 for r in rep.rows)


def test_zero_field_means_norm_nonincreasing(shock):
    rep = dg.semi_integral_residual(shock, dg.zero_field())
    assert rep.passed
    norms = [field_lp(V, 2, shock.xgrid) for V in shock.values]
    assert max(np.diff(norms)) <= 1e-12


@pytest.mark.parametrize("make", dg.STANDARD_TEST_FIELDS)
def test_semi_integral_on_shock_run(shock, make):
    assert dg.semi_integral_residual(shock, make()).passed


def test_p2_consistency_is_semi_integral(shock):
    Z = dg.travelling_field()
    a = dg.check_p_consistency(shock, Z, 2)
    b = dg.semi_integral_residual(shock, Z)
    assert [r.margin for r in a.rows] == [r.margin for r in b.rows]


def test_p1_zero_field_l1_nonincreasing(shock):
    rep = dg.check_p_consistency(shock, dg.zero_field(), 1)
    assert rep.passed
    l1 = [field_lp(V, 1, shock.xgrid) for V in shock.values]
    assert max(np.diff(l1)) <= 1e-12


@pytest.mark.parametrize("make", dg.STANDARD_TEST_FIELDS)
def test_p3_on_shock_run(shock, make):
    assert dg.check_p_consistency(shock, make(), 3).passed


def test_decreasing_test_field_rejected(shock):
    bad = dg.TestField("decreasing", lambda t, A, X: -A + 0 * X[0], lambda t, A, X: 0 * A * X[0],
                       lambda t, A, X: [0 * A * X[0]])
    with pytest.raises(InvariantError):
        dg.semi_integral_residual(shock, bad)


def test_exact_shift_advection_margins_nonnegative(rng):
    cfg = SchemeConfig(builtin_flux("advection", 1), h=2 / 32, T=1.0, n_a=8, n_x=32, interp_mode="exact_shift")
    a, b = run(random_monotone(rng, 8, 32), cfg), run(random_monotone(rng, 8, 32), cfg)
    reps = [dg.check_max_principle(a), dg.check_monotonicity(a), dg.check_lp_contraction(a, b),
            dg.check_l1_kruzhkov_chain(a, b), dg.check_tv(a)]
    reps += [dg.check_p_consistency(a, Z(), p) for Z in (dg.zero_field, dg.identity_field) for p in (2, 3)]
    for rep in reps:
        assert rep.worst_margin >= -1e-12, rep.summary()


# ---------------------------------------------------------------- streaming monitor


def test_run_monitor_matches_trajectory_checks():
    cfg = SchemeConfig(BURGERS, h=1 / 100, T=0.2, n_a=50, n_x=100, n_y=50)
    Y0 = lift_shift(RiemannProblem(1.0, 0.0).initial(cfg.xgrid.centers()), cfg.agrid)
    fields = [(dg.travelling_field(), 2), (dg.zero_field(), 3)]
    mon = dg.RunMonitor(cfg, Y0, cfg.ygrid(Y0), fields)
    traj = run(Y0, cfg, mon)
    expected = [dg.check_max_principle(traj), dg.check_monotonicity(traj), dg.check_tv(traj)]
    expected += [dg.check_p_consistency(traj, Z, p) for Z, p in fields]
    got = mon.reports()
    assert [r.name for r in got] == [r.name for r in expected]
    for g, e in zip(got, expected):
        assert [row.as_csv() for row in g.rows] == [row.as_csv() for row in e.rows]

from types import SimpleNamespace

import numpy as np
import pytest
from scipy.integrate import trapezoid

from lsclaw.errors import ConfigError, ValidityError
from lsclaw.experiment import default_bump, lift_shift
from lsclaw.flux import builtin_flux
from lsclaw.reference import (
    BumpTestFunction,
    RiemannProblem,
    entropy_residual,
    exact_advection,
    exact_burgers,
    exact_riemann_periodic,
    godunov_solve,
    godunov_step,
)
from lsclaw.scheme import SchemeConfig, run

BURGERS = builtin_flux("burgers", 1)


def cells(n):
    return (np.arange(n) + 0.5) / n


def weak_form(u_of_t, flux, phi, T, n_x=4000, n_t=801):
    """``int int u phi_t + Q(u) phi_x`` by midpoint in x and trapezoid in t."""
    x = cells(n_x)
    ts = np.linspace(0.0, T, n_t)
    per_t = []
    for t in ts:
        u = u_of_t(t, x)
        per_t.append(np.mean(u * phi.dt(t, x) + flux.flux(u)[0] * phi.dx(t, x)))
    return trapezoid(per_t, ts)


# ---------------------------------------------------------------- exact solutions


def test_constant_state():
    prob = RiemannProblem(0.5, 0.5, flux=BURGERS)
    assert np.all(exact_burgers(prob, 0.7, np.linspace(0, 1, 11)) == 0.5)


def test_shock_speed_half():
    prob = RiemannProblem(1.0, 0.0, 0.5, BURGERS)
    u = exact_burgers(prob, 0.4, np.array([0.699, 0.701]))
    np.testing.assert_array_equal(u, [1.0, 0.0])


def test_fan_value():
    prob = RiemannProblem(0.0, 1.0, 0.25, BURGERS)
    assert exact_burgers(prob, 1.0, np.array(0.75)) == pytest.approx(0.5)


def test_periodic_solution_superposes_both_waves():
    prob = RiemannProblem(1.0, 0.0, 0.5, BURGERS)
    u = exact_riemann_periodic(prob, 0.4, np.array([0.1, 0.3, 0.45, 0.69, 0.71, 0.9]))
    # wrap point opens a fan 0 -> 1 on [0, 0.4]; shock sits at 0.7
    np.testing.assert_allclose(u, [0.25, 0.75, 1.0, 1.0, 0.0, 0.0])
    with pytest.raises(ValidityError):
        exact_riemann_periodic(prob, 1.0, cells(10))


def test_riemann_oracle_rejects_other_flux():
    with pytest.raises(ConfigError):
        exact_burgers(RiemannProblem(1.0, 0.0, flux=builtin_flux("buckley")), 0.1, cells(4))
    with pytest.raises(ConfigError):
        RiemannProblem(1.5, 0.0)


def test_exact_advection_wraps():
    u0 = lambda x: (x < 0.5).astype(float)
    np.testing.assert_array_equal(exact_advection(u0, 1.0, 0.75, np.array([0.2, 0.3, 0.8])), [1.0, 0.0, 1.0])


@pytest.mark.parametrize("ul, ur", [(1.0, 0.0), (0.0, 1.0), (0.8, 0.3)])
def test_exact_solution_satisfies_weak_form(ul, ur):
    rng = np.random.default_rng(7)
    prob = RiemannProblem(ul, ur, 0.5, BURGERS)
    T = 0.8
    for _ in range(20 if (ul, ur) == (1.0, 0.0) else 5):
        t_c = rng.uniform(0.25, 0.55)
        phi = BumpTestFunction(t_c, rng.uniform(0.05, min(t_c, T - t_c)), rng.uniform(0, 1), rng.uniform(0.05, 0.3))
        res = weak_form(lambda t, x: exact_riemann_periodic(prob, t, x), BURGERS, phi, T)
        assert abs(res) < 1e-3


def test_weak_form_detects_wrong_shock_speed():
    phi = BumpTestFunction(0.4, 0.3, 0.7, 0.2)
    wrong = lambda t, x: np.where((x > 0.5 - 1e-9) & (x < 0.5 + 0.3 * t), 1.0, 0.0)
    assert abs(weak_form(wrong, BURGERS, phi, 0.8)) > 0.01


# ---------------------------------------------------------------- Godunov


def test_godunov_constant_state_unchanged():
    u = np.full(50, 0.3)
    np.testing.assert_array_equal(godunov_step(u, BURGERS, 0.01, 0.02), u)


def test_godunov_conserves_mass(rng):
    u = rng.uniform(size=200)
    for name in ("burgers", "buckley", "advection(-1)"):
        f = builtin_flux(name, 1)
        v = u.copy()
        for _ in range(20):
            w = godunov_step(v, f, 0.4 / 200 / f.bounds[1], 1 / 200)
            assert abs(w.sum() / 200 - v.sum() / 200) <= 1e-13
            v = w


def test_godunov_cfl_violation():
    with pytest.raises(ValueError, match="CFL"):
        godunov_step(np.zeros(10), BURGERS, 0.2, 0.1)


def test_godunov_shock_position():
    n_x = 400
    prob = RiemannProblem(1.0, 0.0, 0.5, BURGERS)
    u = godunov_solve(prob.initial(cells(n_x)), BURGERS, 0.5)
    x = cells(n_x)
    window = (x > 0.55) & (x < 0.95)
    k = np.flatnonzero(window & (u < 0.5))[0]
    # linear interpolation of the 1/2 crossing between cells k-1 and k
    pos = x[k - 1] + (u[k - 1] - 0.5) / (u[k - 1] - u[k]) / n_x
    assert abs(pos - 0.75) <= 2.0 / n_x


def test_godunov_preserves_order(rng):
    u = rng.uniform(size=100)
    v = np.minimum(u + rng.uniform(0, 0.3, 100), 1.0)
    f = builtin_flux("buckley", 1)
    for _ in range(100):
        u, v = godunov_step(u, f, 0.4 / 100 / 2, 0.01), godunov_step(v, f, 0.4 / 100 / 2, 0.01)
        assert np.all(u <= v + 1e-15)


def test_godunov_converges_on_shocks():
    prob = RiemannProblem(1.0, 0.0, 0.5, BURGERS)
    errs = []
    for n_x in (100, 200, 400, 800):
        x = cells(n_x)
        errs.append(np.mean(np.abs(godunov_solve(prob.initial(x), BURGERS, 0.25) - exact_riemann_periodic(prob, 0.25, x))))
    for e0, e1 in zip(errs, errs[1:]):
        assert e0 / e1 >= 1.3


def test_godunov_nonconvex_rarefaction_is_monotone():
    f = builtin_flux("buckley", 1)
    u = godunov_solve(RiemannProblem(0.0, 1.0, 0.5).initial(cells(200)), f, 0.1)
    assert np.all(np.diff(u[80:150]) >= -1e-14)


# ---------------------------------------------------------------- entropy residual


def test_entropy_residual_vanishes_on_constants():
    times = np.linspace(0, 1, 101)
    phi = BumpTestFunction(0.5, 0.4, 0.3, 0.2)
    assert entropy_residual(np.full((101, 200), 0.5), times, BURGERS, 0.5, phi) == 0.0
    # u != k: only quadrature of phi_t, phi_x remains, spectrally small on this grid
    assert abs(entropy_residual(np.full((101, 200), 0.8), times, BURGERS, 0.5, phi)) < 1e-15


def test_expansion_shock_has_negative_residual():
    n_x, times = 400, np.linspace(0, 1, 201)
    u = np.tile((cells(n_x) >= 0.5).astype(float), (times.size, 1))
    phi = BumpTestFunction(0.5, 0.5, 0.5, 0.2)
    res = entropy_residual(u, times, BURGERS, 0.5, phi)
    analytic = -0.25 * trapezoid(phi.value(times, 0.5), times)
    assert res < -0.01
    assert res == pytest.approx(analytic, abs=1e-3)


def test_entropy_residual_rejects_negative_phi():
    neg = SimpleNamespace(value=lambda t, x: -np.ones_like(t), dt=None, dx=None)
    with pytest.raises(ValueError):
        entropy_residual(np.zeros((3, 4)), np.linspace(0, 1, 3), BURGERS, 0.5, neg)


def test_tc_shock_residual():
    n_x = 400
    cfg = SchemeConfig(BURGERS, h=1 / n_x, T=0.25, n_a=200, n_x=n_x, n_y=200)
    prob = RiemannProblem(1.0, 0.0, 0.5, BURGERS)
    traj = run(lift_shift(prob.initial(cells(n_x)), cfg.agrid), cfg)
    u = np.stack([traj.slice_at(k) for k in range(len(traj))])
    assert entropy_residual(u, traj.times, BURGERS, 0.5, default_bump(0.25)) >= -5e-3


def test_bump_peak_and_support():
    phi = BumpTestFunction(0.5, 0.25, 0.9, 0.2)
    assert phi.value(0.5, 0.9) == 1.0
    assert phi.value(0.5, 0.05) > 0  # periodic support crosses x = 0
    assert phi.value(0.8, 0.9) == 0.0 and phi.value(0.5, 0.5) == 0.0
    eps = 1e-6
    assert phi.dt(0.6, 0.95) == pytest.approx((phi.value(0.6 + eps, 0.95) - phi.value(0.6 - eps, 0.95)) / (2 * eps), rel=1e-6)
    assert phi.dx(0.6, 0.95) == pytest.approx((phi.value(0.6, 0.95 + eps) - phi.value(0.6, 0.95 - eps)) / (2 * eps), rel=1e-6)

import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings, strategies as st

from nlwave import (BlowupSuspected, Grid, NonContraction, NonlinearityDescriptor, NonlocalProblem,
                    TimeMeasure, WindowExceeded, apply_G, extend_solution, fbar_estimate, power_law,
                    scalar, select_window, solve_linear, solve_nonlinear)
from nlwave.linear import SolutionTimeline
from nlwave.picard import data_size, timeline_y_norm, window_bounds

from conftest import plane_wave_problem


def linear_F(c):
    return NonlinearityDescriptor(lambda u: c * u, derivative_bound=lambda r: c, kind="linear")


def constant_problem(nl, amp=1.0, T=1.0, K=64, alpha=None, beta=None):
    g = Grid(1, 8, 2 * np.pi)
    alpha = alpha or TimeMeasure.zero(T)
    beta = beta or TimeMeasure.zero(T)
    return NonlocalProblem(g, scalar(1.0), alpha, beta, amp * np.ones(8), None, K, horizon=T,
                           nonlinearity=nl, periodic_data=True)


def test_fbar_examples():
    assert fbar_estimate(None, 3.0) == 0
    assert fbar_estimate(power_law(0.0, 3), 3.0) == 0
    assert fbar_estimate(power_law(1.0, 3), 2.0) == pytest.approx(12.0)
    assert fbar_estimate(power_law(1.0, 3, order=2), 2.0) == pytest.approx(12.0)
    with pytest.raises(ValueError):
        fbar_estimate(power_law(1.0, 3), -1.0)


@pytest.mark.parametrize("lam,p,r", [(1.0, 3, 2.0), (0.01, 3, 1.5), (2.0, 5, 0.7)])
def test_fbar_sampling_agrees_with_closed_form(lam, p, r):
    F = power_law(lam, p)
    closed = fbar_estimate(F, r)
    sampled = fbar_estimate(F, r, N=1, method="sample")
    assert abs(sampled - closed) <= 0.1 * closed


def test_power_law_normalization_and_modulus():
    F = power_law(2.0, 3)
    u = np.array([1 + 1j, -2.0])
    np.testing.assert_allclose(F(u), 2 * np.abs(u) ** 2 * u)
    shifted = NonlinearityDescriptor(lambda u: u + 5.0)
    np.testing.assert_allclose(shifted(np.zeros(2)), 0)
    with pytest.raises(ValueError):
        power_law(1.0, 1.0)


def test_select_window_examples():
    inv, con = window_bounds(1.0, 1.0)
    assert inv == 0.1
    assert con == 0.1
    assert select_window(1.0, 0.0, T_user=0.3) == 0.3
    assert select_window(1.0, 0.0) == 0.5
    assert select_window(0.5, 0.0) == min(1 / 1.5, 0.5)
    assert select_window(3.0, 0.0) == 0.25


@settings(max_examples=80, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50), st.floats(0, 10), st.floats(0, 10))
def test_select_window_nonincreasing(M, f, dM, df):
    base = select_window(M, f)
    assert select_window(M + dM, f) <= base
    assert select_window(M, f + df) <= base


def test_apply_G_with_zero_map_is_fixed_in_one_step(line_grid):
    prob = plane_wave_problem(line_grid, K=64, nonlinearity=power_law(0.0, 3))
    lin = solve_linear(prob)
    once = apply_G(prob, SolutionTimeline.zeros_like(prob))
    twice = apply_G(prob, once)
    np.testing.assert_array_equal(once.u_hat, lin.u_hat)
    np.testing.assert_array_equal(twice.u_hat, once.u_hat)


def test_zero_map_converges_at_once(line_grid):
    prob = plane_wave_problem(line_grid, K=64, nonlinearity=power_law(0.0, 3))
    sol, rep = solve_nonlinear(prob)
    assert rep.iterations == 1 and rep.status == "converged"
    np.testing.assert_array_equal(sol.u_hat, solve_linear(prob).u_hat)


def cubic_ode(lam, a, T):
    rhs = lambda t, y: [y[1], -y[0] - lam * abs(y[0]) ** 2 * y[0]]
    return scipy.integrate.solve_ivp(rhs, (0, T), [a, 0.0], rtol=1e-12, atol=1e-14, dense_output=True)


def test_single_mode_cubic_against_ode_and_first_order_series():
    a, T = 0.5, 1.0
    out = {}
    for lam in (1e-3, 2e-3):
        prob = constant_problem(power_law(lam, 3), amp=a, T=T, K=256)
        sol, rep = solve_nonlinear(prob)
        assert rep.status == "converged"
        u = sol.u[:, 0, 0].real
        ref = cubic_ode(lam, a, T).sol(prob.times)[0]
        assert np.max(np.abs(u - ref)) <= 1e-8
        out[lam] = u - a * np.cos(prob.times)
    # first-order term: -lam int_0^t sin(t - tau) a^3 cos^3(tau) dtau
    t = 1.0
    first = -scipy.integrate.quad(lambda s: np.sin(t - s) * (a * np.cos(s)) ** 3, 0, t)[0]
    for lam, dev in out.items():
        assert dev[-1] == pytest.approx(lam * first, rel=10 * lam)
    assert first < 0  # the focusing sign reduces the displacement


def test_perturbation_bound_on_one_step():
    lam, a, T = 1e-3, 0.5, 1.0
    prob = constant_problem(power_law(lam, 3), amp=a, T=T, K=128)
    lin = solve_linear(prob)
    step = apply_G(prob, lin)
    gap = np.max(np.abs(step.u - lin.u))
    assert gap <= lam * T * np.max(np.abs(lin.u)) ** 3 * 1.01


def test_apply_G_of_zero_timeline_is_linear_solve():
    prob = constant_problem(power_law(0.1, 3), amp=0.3)
    np.testing.assert_array_equal(apply_G(prob, SolutionTimeline.zeros_like(prob)).u_hat,
                                  solve_linear(prob).u_hat)


def test_window_exceeded_with_active_conditions():
    T = 1.0
    alpha = TimeMeasure.from_atoms(T, [(0.5, 0.05)])
    prob = constant_problem(power_law(1.0, 3), amp=2.0, alpha=alpha)
    with pytest.raises(WindowExceeded) as info:
        solve_nonlinear(prob)
    assert info.value.T_window < T
    sol, rep = solve_nonlinear(prob.replace(nonlinearity=power_law(0.01, 3)), enforce_window=False)
    assert rep.advisory is not None


def test_zero_measure_problem_marches_over_windows():
    lam, a, T = 0.5, 1.0, 1.0
    prob = constant_problem(power_law(lam, 3), amp=a, T=T, K=256)
    sol, rep = solve_nonlinear(prob)
    assert rep.window_binding and len(rep.windows) > 1
    assert sol.times.size == 257
    ref = cubic_ode(lam, a, T).sol(prob.times)[0]
    assert np.max(np.abs(sol.u[:, 0, 0].real - ref)) <= 1e-5


def test_window_halving_on_non_contraction():
    prob = constant_problem(linear_F(3000.0), K=512)
    with pytest.raises(NonContraction):
        solve_nonlinear(prob, C0=1e-8, C1=1e-8, max_halvings=0)
    sol, rep = solve_nonlinear(prob, C0=1e-8, C1=1e-8)
    assert rep.T_window < 0.12
    exact = np.cos(np.sqrt(3001.0) * prob.times)
    assert np.max(np.abs(sol.u[:, 0, 0].real - exact)) <= 0.05


def test_non_contraction_reports_ratios():
    alpha = TimeMeasure.from_atoms(1.0, [(0.5, 0.05)])
    prob = constant_problem(linear_F(100.0), alpha=alpha)
    with pytest.raises(NonContraction) as info:
        solve_nonlinear(prob, enforce_window=False)
    assert len(info.value.rhos) >= 5
    assert all(r >= 1 for r in info.value.rhos[-5:])


def test_blowup_detected():
    alpha = TimeMeasure.from_atoms(1.0, [(0.5, 0.05)])
    prob = constant_problem(power_law(50.0, 3), alpha=alpha)
    with pytest.raises(BlowupSuspected):
        solve_nonlinear(prob, enforce_window=False)


def cubic_nonlocal_problem(lam=0.01, K=128):
    g = Grid(1, 32, 16.0)
    x = g.coordinates()[0]
    T = 0.25
    phi = 0.1 * np.exp(-((x - 8.0) ** 2))
    alpha = TimeMeasure.from_atoms(T, [(0.125, 0.05)])
    beta = TimeMeasure.from_atoms(T, [(0.25, 0.05)])
    return NonlocalProblem(g, scalar(1.0), alpha, beta, phi, None, K, horizon=T,
                           nonlinearity=power_law(lam, 3))


def test_uniqueness_probe_from_two_starts():
    prob = cubic_nonlocal_problem(lam=0.05)
    a, rep_a = solve_nonlinear(prob, initial="linear")
    b, rep_b = solve_nonlinear(prob, initial="zero")
    tol = 1e-10 + 1e-8 * timeline_y_norm(prob, a.u, a.u_hat)
    assert timeline_y_norm(prob, a.u - b.u, a.u_hat - b.u_hat) <= 10 * tol


def test_fixed_point_residual():
    prob = cubic_nonlocal_problem(lam=0.05)
    sol, _ = solve_nonlinear(prob)
    again = apply_G(prob, sol)
    tol = 1e-10 + 1e-8 * timeline_y_norm(prob, sol.u, sol.u_hat)
    assert timeline_y_norm(prob, again.u - sol.u, again.u_hat - sol.u_hat) <= 10 * tol


def test_data_size_variants():
    prob = constant_problem(None, amp=1.0)
    prob = prob.replace(family=scalar(4.0), psi=np.ones(8))
    M, M_half = data_size(prob)
    # constant fields: Sobolev norm equals |c| sqrt(L), sup equals |c|
    unit = math.sqrt(2 * np.pi) + 1
    assert M == pytest.approx(4 * unit + 4 * unit)
    assert M_half == pytest.approx(4 * unit + 2 * unit)


def test_extend_zero_is_identity(line_grid):
    prob = plane_wave_problem(line_grid, K=32)
    sol = solve_linear(prob)
    assert extend_solution(prob, sol, 0.0) is sol
    with pytest.raises(ValueError):
        extend_solution(prob, sol, 0.3 * prob.dt)


def test_plane_wave_extension_stays_exact(line_grid):
    prob = plane_wave_problem(line_grid, K=128)
    ext = extend_solution(prob, solve_linear(prob), 1.0)
    x = line_grid.coordinates()[0]
    exact = np.cos(2 * ext.times)[:, None] * np.exp(1j * x)[None, :]
    assert ext.times[-1] == pytest.approx(2.0)
    assert np.max(np.abs(ext.u[:, :, 0] - exact)) <= 1e-10


def test_gluing_matches_single_shot(line_grid):
    T, K = 1.0, 128
    alpha = TimeMeasure.from_atoms(T, [(0.5, 0.2)])
    beta = TimeMeasure.from_atoms(T, [(1.0, -0.1)])
    x = line_grid.coordinates()[0]
    base = NonlocalProblem(line_grid, scalar(2.0), alpha, beta, np.cos(x) + 0.5 * np.sin(3 * x),
                           0.2 * np.cos(2 * x), K, horizon=T, periodic_data=True)
    glued = extend_solution(base, solve_linear(base), T)
    single = solve_linear(base.replace(K=2 * K, horizon=2 * T))
    assert np.max(np.abs(glued.u - single.u)) <= 1e-8
    assert np.max(np.abs(glued.ut - single.ut)) <= 1e-8

import numpy as np
import pytest
import scipy.optimize

from nlwave import (Grid, NonlocalProblem, SingularModeSystem, TimeMeasure, assemble_mode_system,
                    check_invertibility, diagonal, evaluate_mild, matrix, scalar, solve_linear,
                    solve_mode)
from nlwave.diagnostics import condition_residuals, pde_residual_timeline
from nlwave.linear import ModeSystem
from nlwave.operators import cos_kernel, sin_kernel
from nlwave.scenario import manufactured_data

from conftest import plane_wave_problem, random_diagonalizable


def mode_of(grid, k):
    return int(np.argmin(np.abs(grid.wavenumbers - k)))


def small_grid():
    return Grid(1, 8, 2 * np.pi)


def test_assemble_decoupled_when_measures_vanish(rng):
    g = small_grid()
    phi = rng.standard_normal((8, 1))
    prob = NonlocalProblem(g, scalar(1.0), TimeMeasure.zero(1), TimeMeasure.zero(1), phi, None, 16,
                           periodic_data=True)
    sys = assemble_mode_system(prob, 2)
    assert sys.a11 == pytest.approx(1) and sys.a22 == pytest.approx(1)
    assert sys.a12 == 0 and sys.a21 == 0
    np.testing.assert_allclose(sys.f1, prob.phi_hat[2])
    np.testing.assert_allclose(sys.f2, 0)


def test_assemble_atom_example():
    g = small_grid()
    alpha = TimeMeasure.from_atoms(np.pi, [(np.pi, 1.0)])
    prob = NonlocalProblem(g, scalar(0.0), alpha, TimeMeasure.zero(np.pi), np.zeros(8), None, 16,
                           periodic_data=True)
    sys = assemble_mode_system(prob, mode_of(g, 1))
    assert sys.a11[0] == pytest.approx(2.0)
    assert sys.a12[0] == pytest.approx(0.0, abs=1e-15)
    assert sys.a21[0] == 0
    assert sys.a22[0] == 1


def test_assemble_density_example():
    g = small_grid()
    alpha = TimeMeasure.from_density(np.pi, np.ones(2001))
    prob = NonlocalProblem(g, scalar(0.0), alpha, TimeMeasure.zero(np.pi), np.zeros(8), None, 2000,
                           periodic_data=True)
    sys = assemble_mode_system(prob, mode_of(g, 1))
    assert sys.a11[0] == pytest.approx(1.0, abs=1e-6)
    assert sys.a12[0] == pytest.approx(-2.0, abs=1e-6)


def test_velocity_block_uses_cosine():
    # a22 = 1 - int beta c, not 1 - int beta s
    g = small_grid()
    beta = TimeMeasure.from_atoms(1.0, [(0.7, 0.4)])
    prob = NonlocalProblem(g, scalar(3.0), TimeMeasure.zero(1.0), beta, np.zeros(8), None, 32,
                           periodic_data=True)
    sys = assemble_mode_system(prob, mode_of(g, 1))
    assert sys.a22[0] == pytest.approx(1 - 0.4 * np.cos(2 * 0.7))
    assert sys.a21[0] == pytest.approx(0.4 * 4 * np.sin(2 * 0.7) / 2)


def test_solve_mode_examples():
    fam = scalar(1.0)
    one = np.ones(1)
    ident = ModeSystem(0, 0.0, one, 0 * one, 0 * one, one, 3 * one, 4 * one, fam)
    u0, u1 = solve_mode(ident)
    assert (u0[0], u1[0]) == (3, 4)
    sys = ModeSystem(0, 0.0, 2 * one, 0 * one, 0 * one, one, 4 * one, 5 * one, fam)
    u0, u1 = solve_mode(sys)
    assert (u0[0], u1[0]) == (2, 5)


def test_solve_mode_matches_dense_oracle(rng):
    N = 3
    fam = matrix(random_diagonalizable(rng, N))
    z = lambda: rng.standard_normal(N) + 1j * rng.standard_normal(N)
    a11, a12, a21, a22 = 1 + 0.3 * z(), 0.3 * z(), 0.3 * z(), 1 + 0.3 * z()
    f1, f2 = z(), z()
    sys = ModeSystem(0, 0.0, a11, a12, a21, a22, f1, f2, fam)
    u0, u1 = solve_mode(sys)
    E = lambda d: fam.V @ np.diag(d) @ fam.Vinv
    big = np.block([[E(a11), E(a12)], [E(a21), E(a22)]])
    rhs = np.concatenate([fam.V @ f1, fam.V @ f2])
    ref = np.linalg.solve(big, rhs)
    got = np.concatenate([u0, u1])
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_singular_mode_found_by_root_scan():
    g = small_grid()
    lam = np.pi / 3
    k1 = mode_of(g, 1)

    def det(w):
        alpha = TimeMeasure.from_atoms(1.5, [(lam, w)])
        prob = NonlocalProblem(g, scalar(0.0), alpha, TimeMeasure.zero(1.5), np.zeros(8), None, 8,
                               periodic_data=True)
        return assemble_mode_system(prob, k1).determinant[0].real

    w_star = scipy.optimize.brentq(det, 1.0, 3.0, xtol=1e-15)
    assert w_star == pytest.approx(2.0, abs=1e-14)
    alpha = TimeMeasure.from_atoms(1.5, [(lam, w_star)])
    x = g.coordinates()[0]
    prob = NonlocalProblem(g, scalar(0.0), alpha, TimeMeasure.zero(1.5), np.cos(x), None, 8,
                           periodic_data=True)
    assert prob.margin() < 0
    with pytest.raises(SingularModeSystem) as info:
        solve_linear(prob)
    assert k1 in [m for m, _, _ in info.value.offenders]


def test_evaluate_mild_examples():
    g = small_grid()
    prob = NonlocalProblem(g, scalar(3.0), TimeMeasure.zero(2), TimeMeasure.zero(2), np.zeros(8), None, 64,
                           periodic_data=True)
    k1 = mode_of(g, 1)
    u, ut = evaluate_mild(prob, k1, np.array([0.7]), np.array([-0.2]), 0.0)
    assert (u[0], ut[0]) == (0.7, -0.2)
    t = prob.times[17]
    u, ut = evaluate_mild(prob, k1, np.ones(1), np.zeros(1), t)
    assert u[0] == pytest.approx(np.cos(2 * t))
    assert ut[0] == pytest.approx(-2 * np.sin(2 * t))


@pytest.mark.parametrize("K", [128, 256])
def test_evaluate_mild_constant_forcing(K):
    g = small_grid()
    T = 2.0
    ghat = np.zeros((K + 1, 8, 1), complex)
    k0 = mode_of(g, 0)
    ghat[:, k0, 0] = 1.5
    prob = NonlocalProblem(g, scalar(1.0), TimeMeasure.zero(T), TimeMeasure.zero(T), np.zeros(8), None, K,
                           forcing_hat=ghat, periodic_data=True)
    for t in (prob.times[K // 2], prob.times[-1], 0.77):
        u, ut = evaluate_mild(prob, k0, np.zeros(1), np.zeros(1), t)
        assert u[0] == pytest.approx((1 - np.cos(t)) * 1.5, abs=5 * (T / K) ** 2)
        assert ut[0] == pytest.approx(np.sin(t) * 1.5, abs=5 * (T / K) ** 2)


def test_plane_wave_exact(line_grid):
    prob = plane_wave_problem(line_grid)
    sol = solve_linear(prob)
    x = line_grid.coordinates()[0]
    exact = np.cos(2 * prob.times)[:, None] * np.exp(1j * x)[None, :]
    assert np.max(np.abs(sol.u[:, :, 0] - exact)) <= 1e-10


def test_manufactured_nonlocal_reproduction(line_grid):
    T = 1.0
    alpha = TimeMeasure.from_atoms(T, [(0.5, 0.3)])
    beta = TimeMeasure.from_atoms(T, [(0.25, -0.2), (1.0, 0.1)])
    fam = scalar(3.0)
    phi, psi, exact = manufactured_data(line_grid, fam, alpha, beta, [1], [1.0])
    prob = NonlocalProblem(line_grid, fam, alpha, beta, phi, psi, 200, horizon=T, periodic_data=True)
    sol = solve_linear(prob)
    u, ut = exact(prob.times)
    assert np.max(np.abs(sol.u - u)) <= 1e-10
    assert np.max(np.abs(sol.ut - ut)) <= 1e-10
    r0, r1 = condition_residuals(prob, sol)
    assert r0 <= 1e-10 and r1 <= 1e-10


def test_zero_measure_reduces_to_cauchy(rng, line_grid):
    fam = diagonal([1.0, 2.0])
    phi = rng.standard_normal((64, 2))
    psi = rng.standard_normal((64, 2))
    prob = NonlocalProblem(line_grid, fam, TimeMeasure.zero(1), TimeMeasure.zero(1), phi, psi, 32,
                           periodic_data=True)
    sol = solve_linear(prob)
    np.testing.assert_array_equal(sol.u0, prob.phi_hat)
    np.testing.assert_array_equal(sol.u1, prob.psi_hat)
    mu2 = fam.eigenvalues[None, :] + line_grid.xi2[:, None]
    t = prob.times[5]
    ref = cos_kernel(t, mu2) * prob.phi_hat + sin_kernel(t, mu2) * prob.psi_hat
    np.testing.assert_allclose(sol.u_hat[5], ref, atol=1e-13)


def random_problem(rng, grid, K=32, with_forcing=True, scale=1.0):
    T = 1.0
    fam = matrix(np.array([[2.0, 0.5], [0.3, 1.0]]))
    alpha = TimeMeasure(T, atoms=((0.4, 0.1 + 0.05j),), density=0.1 * np.cos(np.linspace(0, 3, 17)))
    beta = TimeMeasure.from_atoms(T, [(0.75, -0.15)])
    P = grid.size
    phi = scale * (rng.standard_normal((P, 2)) + 1j * rng.standard_normal((P, 2)))
    psi = scale * rng.standard_normal((P, 2))
    forcing = rng.standard_normal((K + 1, P, 2)) if with_forcing else None
    return NonlocalProblem(grid, fam, alpha, beta, phi, psi, K, horizon=T, forcing=forcing, periodic_data=True)


def test_linearity(rng):
    g = Grid(1, 16, 5.0)
    p1, p2 = random_problem(rng, g), random_problem(rng, g)
    a, b = 0.7 - 0.2j, -1.3
    p3 = p1.replace(phi=a * p1.phi + b * p2.phi, psi=a * p1.psi + b * p2.psi,
                    forcing=a * p1.forcing + b * p2.forcing)
    s1, s2, s3 = solve_linear(p1), solve_linear(p2), solve_linear(p3)
    combo = a * s1.u + b * s2.u
    assert np.max(np.abs(s3.u - combo)) <= 1e-10 * max(1.0, np.max(np.abs(combo)))


def test_threads_give_identical_results(rng):
    g = Grid(2, 8, 4.0)
    prob = random_problem(rng, g, K=16)
    a, b = solve_linear(prob, threads=1), solve_linear(prob, threads=4)
    np.testing.assert_array_equal(a.u_hat, b.u_hat)
    np.testing.assert_array_equal(a.ut_hat, b.ut_hat)


def test_pde_residual_small_for_unforced_atomic(line_grid):
    T = 1.0
    alpha = TimeMeasure.from_atoms(T, [(0.5, 0.3)])
    prob = plane_wave_problem(line_grid, alpha=alpha, T=T)
    sol = solve_linear(prob)
    res = pde_residual_timeline(prob, sol)
    assert np.nanmax(res) <= 1e-8


def test_forced_condition_residual_with_atoms(rng):
    g = Grid(1, 16, 2 * np.pi)
    x = g.coordinates()[0]
    errs = []
    for K in (32, 64, 128):
        times = np.linspace(0, 1, K + 1)
        f = np.cos(3 * times)[:, None, None] * np.sin(x)[None, :, None]
        alpha = TimeMeasure.from_atoms(1, [(0.3, 0.2)])
        beta = TimeMeasure.from_atoms(1, [(0.6, 0.1)])
        prob = NonlocalProblem(g, scalar(1.0), alpha, beta, np.cos(x), np.sin(2 * x), K, horizon=1.0,
                               forcing=f, periodic_data=True)
        errs.append(max(condition_residuals(prob, solve_linear(prob))))
    assert max(errs) <= 1e-10


def test_invertibility_report():
    g = small_grid()
    prob = NonlocalProblem(g, scalar(1.0), TimeMeasure.zero(1), TimeMeasure.zero(1), np.zeros(8), None, 8,
                           periodic_data=True)
    rep = check_invertibility(prob)
    assert rep["invertibility_margin"] == 1.0
    assert rep["inverse_bound"] == 1.0
    assert rep["min_determinant"] == pytest.approx(1.0)
    alpha = TimeMeasure.from_atoms(1, [(0.5, 0.1)])
    beta = TimeMeasure.from_atoms(1, [(0.5, 0.2)])
    rep = check_invertibility(prob.replace(alpha=alpha, beta=beta))
    assert rep["invertibility_margin"] == pytest.approx(0.72)
    assert rep["inverse_bound"] == pytest.approx(1 / 0.72)
    assert rep["determinant_vs_operator_gap"] >= 0

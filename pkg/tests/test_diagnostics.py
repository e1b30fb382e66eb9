import numpy as np
import pytest

from nlwave import (Grid, NonlocalProblem, TimeMeasure, build_wentzell, diagonal, matrix, scalar,
                    rank_one, solve_linear)
from nlwave.diagnostics import (estimate_monitor, identity_passes, identity_suite, oracle_suite,
                                residual_suite)

from conftest import plane_wave_problem, random_diagonalizable

XI2 = [0.0, 1.0, 10.0]
TS = [0.0, 0.1, 1.0, np.pi]


def test_identity_scalar_pythagorean_exact():
    res = identity_suite(scalar(1.0), [0.0], [1.0])
    assert res["pythagorean"] <= 1e-14
    assert res["sine_derivative"] <= 1e-7
    assert res["cosine_at_zero"] == 0 and res["sine_at_zero"] == 0


@pytest.mark.parametrize("fam", [scalar(0.0), scalar(3.0), diagonal([0.0, 1.0, 2.5, 7.0])],
                         ids=["scalar0", "scalar3", "diag4"])
def test_identity_families_pass(fam):
    res = identity_suite(fam, XI2, TS)
    assert identity_passes(res)
    assert res["growth_ratio"] <= 1.0 + 1e-12


def test_identity_random_matrix(rng):
    res = identity_suite(matrix(random_diagonalizable(rng, 4)), XI2, TS)
    assert identity_passes(res)


def test_identity_wentzell_negative_spectrum():
    M = 32
    y = np.linspace(0, 1, M + 1)
    fam = build_wentzell(1 + 0.5 * y, np.cos(y), M)
    res = identity_suite(fam, XI2, TS)
    for key in ("cosine_at_zero", "sine_at_zero", "pythagorean", "sine_derivative", "cosine_second_derivative"):
        assert res[key] <= 1e-8
    assert res["max_growth_rate"] > 0
    assert res["growth_ratio"] is None


def test_zero_data_has_zero_residuals(line_grid):
    z = TimeMeasure.from_atoms(1.0, [(0.5, 0.1)])
    prob = NonlocalProblem(line_grid, scalar(2.0), z, z, np.zeros(64), None, 32, horizon=1.0)
    sol = solve_linear(prob)
    res = residual_suite(prob, sol)
    assert res["pde_residual"] == 0
    assert res["condition_residual_displacement"] == 0
    assert res["condition_residual_velocity"] == 0
    mon = estimate_monitor(prob, sol)
    assert all(v is None for v in mon.values())


def test_plane_wave_residuals_and_monitors(line_grid):
    prob = plane_wave_problem(line_grid)
    sol = solve_linear(prob)
    res = residual_suite(prob, sol)
    assert res["pde_residual"] <= 1e-8
    mon = estimate_monitor(prob, sol)
    for key in ("sup_g_A_psi", "sup_laplacian_g_half_psi", "sobolev_g_A_psi", "sobolev_laplacian_g_A_psi"):
        assert np.isfinite(mon[key]) and mon[key] > 0


def test_rank_one_sequence_monitor_finite():
    Nn = 8
    g = 0.25 * 4.0 ** -np.arange(Nn)
    fam = rank_one(g, s=1.0, q=2.0, sigma=1.0)
    grid = Grid(1, 32, 2 * np.pi)
    x = grid.coordinates()[0]
    phi = np.exp(np.cos(x))[:, None] * np.linspace(1, 0.2, Nn)[None, :]
    prob = NonlocalProblem(grid, fam, TimeMeasure.from_atoms(1, [(0.5, 0.1)]), TimeMeasure.zero(1),
                           phi, None, 64, horizon=1.0, periodic_data=True)
    mon = estimate_monitor(prob, solve_linear(prob))
    assert np.isfinite(mon["sequence_g"]) and np.isfinite(mon["sequence_laplacian_g"])


def test_wentzell_residual_diagnostics():
    M = 8
    fam = build_wentzell(np.ones(M + 1), np.zeros(M + 1), M)
    grid = Grid(1, 16, 2 * np.pi)
    x = grid.coordinates()[0]
    phi = np.cos(x)[:, None] * np.ones(M + 1)[None, :]
    prob = NonlocalProblem(grid, fam, TimeMeasure.zero(0.1), TimeMeasure.zero(0.1), phi, None, 32,
                           periodic_data=True)
    res = residual_suite(prob, solve_linear(prob))
    assert res["wentzell_integrability"] == 1.0
    assert res["wentzell_boundary_stencil_defect"] >= 0


def test_oracle_suite_on_unforced_problem(line_grid):
    alpha = TimeMeasure.from_atoms(1.0, [(0.5, 0.3)])
    prob = plane_wave_problem(line_grid, alpha=alpha, K=128)
    rep = oracle_suite(prob, solve_linear(prob), fine=16, max_modes=8)
    assert rep["modes_checked"] == 8
    assert not rep["forced"]
    assert rep["max_relative_u0"] <= 1e-6 and rep["max_relative_u1"] <= 1e-6

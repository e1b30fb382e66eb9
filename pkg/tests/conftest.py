import numpy as np
import pytest

from nlwave import Grid, NonlocalProblem, TimeMeasure, scalar


def random_diagonalizable(rng, n, spread=(0.5, 4.0)):
    """Real-spectrum diagonalizable matrix with a modest eigenvector condition number."""
    B = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    lam = rng.uniform(*spread, size=n)
    return B @ np.diag(lam) @ np.linalg.inv(B)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def line_grid():
    return Grid(1, 64, 2 * np.pi)


def plane_wave_problem(grid, a=3.0, T=1.0, K=256, alpha=None, beta=None, **kw):
    x = grid.coordinates()[0]
    phi = np.exp(1j * x)
    alpha = alpha or TimeMeasure.zero(T)
    beta = beta or TimeMeasure.zero(T)
    return NonlocalProblem(grid, scalar(a), alpha, beta, phi, None, K, horizon=T,
                           periodic_data=True, **kw)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(capsys):
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(number, title, ok, detail):
        line = f"[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

"""Brute-force reference for the per-mode initial data.

The oracle never touches the cosine and sine formulas.  It integrates the
mode equation ``v'' + A_xi v = g`` with classical RK4 from unit initial data
and from zero data with forcing, then uses the affine dependence of the
trajectory on ``(v(0), v'(0))`` to impose both integral conditions as one
dense ``2N x 2N`` linear system.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularModeSystem
from .measures import TimeMeasure
from .operators import OperatorFamily

ORACLE_COND_CAP = 1e13


def _step_points(T: float, n_fine: int, extra: np.ndarray) -> np.ndarray:
    base = np.linspace(0.0, T, n_fine + 1)
    pts = np.union1d(base, np.asarray(extra, dtype=float))
    keep = np.concatenate([[True], np.diff(pts) > 1e-14 * max(T, 1.0)])
    return pts[keep]


def _interp_forcing(g: np.ndarray, T: float, t: float) -> np.ndarray:
    K = g.shape[0] - 1
    x = t / T * K
    j = min(max(int(np.floor(x)), 0), K - 1)
    frac = x - j
    return (1.0 - frac) * g[j] + frac * g[j + 1]


def oracle_solve_modes(family: OperatorFamily, xi2, alpha: TimeMeasure, beta: TimeMeasure,
                       phi_hat, psi_hat, g_hat=None, K: int = 128, fine: int = 16,
                       horizon: float | None = None, modes=None):
    """RK4-based initial data for several modes at once.

    Parameters
    ----------
    family : OperatorFamily
    xi2 : array_like, shape (P,)
        Squared wavenumber of each mode.
    alpha, beta : TimeMeasure
    phi_hat, psi_hat : array_like, shape (P, N)
        Transformed data in E-coordinates.
    g_hat : array_like, shape (K+1, P, N), optional
        Forcing sampled on the coarse time grid, linearly interpolated.
    K : int
        Coarse time steps; the RK4 step is ``horizon / (K * fine)``.
    fine : int
        Refinement factor, at least 4.
    horizon : float, optional
        Defaults to the horizon of ``alpha``.
    modes : sequence of int, optional
        Mode labels used in error reports.

    Returns
    -------
    (u0, u1) : ndarray, shape (P, N)
        Recovered initial data in E-coordinates.
    """
    if fine < 4:
        raise ValueError("oracle refinement factor must be at least 4")
    xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    P, N = xi2.size, family.dim
    T = float(alpha.horizon if horizon is None else horizon)
    phi_hat = np.asarray(phi_hat, dtype=complex).reshape(P, N)
    psi_hat = np.asarray(psi_hat, dtype=complex).reshape(P, N)
    forced = g_hat is not None and np.any(g_hat)
    if forced:
        g_hat = np.asarray(g_hat, dtype=complex).reshape(-1, P, N)

    R = 2 * N + 1
    U = np.zeros((P, R, N), dtype=complex)
    W = np.zeros((P, R, N), dtype=complex)
    eye = np.eye(N)
    U[:, :N, :] = eye
    W[:, N:2 * N, :] = eye
    A = family.A

    def accel(t, X):
        out = -(np.einsum("prj,ij->pri", X, A) + xi2[:, None, None] * X)
        if forced:
            out[:, -1, :] += _interp_forcing(g_hat, T, t)
        return out

    nodes_a, w_a = alpha.nodes, alpha.weights
    nodes_b, w_b = beta.nodes, beta.weights
    pts = _step_points(T, K * fine, np.concatenate([nodes_a, nodes_b]))
    acc_U = np.zeros((P, R, N), dtype=complex)
    acc_W = np.zeros((P, R, N), dtype=complex)

    def collect(t, U, W):
        for loc, w in zip(nodes_a, w_a):
            if abs(loc - t) <= 1e-12 * max(T, 1.0):
                acc_U[...] += w * U
        for loc, w in zip(nodes_b, w_b):
            if abs(loc - t) <= 1e-12 * max(T, 1.0):
                acc_W[...] += w * W

    collect(0.0, U, W)
    for t0, t1 in zip(pts[:-1], pts[1:]):
        h = t1 - t0
        k1u, k1w = W, accel(t0, U)
        k2u, k2w = W + 0.5 * h * k1w, accel(t0 + 0.5 * h, U + 0.5 * h * k1u)
        k3u, k3w = W + 0.5 * h * k2w, accel(t0 + 0.5 * h, U + 0.5 * h * k2u)
        k4u, k4w = W + h * k3w, accel(t1, U + h * k3u)
        U = U + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        W = W + h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
        collect(t1, U, W)

    # rows: conditions; columns: unknowns (u0, u1); acc[:, r, :] is run r's contribution
    Msys = np.zeros((P, 2 * N, 2 * N), dtype=complex)
    Msys[:, :N, :N] = eye
    Msys[:, N:, N:] = eye
    Msys[:, :N, :] -= np.transpose(acc_U[:, :2 * N, :], (0, 2, 1))
    Msys[:, N:, :] -= np.transpose(acc_W[:, :2 * N, :], (0, 2, 1))
    rhs = np.concatenate([phi_hat + acc_U[:, -1, :], psi_hat + acc_W[:, -1, :]], axis=1)

    labels = list(range(P)) if modes is None else list(modes)
    cond = np.linalg.cond(Msys)
    bad = np.nonzero(~np.isfinite(cond) | (cond > ORACLE_COND_CAP))[0]
    if bad.size:
        dets = np.linalg.det(Msys[bad])
        raise SingularModeSystem([(labels[i], 0, d) for i, d in zip(bad, dets)])
    z = np.linalg.solve(Msys, rhs[..., None])[..., 0]
    return z[:, :N], z[:, N:]


def oracle_solve_mode(family: OperatorFamily, xi2: float, alpha: TimeMeasure, beta: TimeMeasure,
                      phi_hat, psi_hat, g_hat=None, K: int = 128, fine: int = 16,
                      horizon: float | None = None):
    """Single-mode version of :func:`oracle_solve_modes`.

    ``g_hat`` has shape ``(K+1, N)`` when given.
    """
    N = family.dim
    g = None if g_hat is None else np.asarray(g_hat, dtype=complex).reshape(-1, 1, N)
    u0, u1 = oracle_solve_modes(family, [xi2], alpha, beta, np.reshape(phi_hat, (1, N)),
                                np.reshape(psi_hat, (1, N)), g, K, fine, horizon)
    return u0[0], u1[0]

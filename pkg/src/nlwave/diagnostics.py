"""Verification suites: operator identities, residuals, estimate monitors, oracle agreement.

Every suite returns a plain dictionary of floats (or ``None`` where a
quantity does not apply) so results can be serialized directly.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.integrate

from .errors import BranchAmbiguityWarning
from .grid import fft_inverse, lp_norm, sobolev_norm_hat
from .linear import NonlocalProblem, SolutionTimeline, evaluate_all_modes
from .operators import (OperatorFamily, cos_kernel, power_kernel, sin_kernel,
                        wentzell_boundary_residual)
from .oracle import oracle_solve_modes
from .picard import apply_G, nonlinear_forcing_hat, timeline_y_norm


# ---------------------------------------------------------------------------
# operator identities
# ---------------------------------------------------------------------------

def operator_matrix(fam: OperatorFamily, diag) -> np.ndarray:
    """Dense ``V diag(d) V^{-1}``."""
    diag = np.asarray(diag, dtype=complex)
    if fam.V is None:
        return np.diag(diag)
    return np.einsum("ij,j,jk->ik", fam.V, diag, fam.Vinv)


def _mm(X, Y):
    return np.einsum("ij,jk->ik", X, Y)


def _mat_norm(X) -> float:
    return float(np.max(np.abs(X))) if np.size(X) else 0.0


def identity_suite(fam: OperatorFamily, xi2_list, t_list, h: float = 1e-4) -> dict:
    """Maximum violations of the cosine/sine identities over a grid of ``(xi2, t)``.

    Violations are measured entrywise and divided by ``max(1, size of the
    terms involved)``, so families with exponentially growing modes are
    judged on relative accuracy.  Derivatives use five-point central
    differences with step ``h``.
    """
    N = fam.dim
    eye = np.eye(N)
    out = {"cosine_at_zero": 0.0, "sine_at_zero": 0.0, "pythagorean": 0.0,
           "sine_derivative": 0.0, "cosine_second_derivative": 0.0,
           "growth_ratio": None, "max_growth_rate": 0.0}
    growth = []
    kappa = fam.condition
    for xi2 in xi2_list:
        mu2 = fam.eigenvalues + float(xi2)
        Axi = fam.A + float(xi2) * eye
        C = lambda t: operator_matrix(fam, cos_kernel(t, mu2))
        S = lambda t: operator_matrix(fam, sin_kernel(t, mu2))
        out["cosine_at_zero"] = max(out["cosine_at_zero"], _mat_norm(C(0.0) - eye))
        out["sine_at_zero"] = max(out["sine_at_zero"], _mat_norm(S(0.0)))
        rate = float(np.max(np.abs(np.sqrt(mu2).imag)))
        out["max_growth_rate"] = max(out["max_growth_rate"], rate)
        nonneg = np.all(np.abs(mu2.imag) <= 1e-12 * max(1.0, np.max(np.abs(mu2)))) and np.all(mu2.real >= 0)
        for t in t_list:
            Ct, St = C(t), S(t)
            C2, AS2 = _mm(Ct, Ct), _mm(Axi, _mm(St, St))
            scale = max(1.0, _mat_norm(C2), _mat_norm(AS2))
            out["pythagorean"] = max(out["pythagorean"], _mat_norm(C2 + AS2 - eye) / scale)
            dS = (-S(t + 2 * h) + 8 * S(t + h) - 8 * S(t - h) + S(t - 2 * h)) / (12 * h)
            out["sine_derivative"] = max(out["sine_derivative"],
                                         _mat_norm(dS - Ct) / max(1.0, _mat_norm(Ct)))
            d2C = (-C(t + 2 * h) + 16 * C(t + h) - 30 * Ct + 16 * C(t - h) - C(t - 2 * h)) / (12 * h**2)
            AC = _mm(Axi, Ct)
            out["cosine_second_derivative"] = max(out["cosine_second_derivative"],
                                                  _mat_norm(d2C + AC) / max(1.0, _mat_norm(AC)))
            if nonneg:
                growth.append(np.linalg.norm(Ct, 2) / kappa)
    if growth:
        out["growth_ratio"] = float(max(growth))
    out["eigenvector_condition"] = float(kappa)
    return out


def identity_passes(result: dict, tol_zero=1e-12, tol_pyth=1e-10, tol_deriv=1e-6) -> bool:
    ok = (result["cosine_at_zero"] <= tol_zero and result["sine_at_zero"] <= tol_zero
          and result["pythagorean"] <= tol_pyth and result["sine_derivative"] <= tol_deriv
          and result["cosine_second_derivative"] <= tol_deriv)
    if result.get("growth_ratio") is not None:
        ok = ok and result["growth_ratio"] <= 1.01
    return ok


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

def _sup(grid, values_hat):
    """Grid maximum of the pointwise E-norm of frequency data ``(..., size, N)``."""
    return lp_norm(grid, fft_inverse(grid, values_hat), np.inf)


def pde_residual_timeline(prob: NonlocalProblem, sol: SolutionTimeline, g_hat=None) -> np.ndarray:
    """Sup-norm of ``u_tt + (A - Delta) u - g`` at interior samples.

    Second time derivatives use the five-point stencil, so the first and
    last two samples are reported as NaN.
    """
    K = sol.K
    out = np.full(K + 1, np.nan)
    if K < 4:
        return out
    dt = prob.dt
    U = sol.u_hat
    if g_hat is None:
        g_hat = sol.forcing_hat
    utt = (-U[4:] + 16 * U[3:-1] - 30 * U[2:-2] + 16 * U[1:-3] - U[:-4]) / (12 * dt**2)
    res = utt + prob.family.apply(U[2:-2]) + prob.grid.xi2[None, :, None] * U[2:-2]
    if g_hat is not None:
        res = res - g_hat[2:-2]
    out[2:-2] = _sup(prob.grid, res)
    return out


def condition_residuals(prob: NonlocalProblem, sol: SolutionTimeline) -> tuple[float, float]:
    """Sup-norm defects of the displacement and velocity nonlocal conditions."""
    acc_u = np.zeros_like(sol.u_hat[0])
    acc_ut = np.zeros_like(sol.u_hat[0])
    for loc, w in zip(prob.alpha.nodes, prob.alpha.weights):
        acc_u = acc_u + w * evaluate_all_modes(prob, sol, loc)[0]
    for loc, w in zip(prob.beta.nodes, prob.beta.weights):
        acc_ut = acc_ut + w * evaluate_all_modes(prob, sol, loc)[1]
    r0 = sol.u_hat[0] - prob.phi_hat - acc_u
    r1 = sol.ut_hat[0] - prob.psi_hat - acc_ut
    return float(_sup(prob.grid, r0)), float(_sup(prob.grid, r1))


def residual_suite(prob: NonlocalProblem, sol: SolutionTimeline, threads: int = 1) -> dict:
    """PDE, condition and (for nonlinear problems) fixed-point residuals."""
    out = {}
    if prob.nonlinearity is not None:
        g_hat = nonlinear_forcing_hat(prob, sol.u)
    else:
        g_hat = sol.forcing_hat
    pde = pde_residual_timeline(prob, sol, g_hat)
    out["pde_residual"] = float(np.nanmax(pde)) if np.any(np.isfinite(pde)) else None
    out["pde_residual_timeline"] = pde
    out["condition_residual_displacement"], out["condition_residual_velocity"] = condition_residuals(prob, sol)
    if prob.nonlinearity is not None:
        again = apply_G(prob, sol, threads=threads)
        out["fixed_point_residual"] = timeline_y_norm(prob, again.u - sol.u, again.u_hat - sol.u_hat)
        out["solution_y_norm"] = timeline_y_norm(prob, sol.u, sol.u_hat)
    if prob.family.kind == "wentzell":
        meta = prob.family.meta
        b = wentzell_boundary_residual(meta["a"], meta["b"], sol.u)
        out["wentzell_boundary_stencil_defect"] = float(np.max(np.abs(b)))
        out["wentzell_integrability"] = float(meta["integrability"])
    return out


# ---------------------------------------------------------------------------
# estimate monitors
# ---------------------------------------------------------------------------

def _ratio(lhs, rhs):
    """Max over time of lhs/rhs with 0/0 treated as not applicable."""
    lhs, rhs = np.asarray(lhs, float), np.asarray(rhs, float)
    if np.all(lhs == 0) and np.all(rhs == 0):
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    return float(np.max(r))


def estimate_monitor(prob: NonlocalProblem, sol: SolutionTimeline, gamma: float | None = None) -> dict:
    """Left/right ratios of the a-priori estimates in discrete norms.

    For each sample time the left side is the size of ``A^gamma u`` and
    ``A^gamma u_t``; the right side is built from ``A phi``, ``A psi`` (or
    ``A^{1/2} psi``) and the time integral of the forcing (``Delta g`` or
    ``g``).  Three norm families are reported: sup-norms with ``L^1`` data
    norms, Sobolev norms, and, for systems with an inner weight, the
    ``l_q`` / ``l_q^sigma`` sequence-space variant.  Each entry is the
    maximum ratio over time, or ``None`` when both sides vanish.
    """
    gamma = prob.gamma if gamma is None else gamma
    ns, grid, fam = prob.norms, prob.grid, prob.family
    times = sol.times

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BranchAmbiguityWarning)
        pg = power_kernel(fam.eigenvalues, gamma)
        ph = power_kernel(fam.eigenvalues, 0.5)
    Ag = lambda v: fam.eigen_apply(pg, v)
    Ahalf = lambda v: fam.eigen_apply(ph, v)

    g_hat = nonlinear_forcing_hat(prob, sol.u) if prob.nonlinearity is not None else sol.forcing_hat
    if g_hat is None:
        g_hat = np.zeros_like(sol.u_hat)
    lap_g_hat = -grid.xi2[None, :, None] * g_hat

    def sob(vh, q=ns.q, sigma=ns.sigma):
        return np.atleast_1d(sobolev_norm_hat(grid, vh, ns.s, ns.p, q, sigma))

    def lp(vh, p, q=ns.q, sigma=ns.sigma):
        return np.atleast_1d(lp_norm(grid, fft_inverse(grid, vh), p, q, sigma))

    def cum(vals):
        return scipy.integrate.cumulative_trapezoid(vals, times, initial=0.0)

    A_phi_hat, A_psi_hat = fam.apply(prob.phi_hat), fam.apply(prob.psi_hat)
    H_psi_hat = Ahalf(prob.psi_hat)
    Agu, Agut = Ag(sol.u_hat), Ag(sol.ut_hat)
    out = {}

    # sup-norm estimate with L^1 data norms
    lhs_sup = lp(Agu, np.inf) + lp(Agut, np.inf)
    d_phi = sob(A_phi_hat) + lp(A_phi_hat, 1)
    for gname, gh in (("laplacian_g", lap_g_hat), ("g", g_hat)):
        forcing = cum(sob(gh) + lp(gh, 1)) if np.any(gh) else np.zeros(times.size)
        for pname, psih in (("A_psi", A_psi_hat), ("half_psi", H_psi_hat)):
            rhs = d_phi + sob(psih) + lp(psih, 1) + forcing
            out[f"sup_{gname}_{pname}"] = _ratio(lhs_sup, rhs)

    # Sobolev estimate
    lhs_sob = sob(Agu) + sob(Agut)
    for gname, gh in (("laplacian_g", lap_g_hat), ("g", g_hat)):
        forcing = cum(sob(gh)) if np.any(gh) else np.zeros(times.size)
        for pname, psih in (("A_psi", A_psi_hat), ("half_psi", H_psi_hat)):
            rhs = sob(A_phi_hat) + sob(psih) + forcing
            out[f"sobolev_{gname}_{pname}"] = _ratio(lhs_sob, rhs)

    # sequence-space estimate for weighted systems
    sigma = fam.meta.get("sigma", ns.sigma) if fam.kind == "rank_one" else ns.sigma
    if sigma is not None:
        q = fam.meta.get("q", ns.q) if fam.kind == "rank_one" else ns.q
        lhs_seq = lp(Agu, np.inf, q, None) + lp(Agut, np.inf, q, None)
        for gname, gh in (("laplacian_g", lap_g_hat), ("g", g_hat)):
            forcing = (cum(sob(gh, q, None) + lp(gh, 1, q, None))
                       if np.any(gh) else np.zeros(times.size))
            rhs = (sob(A_phi_hat, q, sigma) + lp(A_phi_hat, 1, q, sigma) + lp(A_phi_hat, 1, q, None)
                   + sob(A_psi_hat, q, 0.5 * sigma) + lp(A_psi_hat, 1, q, 0.5 * sigma)
                   + lp(A_psi_hat, 1, q, None) + forcing)
            out[f"sequence_{gname}"] = _ratio(lhs_seq, rhs)
    return out


# ---------------------------------------------------------------------------
# oracle comparison
# ---------------------------------------------------------------------------

def oracle_suite(prob: NonlocalProblem, sol: SolutionTimeline, fine: int = 16, max_modes: int | None = None) -> dict:
    """Compare solver initial data with the RK4 oracle, mode by mode.

    Returns the maximum relative disagreement ``|u_s - u_o| / (1 + |u_o|)``
    for ``u0`` and ``u1``.  With forcing present the two quadratures differ
    at second order in the time step, so the result is informative only.
    """
    P = prob.grid.size
    modes = np.arange(P) if max_modes is None or max_modes >= P else _spread(P, max_modes)
    g = sol.forcing_hat
    if prob.nonlinearity is not None:
        g = nonlinear_forcing_hat(prob, sol.u)
    g_sub = None if g is None else g[:, modes]
    o0, o1 = oracle_solve_modes(prob.family, prob.grid.xi2[modes], prob.alpha, prob.beta,
                                prob.phi_hat[modes], prob.psi_hat[modes], g_sub, prob.K, fine,
                                prob.horizon, modes)
    e0 = np.abs(sol.u0[modes] - o0) / (1.0 + np.abs(o0))
    e1 = np.abs(sol.u1[modes] - o1) / (1.0 + np.abs(o1))
    return {"modes_checked": int(len(modes)), "fine": int(fine),
            "max_relative_u0": float(e0.max()), "max_relative_u1": float(e1.max()),
            "forced": bool(g is not None and np.any(g))}


def _spread(P, count):
    """Deterministic subset of mode indices spread over the spectrum."""
    return np.unique(np.linspace(0, P - 1, count).round().astype(int))

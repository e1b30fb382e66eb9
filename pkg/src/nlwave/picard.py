"""Successive approximation for the nonlinear problem.

Each Picard step freezes the nonlinearity at the previous iterate and
solves the linear nonlocal problem with forcing ``g - F(u_k)``.  Window
rules bound the horizon on which the map is guaranteed to contract, and
continuation glues plain Cauchy solves onto a converged solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BlowupSuspected, NonContraction, WindowExceeded
from .grid import fft_forward, fft_inverse, lp_norm, sobolev_norm_hat, y_norm_arrays
from .linear import NonlocalProblem, SolutionTimeline, _ModePlan, solve_linear
from .measures import TimeMeasure
from .operators import power_kernel

SAMPLE_COUNT = 256


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NonlinearityDescriptor:
    """Pointwise map ``F: E -> E`` applied at every grid point.

    Parameters
    ----------
    func : callable
        Maps arrays with last axis ``N`` to arrays of the same shape.
    order : int
        Smoothness order ``k`` entering the derivative envelope.
    derivative_bound : callable, optional
        ``radius -> max_{j<=k} sup_{|x|<=radius} ||F^{(j)}(x)||``.  When
        absent the envelope is estimated by sampling.
    dealias : bool
        Apply the 2/3 rule to the spectrum of ``F(u)``.
    kind : str
        Label used in reports.
    params : dict
        Preset parameters, for reports.

    Notes
    -----
    Calling the descriptor returns ``F(u) - F(0)`` so that ``F(0) = 0``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    order: int = 1
    derivative_bound: Callable[[float], float] | None = None
    dealias: bool = True
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, u):
        u = np.asarray(u, dtype=complex)
        f0 = np.asarray(self.func(np.zeros(u.shape[-1:], dtype=complex)), dtype=complex)
        out = np.asarray(self.func(u), dtype=complex)
        return out - f0 if np.any(f0) else out

    def without_bound(self) -> "NonlinearityDescriptor":
        return NonlinearityDescriptor(self.func, self.order, None, self.dealias, self.kind, dict(self.params))


def power_law(lam: float, p: float, order: int = 1, dealias: bool = True) -> NonlinearityDescriptor:
    """``F(u) = lam |u|^{p-1} u`` channel-wise (modulus per channel)."""
    lam, p = float(lam), float(p)
    if p <= 1:
        raise ValueError("power-law exponent must exceed 1")

    def func(u):
        if lam == 0:
            return np.zeros_like(u)
        return lam * np.abs(u) ** (p - 1) * u

    def bound(radius):
        best, coef = 0.0, abs(lam)
        for j in range(1, order + 1):
            coef *= p - j + 1
            if radius == 0 and p - j < 0:
                continue
            best = max(best, abs(coef) * radius ** (p - j))
        return best

    return NonlinearityDescriptor(func, order, bound, dealias, "power", {"lambda": lam, "p": p})


def _sample_points(N: int, radius: float, rng):
    pts = []
    for j in range(N):
        e = np.zeros(N, complex)
        e[j] = radius
        pts.extend([e, -e, 1j * e])
    while len(pts) < SAMPLE_COUNT:
        z = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        z *= radius * rng.uniform() / np.linalg.norm(z)
        pts.append(z)
    return np.array(pts[:SAMPLE_COUNT])


def _sample_directions(N: int, rng, count: int = 8):
    dirs = []
    for j in range(N):
        e = np.zeros(N, complex)
        e[j] = 1.0
        dirs.extend([e, 1j * e])
    for _ in range(count):
        z = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        dirs.append(z / np.linalg.norm(z))
    return np.array(dirs)


def fbar_estimate(F: NonlinearityDescriptor | None, radius: float, N: int = 1,
                  method: str = "auto") -> float:
    """Envelope of derivative norms of ``F`` on the ball of the given radius.

    Parameters
    ----------
    F : NonlinearityDescriptor or None
        ``None`` stands for the zero map.
    radius : float
    N : int
        Dimension of the value space used for sampling.
    method : {"auto", "sample"}
        ``"auto"`` uses the descriptor's bound when available.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if F is None:
        return 0.0
    if method == "auto" and F.derivative_bound is not None:
        return float(F.derivative_bound(radius))
    rng = np.random.default_rng(20240607)
    pts = _sample_points(N, radius, rng)
    dirs = _sample_directions(N, rng)
    h = 1e-4 * max(radius, 1e-3)
    best = 0.0
    for x in pts:
        fx = F(x)
        for d in dirs:
            fp, fm = F(x + h * d), F(x - h * d)
            best = max(best, float(np.linalg.norm((fp - fm) / (2 * h))))
            if F.order >= 2:
                best = max(best, float(np.linalg.norm((fp - 2 * fx + fm) / h**2)))
    return best


# ---------------------------------------------------------------------------
# window rules
# ---------------------------------------------------------------------------

def window_bounds(M: float, fbar: float, C0: float = 1.0, C1: float = 1.0) -> tuple[float, float]:
    """The invariance and contraction horizon bounds for a ball of radius ``M + 1``.

    ``fbar`` is the derivative envelope evaluated at ``M + 1``.
    """
    if M < 0 or fbar < 0:
        raise ValueError("M and fbar must be nonnegative")
    r = M + 1.0
    invariance = 1.0 / (r * (1.0 + 2.0 * C0 * r * fbar))
    contraction = 0.5 / (1.0 + C1 * r**2 * fbar)
    return invariance, contraction


def select_window(M: float, fbar: float, C0: float = 1.0, C1: float = 1.0,
                  T_user: float = math.inf) -> float:
    """Largest horizon allowed by both window bounds and the user's horizon."""
    return min(T_user, *window_bounds(M, fbar, C0, C1))


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def data_size(prob: NonlocalProblem) -> tuple[float, float]:
    """Ball radius from the data, and its variant with ``A^{1/2} psi``.

    ``M = ||A phi||_{H^{s,p}} + ||A phi||_inf + ||A psi||_{H^{s,p}} + ||A psi||_inf``.
    """
    ns = prob.norms
    fam, grid = prob.family, prob.grid

    def both(v):
        vh = fft_forward(grid, v)
        return (float(sobolev_norm_hat(grid, vh, ns.s, ns.p, ns.q, ns.sigma))
                + float(lp_norm(grid, v, np.inf, ns.q, ns.sigma)))

    a_phi = both(fam.apply(prob.phi))
    a_psi = both(fam.apply(prob.psi))
    half = fam.eigen_apply(power_kernel(fam.eigenvalues, 0.5), prob.psi)
    return a_phi + a_psi, a_phi + both(half)


def timeline_y_norm(prob: NonlocalProblem, u, u_hat) -> float:
    ns = prob.norms
    return y_norm_arrays(prob.grid, u, u_hat, prob.family, ns.s, ns.p, ns.q, ns.sigma)


def blowup_norm(prob: NonlocalProblem, sol: SolutionTimeline) -> float:
    """``max_t`` of the Sobolev and sup norms of ``u`` and ``u_t`` with ``A`` applied."""
    ns = prob.norms
    grid, fam = prob.grid, prob.family
    total = np.zeros(sol.times.size)
    for v, vh in ((sol.u, sol.u_hat), (sol.ut, sol.ut_hat)):
        av = fam.apply(v)
        total += np.atleast_1d(sobolev_norm_hat(grid, fam.apply(vh), ns.s, ns.p, ns.q, ns.sigma))
        total += np.atleast_1d(lp_norm(grid, av, np.inf, ns.q, ns.sigma))
    if not np.all(np.isfinite(total)):
        return math.inf
    return float(total.max())


# ---------------------------------------------------------------------------
# the map and the iteration
# ---------------------------------------------------------------------------

def nonlinear_forcing_hat(prob: NonlocalProblem, u_phys: np.ndarray) -> np.ndarray:
    """Spectrum of ``-F(u)`` (dealiased when requested) plus any external forcing."""
    F = prob.nonlinearity
    g = prob.g_hat()
    base = np.zeros((prob.K + 1, prob.grid.size, prob.N), complex) if g is None else np.array(g)
    if F is None:
        return base
    Fh = fft_forward(prob.grid, F(u_phys))
    if F.dealias:
        Fh *= prob.grid.dealias_mask()[:, None]
    return base - Fh


def apply_G(prob: NonlocalProblem, u_k: SolutionTimeline, plan: _ModePlan | None = None,
            threads: int = 1) -> SolutionTimeline:
    """One Picard step: the linear solution driven by ``g - F(u_k)``."""
    if u_k.times.size != prob.K + 1:
        raise ValueError("iterate must live on the problem time grid")
    g = nonlinear_forcing_hat(prob, u_k.u)
    return solve_linear(prob.replace(forcing_hat=g), threads=threads, plan=plan, check_leak=False)


@dataclass
class PicardReport:
    """Trace of a nonlinear solve."""

    M: float
    M_half: float
    fbar: float
    T_window: float
    T_user: float
    window_bound_invariance: float
    window_bound_contraction: float
    iterations: int = 0
    deltas: list = field(default_factory=list)
    rhos: list = field(default_factory=list)
    status: str = "pending"
    blowup_norm: float = 0.0
    window_binding: bool = False
    advisory: str | None = None
    windows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "M", "M_half", "fbar", "T_window", "T_user", "window_bound_invariance",
            "window_bound_contraction", "iterations", "deltas", "rhos", "status",
            "blowup_norm", "window_binding", "advisory")}
        out["windows"] = [w.to_dict() for w in self.windows]
        return out


def _window_setup(prob, C0, C1):
    M, M_half = data_size(prob)
    fbar = fbar_estimate(prob.nonlinearity, M + 1.0, prob.N)
    b_inv, b_con = window_bounds(M, fbar, C0, C1)
    T_w = min(prob.horizon, b_inv, b_con)
    return PicardReport(M, M_half, fbar, T_w, prob.horizon, b_inv, b_con,
                        window_binding=T_w < prob.horizon)


def _iterate(prob, report, threads, atol, rtol, max_iter, ceiling, initial):
    plan = _ModePlan(prob, threads)
    if isinstance(initial, SolutionTimeline):
        u = initial
    elif initial == "zero":
        u = SolutionTimeline.zeros_like(prob)
    elif initial == "linear":
        u = solve_linear(prob.replace(forcing_hat=prob.g_hat()), threads=threads, plan=plan, check_leak=False)
    else:
        raise ValueError(f"unknown initial iterate {initial!r}")
    streak = 0
    for k in range(1, max_iter + 1):
        new = apply_G(prob, u, plan, threads)
        report.iterations = k
        bnorm = blowup_norm(prob, new)
        report.blowup_norm = bnorm
        if not math.isfinite(bnorm) or bnorm > ceiling:
            report.status = "blowup"
            raise BlowupSuspected(bnorm, ceiling, k)
        delta = timeline_y_norm(prob, new.u - u.u, new.u_hat - u.u_hat)
        report.deltas.append(delta)
        if len(report.deltas) > 1:
            prev = report.deltas[-2]
            rho = delta / prev if prev > 0 else 0.0
            report.rhos.append(rho)
            streak = streak + 1 if rho >= 1 else 0
        tol = atol + rtol * timeline_y_norm(prob, u.u, u.u_hat)
        u = new
        if delta <= tol:
            report.status = "converged"
            return u
        if streak >= 5:
            report.status = "non_contraction"
            raise NonContraction(report.rhos)
    report.status = "max_iter"
    return u


def solve_nonlinear(prob: NonlocalProblem, threads: int = 1, atol: float = 1e-10, rtol: float = 1e-8,
                    max_iter: int = 100, C0: float = 1.0, C1: float = 1.0, ceiling: float = 1e8,
                    initial="linear", enforce_window: bool = True, max_halvings: int = 4):
    """Picard iteration for the nonlinear nonlocal problem.

    Returns
    -------
    (SolutionTimeline, PicardReport)

    Raises
    ------
    WindowExceeded
        The horizon exceeds the contraction window while the nonlocal
        conditions are active and ``enforce_window`` is set.
    NonContraction, BlowupSuspected
        As described in :class:`PicardReport` statuses.
    """
    report = _window_setup(prob, C0, C1)
    kwargs = dict(atol=atol, rtol=rtol, max_iter=max_iter, ceiling=ceiling)
    zero_measures = prob.alpha.is_zero and prob.beta.is_zero
    if not report.window_binding or prob.nonlinearity is None or report.fbar == 0:
        # a vanishing derivative envelope makes G constant, so any horizon is exact
        sol = _iterate(prob, report, threads, initial=initial, **kwargs)
        return sol, report
    if not zero_measures:
        if enforce_window:
            report.status = "window_exceeded"
            raise WindowExceeded(prob.horizon, report.T_window)
        report.advisory = (f"horizon {prob.horizon:g} exceeds the contraction window "
                           f"{report.T_window:.6g}; iterating on the full horizon")
        sol = _iterate(prob, report, threads, initial=initial, **kwargs)
        return sol, report

    # plain Cauchy problem: march window by window, halving on failure
    T_w = report.T_window
    for attempt in range(max_halvings + 1):
        try:
            start = _first_sample(prob)
            sol, windows = _march(prob, start, prob.K, T_w, threads, C0, C1, kwargs)
            report.windows = windows
            report.iterations = sum(w.iterations for w in windows)
            report.status = "converged" if all(w.status == "converged" for w in windows) else "max_iter"
            report.T_window = T_w
            report.blowup_norm = max(w.blowup_norm for w in windows)
            return sol, report
        except NonContraction:
            if attempt == max_halvings:
                raise
            T_w *= 0.5


def _first_sample(prob):
    """Timeline holding only ``t = 0`` with the plain Cauchy data."""
    return SolutionTimeline(prob.grid, prob.family, np.zeros(1), prob.phi_hat[None], prob.psi_hat[None],
                            prob.phi_hat, prob.psi_hat)


def _march(prob, sol, steps, T_w, threads, C0, C1, kwargs):
    """Continue ``sol`` by ``steps`` time steps of size ``prob.dt`` using plain Cauchy windows."""
    dt = prob.dt
    per = max(1, int(math.floor(T_w / dt * (1 + 1e-12))))
    t0 = sol.times[-1]
    u_hat, ut_hat, times = [sol.u_hat], [sol.ut_hat], [sol.times]
    last_u, last_ut = sol.u_hat[-1], sol.ut_hat[-1]
    windows = []
    done = 0
    while done < steps:
        n = min(per, steps - done)
        H = n * dt
        zero = TimeMeasure.zero(H)
        sub = NonlocalProblem(prob.grid, prob.family, zero, zero,
                              fft_inverse(prob.grid, last_u), fft_inverse(prob.grid, last_ut), n,
                              horizon=H, nonlinearity=prob.nonlinearity, gamma=prob.gamma,
                              periodic_data=True, norms=prob.norms)
        if prob.nonlinearity is None:
            piece = solve_linear(sub, threads=threads, check_leak=False)
            rep = PicardReport(0.0, 0.0, 0.0, H, H, math.inf, math.inf, iterations=0, status="converged")
        else:
            rep = _window_setup(sub, C0, C1)
            piece = _iterate(sub, rep, threads, initial="linear", **kwargs)
        windows.append(rep)
        u_hat.append(piece.u_hat[1:])
        ut_hat.append(piece.ut_hat[1:])
        times.append(t0 + (done + np.arange(1, n + 1)) * dt)
        last_u, last_ut = piece.u_hat[-1], piece.ut_hat[-1]
        done += n
    out = SolutionTimeline(prob.grid, prob.family, np.concatenate(times),
                           np.concatenate(u_hat), np.concatenate(ut_hat), sol.u0, sol.u1,
                           None, dict(sol.diagnostics))
    return out, windows


def extend_solution(prob: NonlocalProblem, sol: SolutionTimeline, extra_T: float, threads: int = 1,
                    C0: float = 1.0, C1: float = 1.0, atol: float = 1e-10, rtol: float = 1e-8,
                    max_iter: int = 100, ceiling: float = 1e8) -> SolutionTimeline:
    """Continue a converged solution past its horizon with plain Cauchy solves.

    The extension uses the time step of ``prob``; ``extra_T`` must be a
    multiple of it.  Windows are sized by the window rules applied to the
    data at the start of each window.  External forcing is not continued.
    """
    if extra_T < 0:
        raise ValueError("extension length must be nonnegative")
    if extra_T == 0:
        return sol
    dt = prob.dt
    steps = int(round(extra_T / dt))
    if steps < 1 or abs(steps * dt - extra_T) > 1e-9 * max(1.0, extra_T):
        raise ValueError(f"extension {extra_T} is not a multiple of the time step {dt}")
    if prob.forcing is not None or prob.forcing_hat is not None:
        raise ValueError("continuation of externally forced problems is not supported")
    kwargs = dict(atol=atol, rtol=rtol, max_iter=max_iter, ceiling=ceiling)
    if prob.nonlinearity is None:
        T_w = extra_T
    else:
        end = NonlocalProblem(prob.grid, prob.family, TimeMeasure.zero(dt), TimeMeasure.zero(dt),
                              fft_inverse(prob.grid, sol.u_hat[-1]), fft_inverse(prob.grid, sol.ut_hat[-1]),
                              1, nonlinearity=prob.nonlinearity, periodic_data=True, norms=prob.norms)
        T_w = _window_setup(end.replace(horizon=extra_T, alpha=TimeMeasure.zero(extra_T),
                                        beta=TimeMeasure.zero(extra_T)), C0, C1).T_window
    out, _ = _march(prob, sol, steps, T_w, threads, C0, C1, kwargs)
    return out

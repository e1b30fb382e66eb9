"""Per-mode solver for the linear wave equation with nonlocal initial conditions.

For every Fourier mode the unknown initial data ``(u0, u1)`` solve a 2x2
block system built from integrals of the cosine and sine functions against
the condition measures.  In the eigenbasis of ``A`` the blocks are
diagonal, so the system splits into independent scalar 2x2 problems per
eigenchannel.  The mild (Duhamel) formula then gives the solution at every
sample of a uniform time grid.
"""

from __future__ import annotations

import dataclasses
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridLeakWarning, SingularModeSystem
from .grid import Grid, NormSpec, SpectralField, fft_forward, fft_inverse
from .measures import (TimeMeasure, inverse_bound, invertibility_margin,
                       product_integral, total)
from .operators import OperatorFamily, cos_kernel, sin_kernel

DET_FLOOR = 1e-14
ON_GRID_TOL = 1e-9
LEAK_TOL = 1e-10


# ---------------------------------------------------------------------------
# problem and solution containers
# ---------------------------------------------------------------------------

def _as_physical(grid: Grid, f, N: int) -> np.ndarray:
    if f is None:
        return np.zeros((grid.size, N), dtype=complex)
    if isinstance(f, SpectralField):
        return np.array(f.physical().values)
    arr = np.asarray(f, dtype=complex)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape != (grid.size, N):
        raise ValueError(f"field must have shape ({grid.size}, {N}), got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class NonlocalProblem:
    """Full specification of a nonlocal wave problem on a periodic grid.

    Parameters
    ----------
    grid : Grid
    family : OperatorFamily
    alpha, beta : TimeMeasure
        Weights of the displacement and velocity conditions.  Their horizons
        may not exceed ``horizon``.
    phi, psi : SpectralField or array_like, shape (size, N)
        Data of the nonlocal conditions (physical representation).
    K : int
        Number of time steps; the solution is sampled at ``K + 1`` points.
    horizon : float, optional
        Length of the time window, by default the horizon of ``alpha``.
    forcing : array_like, shape (K+1, size, N), optional
        Physical right-hand side sampled on the time grid.
    forcing_hat : array_like, shape (K+1, size, N), optional
        Right-hand side already in frequency space (takes precedence).
    nonlinearity : NonlinearityDescriptor, optional
        Pointwise ``F`` for the nonlinear solver; ignored by the linear one.
    gamma : float
        Fractional power used by the estimate monitors.
    det_fraction : float
        Fraction of the invertibility margin below which a per-mode
        determinant (relative to the size of its products) counts as singular.
    periodic_data : bool
        Silence the boundary-leak warning for intentionally periodic data.
    norms : NormSpec
        Norm parameters shared by the Picard stopping rule and the monitors.
    """

    grid: Grid
    family: OperatorFamily
    alpha: TimeMeasure
    beta: TimeMeasure
    phi: object
    psi: object
    K: int
    horizon: float | None = None
    forcing: object = None
    forcing_hat: object = None
    nonlinearity: object = None
    gamma: float = 0.0
    det_fraction: float = 1e-8
    periodic_data: bool = False
    norms: NormSpec = NormSpec()
    name: str = ""

    def __post_init__(self):
        N = self.family.dim
        T = float(self.alpha.horizon if self.horizon is None else self.horizon)
        object.__setattr__(self, "horizon", T)
        if int(self.K) < 1:
            raise ValueError("time grid needs at least one step")
        object.__setattr__(self, "K", int(self.K))
        for label, m in (("alpha", self.alpha), ("beta", self.beta)):
            if m.horizon > T * (1 + 1e-12):
                raise ValueError(f"{label} horizon {m.horizon} exceeds problem horizon {T}")
        phi = _as_physical(self.grid, self.phi, N)
        psi = _as_physical(self.grid, self.psi, N)
        phi.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)
        shape = (self.K + 1, self.grid.size, N)
        for key in ("forcing", "forcing_hat"):
            val = getattr(self, key)
            if val is not None:
                val = np.array(val, dtype=complex)
                if val.shape != shape:
                    raise ValueError(f"{key} must have shape {shape}, got {val.shape}")
                val.setflags(write=False)
                object.__setattr__(self, key, val)
        if not 0.0 <= self.gamma < 0.5:
            raise ValueError("gamma must lie in [0, 1/2)")

    @property
    def N(self) -> int:
        return self.family.dim

    @property
    def dt(self) -> float:
        return self.horizon / self.K

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.K + 1)

    @cached_property
    def phi_hat(self) -> np.ndarray:
        return fft_forward(self.grid, self.phi)

    @cached_property
    def psi_hat(self) -> np.ndarray:
        return fft_forward(self.grid, self.psi)

    def g_hat(self) -> np.ndarray | None:
        """Frequency-space forcing timeline, or ``None`` when unforced."""
        if self.forcing_hat is not None:
            return self.forcing_hat
        if self.forcing is not None:
            return fft_forward(self.grid, self.forcing)
        return None

    def replace(self, **changes) -> "NonlocalProblem":
        if "forcing" in changes and "forcing_hat" not in changes:
            changes["forcing_hat"] = None
        if "forcing_hat" in changes and "forcing" not in changes:
            changes["forcing"] = None
        return dataclasses.replace(self, **changes)

    def margin(self) -> float:
        return invertibility_margin(self.alpha, self.beta)


@dataclass(eq=False)
class SolutionTimeline:
    """Solution samples on the uniform time grid.

    ``u_hat`` and ``ut_hat`` hold frequency coefficients in E-coordinates,
    shape ``(K+1, size, N)``; physical fields are produced on demand.
    ``u0`` and ``u1`` are the recovered initial data per mode.
    """

    grid: Grid
    family: OperatorFamily
    times: np.ndarray
    u_hat: np.ndarray
    ut_hat: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    forcing_hat: np.ndarray | None = None
    diagnostics: dict = dataclasses.field(default_factory=dict)

    @cached_property
    def u(self) -> np.ndarray:
        return fft_inverse(self.grid, self.u_hat)

    @cached_property
    def ut(self) -> np.ndarray:
        return fft_inverse(self.grid, self.ut_hat)

    @property
    def K(self) -> int:
        return self.times.size - 1

    def snapshot(self, k: int) -> SpectralField:
        return SpectralField(self.grid, self.u[k])

    @classmethod
    def zeros_like(cls, prob: NonlocalProblem) -> "SolutionTimeline":
        shape = (prob.K + 1, prob.grid.size, prob.N)
        z = np.zeros(shape, dtype=complex)
        return cls(prob.grid, prob.family, prob.times, z, z.copy(),
                   np.zeros(shape[1:], complex), np.zeros(shape[1:], complex))


@dataclass(frozen=True)
class ModeSystem:
    """Eigenchannel blocks and right-hand sides for one Fourier mode.

    All arrays have shape ``(N,)`` and are expressed in the eigenbasis of
    ``A``; the block matrices are diagonal there, so only their diagonals
    are stored.
    """

    mode: int
    xi2: float
    a11: np.ndarray
    a12: np.ndarray
    a21: np.ndarray
    a22: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    family: OperatorFamily

    @property
    def determinant(self) -> np.ndarray:
        return self.a11 * self.a22 - self.a12 * self.a21


# ---------------------------------------------------------------------------
# parallel helpers
# ---------------------------------------------------------------------------

def _slices(P: int, threads: int) -> list[slice]:
    threads = max(1, int(threads))
    n = min(P, threads)
    bounds = np.linspace(0, P, n + 1).astype(int)
    return [slice(bounds[i], bounds[i + 1]) for i in range(n)]


def _map(func, slices, threads):
    if threads <= 1 or len(slices) == 1:
        return [func(s) for s in slices]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(func, slices))


def _weighted_sum(weights, rows):
    """``sum_i w_i rows(i)`` accumulated in node order (deterministic)."""
    acc = None
    for i, w in enumerate(weights):
        term = w * rows(i)
        acc = term if acc is None else acc + term
    return acc


def _grid_index(t: float, dt: float, K: int) -> int | None:
    j = int(round(t / dt))
    if 0 <= j <= K and abs(t - j * dt) <= ON_GRID_TOL * dt:
        return j
    return None


def _convolve(kern, g, dt):
    """Trapezoid Duhamel integrals ``int_0^{t_k} kern(t_k - tau) g(tau) dtau``.

    ``kern`` and ``g`` have shape ``(K+1, ...)``; so does the result.
    """
    K1 = g.shape[0]
    D = np.zeros(np.broadcast_shapes(kern.shape, g.shape), dtype=complex)
    for m in range(K1):
        D[m:] += kern[m] * g[: K1 - m]
    D -= 0.5 * kern * g[0]
    D -= 0.5 * kern[0] * g
    D *= dt
    return D


def _partial_duhamel(kernel, sigma, times, g, mu2):
    """Duhamel integral at an off-grid time with linearly interpolated forcing."""
    dt = times[1] - times[0]
    j = min(int(np.floor(sigma / dt)), times.size - 2)
    tail = sigma - times[j]
    taus = np.append(times[: j + 1], sigma)
    frac = tail / dt
    g_sigma = (1 - frac) * g[j] + frac * g[j + 1]
    lengths = np.append(np.full(j, dt), tail)
    w = np.zeros(j + 2)
    w[:-1] += 0.5 * lengths
    w[1:] += 0.5 * lengths
    kvals = kernel(sigma - taus, mu2)
    return _weighted_sum(w, lambda i: kvals[i] * (g[i] if i <= j else g_sigma))


# ---------------------------------------------------------------------------
# per-chunk computation
# ---------------------------------------------------------------------------

class _ModePlan:
    """Forcing-independent per-mode tables: kernels on the time grid and blocks."""

    def __init__(self, prob: NonlocalProblem, threads: int = 1):
        self.prob = prob
        self.threads = max(1, int(threads))
        fam = prob.family
        self.mu2 = fam.eigenvalues[None, :] + prob.grid.xi2[:, None]
        self.times = prob.times
        self.slices = _slices(self.mu2.shape[0], self.threads)
        parts = _map(self._tables, self.slices, self.threads)
        cat = lambda k, ax: np.concatenate([p[k] for p in parts], axis=ax)
        self.c_tab = cat("c", 1)
        self.s_tab = cat("s", 1)
        self.a11, self.a12, self.a21, self.a22 = (cat(k, 0) for k in ("a11", "a12", "a21", "a22"))
        self.det = self.a11 * self.a22 - self.a12 * self.a21
        self.det_scale = np.maximum(1.0, np.maximum(np.abs(self.a11 * self.a22), np.abs(self.a12 * self.a21)))
        self.operator_O = cat("O", 0)
        self.margin = invertibility_margin(prob.alpha, prob.beta)

    def _measure_rows(self, m: TimeMeasure, table, kernel, mu2):
        """Row accessor giving ``kernel(node_i)`` for each quadrature node of ``m``."""
        dt, K = self.prob.dt, self.prob.K
        idx = [_grid_index(t, dt, K) for t in m.nodes]

        def row(i):
            j = idx[i]
            if j is not None:
                return table[j]
            return kernel(m.nodes[i], mu2)
        return row

    def _tables(self, sl):
        prob = self.prob
        mu2 = self.mu2[sl]
        c = cos_kernel(self.times, mu2)
        s = sin_kernel(self.times, mu2)
        zero = np.zeros_like(mu2)
        al, be = prob.alpha, prob.beta
        ca = _weighted_sum(al.weights, self._measure_rows(al, c, cos_kernel, mu2)) if al.nodes.size else zero
        sa = _weighted_sum(al.weights, self._measure_rows(al, s, sin_kernel, mu2)) if al.nodes.size else zero
        cb = _weighted_sum(be.weights, self._measure_rows(be, c, cos_kernel, mu2)) if be.nodes.size else zero
        sb = _weighted_sum(be.weights, self._measure_rows(be, s, sin_kernel, mu2)) if be.nodes.size else zero
        one = np.ones_like(mu2)
        O = (1.0 + total(al) * total(be)) * one - (ca + cb)
        return {"c": c, "s": s, "a11": one - ca, "a12": -sa, "a21": mu2 * sb,
                "a22": one - cb, "O": O}

    # -- forcing-dependent parts ------------------------------------------

    def duhamel(self, g_eig):
        """Grid Duhamel tables ``(D_s, D_c)`` for eigen-coordinate forcing."""
        dt = self.prob.dt

        def work(sl):
            return _convolve(self.s_tab[:, sl], g_eig[:, sl], dt), _convolve(self.c_tab[:, sl], g_eig[:, sl], dt)
        parts = _map(work, self.slices, self.threads)
        return (np.concatenate([p[0] for p in parts], axis=1),
                np.concatenate([p[1] for p in parts], axis=1))

    def forcing_terms(self, g_eig, Ds, Dc):
        """``int alpha D_s`` and ``int beta D_c`` for the right-hand sides."""
        prob = self.prob

        def integrate(m, D, kernel, sl):
            if not m.nodes.size:
                return np.zeros_like(self.mu2[sl])
            dt, K = prob.dt, prob.K
            mu2 = self.mu2[sl]

            def row(i):
                t = m.nodes[i]
                j = _grid_index(t, dt, K)
                if j is not None:
                    return D[j, sl]
                return _partial_duhamel(kernel, t, self.times, g_eig[:, sl], mu2)
            return _weighted_sum(m.weights, row)

        def work(sl):
            return integrate(prob.alpha, Ds, sin_kernel, sl), integrate(prob.beta, Dc, cos_kernel, sl)
        parts = _map(work, self.slices, self.threads)
        return (np.concatenate([p[0] for p in parts], axis=0),
                np.concatenate([p[1] for p in parts], axis=0))

    def check_singular(self):
        thresh = max(DET_FLOOR, self.prob.det_fraction * max(self.margin, 0.0)) * self.det_scale
        bad = np.abs(self.det) <= thresh
        if np.any(bad):
            modes, chans = np.nonzero(bad)
            raise SingularModeSystem([(m, c, self.det[m, c]) for m, c in zip(modes, chans)])


def _solve_blocks(a11, a12, a21, a22, f1, f2):
    det = a11 * a22 - a12 * a21
    return (a22 * f1 - a12 * f2) / det, (a11 * f2 - a21 * f1) / det


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def solve_linear(prob: NonlocalProblem, threads: int = 1, plan: _ModePlan | None = None,
                 check_leak: bool = True) -> SolutionTimeline:
    """Solve the linear nonlocal problem on the whole time grid.

    Raises
    ------
    SingularModeSystem
        If any mode/channel determinant falls below the threshold.
    """
    if check_leak and not prob.periodic_data:
        _warn_leak(prob)
    if plan is None:
        plan = _ModePlan(prob, threads)
    plan.check_singular()
    fam = prob.family
    phi_e = fam.to_eigen(prob.phi_hat)
    psi_e = fam.to_eigen(prob.psi_hat)
    g_hat = prob.g_hat()
    if g_hat is not None and np.any(g_hat):
        g_eig = fam.to_eigen(g_hat)
        Ds, Dc = plan.duhamel(g_eig)
        Fa, Fb = plan.forcing_terms(g_eig, Ds, Dc)
        f1, f2 = phi_e + Fa, psi_e + Fb
    else:
        Ds = Dc = None
        f1, f2 = phi_e, psi_e
    u0, u1 = _solve_blocks(plan.a11, plan.a12, plan.a21, plan.a22, f1, f2)
    c, s = plan.c_tab, plan.s_tab
    u_e = c * u0 + s * u1
    ut_e = -plan.mu2 * s * u0 + c * u1
    if Ds is not None:
        u_e = u_e + Ds
        ut_e = ut_e + Dc
    sol = SolutionTimeline(
        grid=prob.grid, family=fam, times=prob.times,
        u_hat=fam.from_eigen(u_e), ut_hat=fam.from_eigen(ut_e),
        u0=fam.from_eigen(u0), u1=fam.from_eigen(u1),
        forcing_hat=g_hat, diagnostics=_diagnostics(plan))
    return sol


def _warn_leak(prob: NonlocalProblem):
    edge = prob.grid.boundary_mask()
    for label, f in (("phi", prob.phi), ("psi", prob.psi)):
        peak = np.max(np.abs(f)) if f.size else 0.0
        if peak > 0 and np.max(np.abs(f[edge])) > LEAK_TOL * peak:
            warnings.warn(
                f"{label} does not decay at the box boundary "
                f"(edge/peak = {np.max(np.abs(f[edge])) / peak:.2e}); the periodic box is visible",
                GridLeakWarning, stacklevel=3)


def _diagnostics(plan: _ModePlan) -> dict:
    absdet = np.abs(plan.det)
    k = int(np.argmin(absdet))
    mode, chan = divmod(k, absdet.shape[1])
    growth = np.abs(np.sqrt(plan.mu2.astype(complex)).imag)
    margin = plan.margin
    return {
        "invertibility_margin": float(margin),
        "inverse_bound": inverse_bound(margin),
        "min_determinant": float(absdet.min()),
        "min_determinant_mode": int(mode),
        "min_determinant_channel": int(chan),
        "min_operator_modulus": float(np.abs(plan.operator_O).min()),
        "max_growth_rate": float(growth.max()),
    }


def assemble_mode_system(prob: NonlocalProblem, mode: int) -> ModeSystem:
    """Blocks and right-hand sides of the nonlocal system for one mode."""
    sub = _SingleMode(prob, mode)
    plan = _ModePlan(sub)
    fam = prob.family
    f1 = fam.to_eigen(sub.phi_hat)[0]
    f2 = fam.to_eigen(sub.psi_hat)[0]
    g_hat = sub.g_hat()
    if g_hat is not None and np.any(g_hat):
        g_eig = fam.to_eigen(g_hat)
        Ds, Dc = plan.duhamel(g_eig)
        Fa, Fb = plan.forcing_terms(g_eig, Ds, Dc)
        f1, f2 = f1 + Fa[0], f2 + Fb[0]
    return ModeSystem(int(mode), float(prob.grid.xi2[mode]), plan.a11[0], plan.a12[0],
                      plan.a21[0], plan.a22[0], f1, f2, fam)


class _ModeView:
    """Grid stand-in exposing a single Fourier mode."""

    def __init__(self, grid: Grid, mode: int):
        self.parent = grid
        self.xi2 = grid.xi2[mode: mode + 1]
        self.size = 1


class _SingleMode:
    """Lightweight view of a problem restricted to one frequency mode."""

    def __init__(self, prob: NonlocalProblem, mode: int):
        self.grid = _ModeView(prob.grid, mode)
        self.family = prob.family
        self.alpha, self.beta = prob.alpha, prob.beta
        self.K, self.horizon, self.dt, self.times = prob.K, prob.horizon, prob.dt, prob.times
        self.det_fraction = prob.det_fraction
        self.phi_hat = prob.phi_hat[mode: mode + 1]
        self.psi_hat = prob.psi_hat[mode: mode + 1]
        g = prob.g_hat()
        self._g = None if g is None else g[:, mode: mode + 1]

    def g_hat(self):
        return self._g


def solve_mode(sys: ModeSystem, margin: float | None = None, det_fraction: float = 1e-8):
    """Solve the channel-wise 2x2 systems of one mode.

    Returns
    -------
    (u0, u1) : tuple of ndarray
        Initial data in E-coordinates.

    Raises
    ------
    SingularModeSystem
        When ``|det| <= max(1e-14, det_fraction * margin)`` relative to the
        size of the determinant's products.
    """
    det = sys.determinant
    scale = np.maximum(1.0, np.maximum(np.abs(sys.a11 * sys.a22), np.abs(sys.a12 * sys.a21)))
    thresh = max(DET_FLOOR, det_fraction * max(margin or 0.0, 0.0)) * scale
    bad = np.nonzero(np.abs(det) <= thresh)[0]
    if bad.size:
        raise SingularModeSystem([(sys.mode, c, det[c]) for c in bad])
    u0, u1 = _solve_blocks(sys.a11, sys.a12, sys.a21, sys.a22, sys.f1, sys.f2)
    return sys.family.from_eigen(u0), sys.family.from_eigen(u1)


def evaluate_mild(prob: NonlocalProblem, mode: int, u0, u1, t: float):
    """Mild solution ``(u_hat, u_t_hat)`` of one mode at time ``t``.

    ``u0`` and ``u1`` are E-coordinate initial data.  The Duhamel term uses
    the trapezoid rule on the problem time grid (partial last interval if
    ``t`` is off the grid).
    """
    fam = prob.family
    mu2 = fam.eigenvalues + prob.grid.xi2[mode]
    u0e, u1e = fam.to_eigen(u0), fam.to_eigen(u1)
    c, s = cos_kernel(t, mu2), sin_kernel(t, mu2)
    u = c * u0e + s * u1e
    ut = -mu2 * s * u0e + c * u1e
    g_hat = prob.g_hat()
    if g_hat is not None and t > 0:
        g = fam.to_eigen(g_hat[:, mode])
        times = prob.times
        j = _grid_index(t, prob.dt, prob.K)
        if j is not None:
            kern_s = sin_kernel(times[j] - times[: j + 1], mu2)
            kern_c = cos_kernel(times[j] - times[: j + 1], mu2)
            w = np.full(j + 1, prob.dt)
            w[0] = w[-1] = 0.5 * prob.dt
            u = u + _weighted_sum(w, lambda i: kern_s[i] * g[i])
            ut = ut + _weighted_sum(w, lambda i: kern_c[i] * g[i])
        else:
            u = u + _partial_duhamel(sin_kernel, t, times, g, mu2)
            ut = ut + _partial_duhamel(cos_kernel, t, times, g, mu2)
    return fam.from_eigen(u), fam.from_eigen(ut)


def check_invertibility(prob: NonlocalProblem, threads: int = 1) -> dict:
    """Margin, inverse bound and per-mode determinant summary.

    The relation between the per-mode determinant and the margin-based
    operator is reported here, never asserted.
    """
    plan = _ModePlan(prob, threads)
    diag = _diagnostics(plan)
    gap = np.abs(plan.det - plan.operator_O)
    diag.update({
        "determinant_vs_operator_gap": float(gap.max()),
        "product_integral": _complex_or_none(product_integral(prob.alpha, prob.beta)),
        "product_of_totals": _complex_or_none(total(prob.alpha) * total(prob.beta)),
    })
    return diag


def _complex_or_none(z):
    if z is None:
        return None
    z = complex(z)
    return [z.real, z.imag]


def evaluate_all_modes(prob: NonlocalProblem, sol: SolutionTimeline, t: float):
    """``(u_hat, u_t_hat)`` for every mode at time ``t`` in E-coordinates.

    On-grid times return the stored samples; off-grid times re-evaluate the
    mild formula with the solution's initial data and forcing.
    """
    j = _grid_index(t, prob.dt, prob.K)
    if j is not None:
        return sol.u_hat[j], sol.ut_hat[j]
    fam = prob.family
    mu2 = fam.eigenvalues[None, :] + prob.grid.xi2[:, None]
    u0e, u1e = fam.to_eigen(sol.u0), fam.to_eigen(sol.u1)
    c, s = cos_kernel(t, mu2), sin_kernel(t, mu2)
    u = c * u0e + s * u1e
    ut = -mu2 * s * u0e + c * u1e
    g_hat = sol.forcing_hat
    if g_hat is not None and np.any(g_hat):
        g = fam.to_eigen(g_hat)
        u = u + _partial_duhamel(sin_kernel, t, prob.times, g, mu2)
        ut = ut + _partial_duhamel(cos_kernel, t, prob.times, g, mu2)
    return fam.from_eigen(u), fam.from_eigen(ut)

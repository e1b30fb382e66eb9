"""Concrete realizations of the operator ``A`` and its per-mode functions.

Every family stores ``A`` together with an eigendecomposition
``A = V diag(lam) V^{-1}``.  For a Fourier mode with ``|xi|^2 = xi2`` the
shifted operator ``A + xi2`` has eigenvalues ``mu2 = lam + xi2`` and the same
eigenvectors, so cosine, sine and fractional-power functions reduce to
scalar functions of ``mu2`` applied channel-wise in the eigenbasis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.linalg

from .errors import BranchAmbiguityWarning, NlwaveError

SERIES_THRESHOLD = 1e-12
DEFAULT_CONDITION_CAP = 1e8


class OperatorConstructionError(NlwaveError):
    """The requested operator is not diagonalizable within the condition cap."""


# ---------------------------------------------------------------------------
# scalar kernels, even in mu = sqrt(mu2)
# ---------------------------------------------------------------------------

def _broadcast(t, mu2):
    t = np.asarray(t, dtype=float)
    mu2 = np.asarray(mu2, dtype=complex)
    return t.reshape(t.shape + (1,) * mu2.ndim), mu2


def cos_kernel(t, mu2):
    """``cos(t sqrt(mu2))`` with shape ``t.shape + mu2.shape``."""
    t, mu2 = _broadcast(t, mu2)
    return np.cos(t * np.sqrt(mu2))


def sin_kernel(t, mu2):
    """``sin(t sqrt(mu2)) / sqrt(mu2)`` with the removable singularity filled in."""
    t, mu2 = _broadcast(t, mu2)
    mu = np.sqrt(mu2)
    small = np.abs(mu2) < SERIES_THRESHOLD
    safe_mu = np.where(small, 1.0, mu)
    out = np.sin(t * safe_mu) / safe_mu
    if np.any(small):
        series = t - t**3 * mu2 / 6.0 + t**5 * mu2**2 / 120.0
        out = np.where(small, series, out)
    return out


def power_kernel(mu2, gamma: float):
    """Principal-branch ``mu2 ** gamma`` with ``0 ** 0 = 1`` and ``0 ** gamma = 0``."""
    mu2 = np.asarray(mu2, dtype=complex)
    if gamma == 0:
        return np.ones_like(mu2)
    zero = mu2 == 0
    out = np.where(zero, 0.0, np.power(np.where(zero, 1.0, mu2), gamma))
    return out


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """A finite-dimensional operator ``A`` with cached spectral data.

    Use the constructors :func:`scalar`, :func:`diagonal`, :func:`matrix`,
    :func:`rank_one` and :func:`build_wentzell` rather than instantiating
    this class directly.

    Attributes
    ----------
    kind : str
        ``"scalar"``, ``"diagonal"``, ``"matrix"``, ``"rank_one"`` or ``"wentzell"``.
    A : ndarray, shape (N, N)
        Dense matrix of the operator.
    eigenvalues : ndarray, shape (N,)
    V, Vinv : ndarray or None
        Eigenvector matrix and its inverse; ``None`` for diagonal kinds.
    condition : float
        Two-norm condition number of ``V`` (1 for diagonal kinds).
    """

    kind: str
    A: np.ndarray
    eigenvalues: np.ndarray
    V: np.ndarray | None
    Vinv: np.ndarray | None
    condition: float
    meta: dict

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return self.V is None

    def to_eigen(self, v):
        """Coordinates of ``v`` (last axis of length N) in the eigenbasis."""
        v = np.asarray(v, dtype=complex)
        if self.V is None:
            return v
        return np.einsum("...j,ij->...i", v, self.Vinv)

    def from_eigen(self, w):
        """Inverse of :meth:`to_eigen`."""
        w = np.asarray(w, dtype=complex)
        if self.V is None:
            return w
        return np.einsum("...j,ij->...i", w, self.V)

    def apply(self, v):
        """``A v`` along the last axis."""
        v = np.asarray(v, dtype=complex)
        return np.einsum("...j,ij->...i", v, self.A)

    def shifted_eigenvalues(self, xi2: float) -> np.ndarray:
        return self.eigenvalues + float(xi2)

    def mode_functions(self, xi2: float) -> "ModeFunctions":
        return ModeFunctions(float(xi2), self.shifted_eigenvalues(xi2))

    def eigen_apply(self, diag, v):
        """``V diag(diag) V^{-1} v`` for ``v`` with last axis N."""
        return self.from_eigen(np.asarray(diag) * self.to_eigen(v))

    def __repr__(self):
        return f"OperatorFamily(kind={self.kind!r}, N={self.dim}, cond={self.condition:.3g})"


@dataclass(frozen=True)
class ModeFunctions:
    """Channel-wise cosine and sine functions for one Fourier mode."""

    xi2: float
    mu2: np.ndarray

    def c(self, t):
        return cos_kernel(t, self.mu2)

    def s(self, t):
        return sin_kernel(t, self.mu2)

    def growth_rate(self) -> float:
        """Largest exponential rate ``|Im sqrt(mu2)|`` over channels."""
        return float(np.max(np.abs(np.sqrt(self.mu2.astype(complex)).imag)))


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


def _diag_family(kind, d, meta):
    d = np.asarray(d, dtype=complex).ravel()
    A = np.diag(d)
    _freeze(A, d)
    return OperatorFamily(kind, A, d, None, None, 1.0, meta)


def scalar(a: complex) -> OperatorFamily:
    """``A = a`` acting on a one-dimensional space."""
    return _diag_family("scalar", [a], {"a": complex(a)})


def diagonal(d) -> OperatorFamily:
    """``A = diag(d)``."""
    return _diag_family("diagonal", d, {})


def _cluster(lam, tol):
    """Group indices of eigenvalues closer than ``tol`` (relative to magnitude)."""
    order = np.argsort(lam.real + 1e-3 * lam.imag, kind="stable")
    groups, seen = [], set()
    for i in order:
        if i in seen:
            continue
        scale = tol * max(1.0, abs(lam[i]))
        grp = [j for j in order if j not in seen and abs(lam[j] - lam[i]) <= scale]
        seen.update(grp)
        groups.append(sorted(grp))
    return groups


def _finish_matrix(kind, A, lam, V, cap, meta):
    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > cap:
        raise OperatorConstructionError(
            f"{kind} operator is not diagonalizable within the condition cap "
            f"(eigenvector condition {cond:.3e} > {cap:.1e})"
        )
    Vinv = np.linalg.inv(V)
    _freeze(A, lam, V, Vinv)
    return OperatorFamily(kind, A, lam, V, Vinv, cond, meta)


def matrix(A, condition_cap: float = DEFAULT_CONDITION_CAP, kind: str = "matrix", meta=None) -> OperatorFamily:
    """General dense ``A`` with an eigendecomposition.

    Repeated eigenvalues get an orthonormal null-space basis so that
    semisimple multiplicities are represented exactly.  Construction fails
    with :class:`OperatorConstructionError` if the eigenvector condition
    number exceeds ``condition_cap``.
    """
    A = np.array(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("operator matrix must be square")
    lam, V = np.linalg.eig(A)
    scale = max(1.0, float(np.max(np.abs(lam))))
    for grp in _cluster(lam, 1e-8):
        if len(grp) < 2:
            continue
        center = np.mean(lam[grp])
        ns = scipy.linalg.null_space(A - center * np.eye(A.shape[0]), rcond=1e-9 * scale / max(1.0, abs(center)))
        if ns.shape[1] < len(grp):
            raise OperatorConstructionError(
                f"{kind} operator has a defective eigenvalue near {center:.6g} "
                f"(multiplicity {len(grp)}, eigenspace dimension {ns.shape[1]})"
            )
        V[:, grp] = ns[:, : len(grp)]
        lam[grp] = center
    return _finish_matrix(kind, A, lam, V, condition_cap, dict(meta or {}))


def rank_one(g, s: float, q: float = 2.0, sigma: float = 1.0) -> OperatorFamily:
    """Rank-one system ``a_mj = g_m 2^{s j}`` for ``m, j = 1..N``.

    The spectrum is known in closed form: ``w . g`` on ``g`` (with
    ``w_j = 2^{s j}``) and zero on the hyperplane orthogonal to ``w``.
    ``q`` and ``sigma`` are carried as metadata for the sequence-space norms.
    """
    g = np.asarray(g, dtype=complex).ravel()
    N = g.size
    w = 2.0 ** (s * np.arange(1, N + 1))
    A = np.outer(g, w)
    top = complex(w @ g)
    meta = {"g": g.copy(), "s": float(s), "q": float(q), "sigma": float(sigma)}
    if N == 1:
        return _diag_family("rank_one", [top], meta)
    kernel = scipy.linalg.null_space(w[None, :].astype(complex))
    if abs(top) <= 1e-12 * np.linalg.norm(g) * np.linalg.norm(w):
        raise OperatorConstructionError("rank-one operator with w.g = 0 is nilpotent, not diagonalizable")
    V = np.column_stack([g / np.linalg.norm(g), kernel])
    lam = np.zeros(N, dtype=complex)
    lam[0] = top
    return _finish_matrix("rank_one", A, lam, V, DEFAULT_CONDITION_CAP, meta)


def wentzell_matrix(a_samples, b_samples) -> np.ndarray:
    """Finite-difference matrix of ``a u'' + b u'`` on ``M + 1`` nodes of ``[0, 1]``.

    Interior rows use second-order central differences.  Boundary rows are
    zero: the Wentzell condition ``a u'' + b u' = 0`` at ``y = 0, 1`` is the
    value the operator takes there, so boundary nodes evolve under the
    ``x``-part of the equation alone.
    """
    a = np.asarray(a_samples, dtype=float).ravel()
    b = np.asarray(b_samples, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("a and b must be sampled on the same grid")
    M = a.size - 1
    h = 1.0 / M
    A = np.zeros((M + 1, M + 1))
    i = np.arange(1, M)
    A[i, i - 1] = a[i] / h**2 - b[i] / (2 * h)
    A[i, i] = -2.0 * a[i] / h**2
    A[i, i + 1] = a[i] / h**2 + b[i] / (2 * h)
    return A


def wentzell_boundary_residual(a_samples, b_samples, u) -> np.ndarray:
    """``a u'' + b u'`` at ``y = 0`` and ``y = 1`` from one-sided stencils.

    ``u`` has its last axis over the ``M + 1`` nodes.  Used as a diagnostic
    of how well a computed solution satisfies the boundary relation.
    """
    a = np.asarray(a_samples, dtype=float).ravel()
    b = np.asarray(b_samples, dtype=float).ravel()
    u = np.asarray(u)
    h = 1.0 / (a.size - 1)
    d2_0 = (2 * u[..., 0] - 5 * u[..., 1] + 4 * u[..., 2] - u[..., 3]) / h**2
    d2_1 = (2 * u[..., -1] - 5 * u[..., -2] + 4 * u[..., -3] - u[..., -4]) / h**2
    d1_0 = (-3 * u[..., 0] + 4 * u[..., 1] - u[..., 2]) / (2 * h)
    d1_1 = (3 * u[..., -1] - 4 * u[..., -2] + u[..., -3]) / (2 * h)
    return np.stack([a[0] * d2_0 + b[0] * d1_0, a[-1] * d2_1 + b[-1] * d1_1], axis=-1)


def build_wentzell(a_samples, b_samples, M: int | None = None,
                   condition_cap: float = DEFAULT_CONDITION_CAP) -> OperatorFamily:
    """Wentzell-Robin operator ``a u'' + b u'`` on ``[0, 1]`` as a matrix family.

    Parameters
    ----------
    a_samples, b_samples : array_like, length M + 1
        Coefficients sampled at ``y_i = i / M``; ``a`` must be positive.
    M : int, optional
        Interior resolution; inferred from the sample count when omitted.
    """
    a = np.asarray(a_samples, dtype=float).ravel()
    b = np.asarray(b_samples, dtype=float).ravel()
    if M is None:
        M = a.size - 1
    if a.size != M + 1 or b.size != M + 1:
        raise ValueError(f"expected {M + 1} coefficient samples")
    if M < 4:
        raise ValueError("Wentzell resolution M must be at least 4")
    if np.any(a <= 0):
        raise ValueError("Wentzell coefficient a must be positive")
    A = wentzell_matrix(a, b)
    meta = {"a": a.copy(), "b": b.copy(), "M": int(M),
            "integrability": check_wentzell_condition(a, b)}
    return matrix(A, condition_cap=condition_cap, kind="wentzell", meta=meta)


def check_wentzell_condition(a_samples, b_samples) -> float:
    """Trapezoid value of ``int_0^1 exp(-int_{1/2}^y b/a) dy``.

    Always finite on a grid; the magnitude flags coefficient pairs that are
    close to violating the integrability condition.
    """
    a = np.asarray(a_samples, dtype=float).ravel()
    b = np.asarray(b_samples, dtype=float).ravel()
    y = np.linspace(0.0, 1.0, a.size)
    R = scipy.integrate.cumulative_trapezoid(b / a, y, initial=0.0)
    R = R - np.interp(0.5, y, R)
    return float(np.trapezoid(np.exp(-R), y))


# ---------------------------------------------------------------------------
# per-mode operator functions
# ---------------------------------------------------------------------------

def cosine_apply(fam: OperatorFamily, xi2: float, t: float, v):
    """``C(xi, t, A) v``."""
    return fam.eigen_apply(cos_kernel(t, fam.shifted_eigenvalues(xi2)), v)


def sine_apply(fam: OperatorFamily, xi2: float, t: float, v):
    """``S(xi, t, A) v`` with ``S(t) = int_0^t C``."""
    return fam.eigen_apply(sin_kernel(t, fam.shifted_eigenvalues(xi2)), v)


def shifted_apply(fam: OperatorFamily, xi2: float, v):
    """``A_xi v = (A + xi2) v``."""
    return fam.apply(v) + float(xi2) * np.asarray(v, dtype=complex)


def power_apply(fam: OperatorFamily, xi2: float, gamma: float, v, warn: bool = True):
    """``A_xi^gamma v`` on the principal branch, ``gamma`` in ``[0, 1]``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    mu2 = fam.shifted_eigenvalues(xi2)
    if warn and gamma not in (0.0, 1.0):
        tol = 1e-12 * max(1.0, float(np.max(np.abs(mu2))))
        if np.any((np.abs(mu2.imag) <= tol) & (mu2.real < 0)):
            warnings.warn(
                f"A_xi has eigenvalues on the negative real axis at xi2={xi2}; "
                "the principal branch of the fractional power is used",
                BranchAmbiguityWarning, stacklevel=2)
    return fam.eigen_apply(power_kernel(mu2, gamma), v)


"""Periodic spatial grids, E-valued fields and the norms used by the monitors.

Fields are stored as complex arrays of shape ``(modes, N)`` where ``modes``
is the flattened (C-order) grid and ``N`` the dimension of the value space.
Transforms are unitary (``norm="ortho"``) so Parseval holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .errors import TagMismatch

PHYSICAL = "physical"
FREQUENCY = "frequency"


@dataclass(frozen=True)
class NormSpec:
    """Norm parameters: Sobolev order ``s``, integrability ``p``, inner ``l_q``
    exponent ``q`` and optional inner weight exponent ``sigma``."""

    s: float = 1.0
    p: float = 2.0
    q: float = 2.0
    sigma: float | None = None

    def __post_init__(self):
        if not (self.p >= 1 and self.q >= 1):
            raise ValueError("norm exponents p and q must be at least 1")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid on ``[0, length)^dim``.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 to 3.
    points : int
        Points per axis, a power of two no smaller than 8.
    length : float
        Box side length ``L``.
    """

    dim: int
    points: int
    length: float
    wavenumbers: np.ndarray = field(init=False, repr=False)
    xi2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("grid dimension must be 1, 2 or 3")
        n = int(self.points)
        if n < 8 or n & (n - 1):
            raise ValueError("points per axis must be a power of two >= 8")
        if not self.length > 0:
            raise ValueError("box length must be positive")
        object.__setattr__(self, "points", n)
        object.__setattr__(self, "length", float(self.length))
        k = 2 * np.pi * np.fft.fftfreq(n, d=1.0 / n) / self.length
        k.setflags(write=False)
        object.__setattr__(self, "wavenumbers", k)
        mesh = np.meshgrid(*([k] * self.dim), indexing="ij")
        xi2 = sum(m**2 for m in mesh).ravel()
        xi2.setflags(write=False)
        object.__setattr__(self, "xi2", xi2)

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points**self.dim

    @property
    def spacing(self) -> float:
        return self.length / self.points

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def axis(self) -> np.ndarray:
        return np.arange(self.points) * self.spacing

    def coordinates(self) -> list[np.ndarray]:
        """Flattened coordinate arrays, one per axis, each of length :attr:`size`."""
        mesh = np.meshgrid(*([self.axis()] * self.dim), indexing="ij")
        return [m.ravel() for m in mesh]

    def mode_vectors(self) -> np.ndarray:
        """Wavevectors of all modes, shape ``(size, dim)``."""
        mesh = np.meshgrid(*([self.wavenumbers] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def dealias_mask(self) -> np.ndarray:
        """Boolean mask keeping modes with ``|m| < points / 3`` on every axis."""
        m = np.abs(np.fft.fftfreq(self.points, d=1.0 / self.points))
        keep = m < self.points / 3.0
        mesh = np.meshgrid(*([keep] * self.dim), indexing="ij")
        return np.logical_and.reduce([x.ravel() for x in mesh])

    def boundary_mask(self) -> np.ndarray:
        """Points in the outermost layer of the box (first and last index per axis)."""
        idx = np.arange(self.points)
        edge = (idx == 0) | (idx == self.points - 1)
        mesh = np.meshgrid(*([edge] * self.dim), indexing="ij")
        return np.logical_or.reduce([x.ravel() for x in mesh])

    def describe(self) -> dict:
        return {"dim": self.dim, "points": self.points, "length": self.length}


def fft_forward(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Unitary forward transform of ``(..., size, N)`` arrays over the space axes."""
    values = np.asarray(values, dtype=complex)
    lead = values.shape[:-2]
    N = values.shape[-1]
    arr = values.reshape(lead + grid.shape + (N,))
    axes = tuple(range(len(lead), len(lead) + grid.dim))
    out = scipy.fft.fftn(arr, axes=axes, norm="ortho", workers=1)
    return out.reshape(lead + (grid.size, N))


def fft_inverse(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft_forward`."""
    values = np.asarray(values, dtype=complex)
    lead = values.shape[:-2]
    N = values.shape[-1]
    arr = values.reshape(lead + grid.shape + (N,))
    axes = tuple(range(len(lead), len(lead) + grid.dim))
    out = scipy.fft.ifftn(arr, axes=axes, norm="ortho", workers=1)
    return out.reshape(lead + (grid.size, N))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """An E-valued field on a grid, tagged with its representation."""

    grid: Grid
    values: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != self.grid.size:
            raise ValueError(f"field values must have shape ({self.grid.size}, N), got {vals.shape}")
        if self.space not in (PHYSICAL, FREQUENCY):
            raise ValueError(f"unknown representation {self.space!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def N(self) -> int:
        return self.values.shape[1]

    @classmethod
    def zeros(cls, grid: Grid, N: int, space: str = PHYSICAL) -> "SpectralField":
        return cls(grid, np.zeros((grid.size, N), dtype=complex), space)

    def _check(self, other: "SpectralField"):
        if other.grid is not self.grid and other.grid.describe() != self.grid.describe():
            raise ValueError("fields live on different grids")
        if other.N != self.N:
            raise ValueError("fields have different value dimensions")
        if other.space != self.space:
            raise TagMismatch("cannot combine physical and frequency fields")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.values + other.values, self.space)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.values - other.values, self.space)

    def __mul__(self, c) -> "SpectralField":
        return SpectralField(self.grid, self.values * complex(c), self.space)

    __rmul__ = __mul__

    def physical(self) -> "SpectralField":
        return self if self.space == PHYSICAL else inverse(self)

    def frequency(self) -> "SpectralField":
        return self if self.space == FREQUENCY else forward(self)


def forward(f: SpectralField) -> SpectralField:
    """Physical to frequency representation."""
    if f.space != PHYSICAL:
        raise TagMismatch("forward transform expects a physical field")
    return SpectralField(f.grid, fft_forward(f.grid, f.values), FREQUENCY)


def inverse(f: SpectralField) -> SpectralField:
    """Frequency to physical representation."""
    if f.space != FREQUENCY:
        raise TagMismatch("inverse transform expects a frequency field")
    return SpectralField(f.grid, fft_inverse(f.grid, f.values), PHYSICAL)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def lq_norm(v, q: float = 2.0):
    """``(sum_j |v_j|^q)^{1/q}`` over the last axis; ``q = inf`` gives the max."""
    a = np.abs(np.asarray(v))
    if np.isinf(q):
        return np.max(a, axis=-1)
    return np.sum(a**q, axis=-1) ** (1.0 / q)


def lq_sigma_norm(v, q: float, sigma: float):
    """``(sum_j 2^{sigma j} |v_j|^q)^{1/q}`` with ``j = 1..N`` over the last axis."""
    a = np.abs(np.asarray(v))
    if np.isinf(q):
        return np.max(a, axis=-1)
    w = 2.0 ** (sigma * np.arange(1, a.shape[-1] + 1))
    return np.sum(w * a**q, axis=-1) ** (1.0 / q)


def inner_norm(v, q: float = 2.0, sigma: float | None = None):
    """Pointwise norm in the value space ``E``."""
    return lq_norm(v, q) if sigma is None else lq_sigma_norm(v, q, sigma)


def lp_norm(grid: Grid, values, p: float, q: float = 2.0, sigma: float | None = None):
    """Discrete ``L^p(E)`` norm of ``(..., size, N)`` physical values.

    Cell-volume weighted; ``p = inf`` is the grid maximum of the pointwise
    E-norm.  Leading axes are preserved.
    """
    pointwise = inner_norm(values, q, sigma)
    if np.isinf(p):
        return np.max(pointwise, axis=-1)
    return (np.sum(pointwise**p, axis=-1) * grid.cell_volume) ** (1.0 / p)


def bessel_multiplier(grid: Grid, s: float) -> np.ndarray:
    """``(1 + |xi|^2)^{s/2}`` per mode."""
    return (1.0 + grid.xi2) ** (0.5 * s)


def sobolev_norm_hat(grid: Grid, values_hat, s: float, p: float,
                     q: float = 2.0, sigma: float | None = None):
    """``H^{s,p}`` norm from frequency values of shape ``(..., size, N)``."""
    values_hat = np.asarray(values_hat)
    mult = bessel_multiplier(grid, s)[:, None]
    return lp_norm(grid, fft_inverse(grid, values_hat * mult), p, q, sigma)


def sobolev_norm(f: SpectralField, s: float, p: float, q: float = 2.0, sigma: float | None = None) -> float:
    """Bessel-potential norm ``||(I - Delta)^{s/2} f||_{L^p}``."""
    if s == 0:
        return float(lp_norm(f.grid, f.physical().values, p, q, sigma))
    return float(sobolev_norm_hat(f.grid, f.frequency().values, s, p, q, sigma))


def y_norm(timeline, family, s: float, p: float, q: float = 2.0, sigma: float | None = None) -> float:
    """Solution-space norm used for the Picard stopping rule.

    ``max_t ||u(t)||_{H^{s,p}} + max_t sup_x ||A u(x, t)||_E`` over the
    stored time samples.  ``timeline`` needs ``grid``, ``u`` (physical,
    shape ``(K+1, size, N)``) and ``u_hat``.
    """
    return y_norm_arrays(timeline.grid, timeline.u, timeline.u_hat, family, s, p, q, sigma)


def y_norm_parts(grid, u, u_hat, family, s, p, q=2.0, sigma=None):
    """Per-time values whose maxima add up to the solution-space norm.

    Returns an array of shape ``(2, K+1)``: Sobolev part and sup-of-``Au`` part.
    The norm is ``parts[0].max() + parts[1].max()``, computed by callers.
    """
    sob = sobolev_norm_hat(grid, u_hat, s, p, q, sigma) if s != 0 else lp_norm(grid, u, p, q, sigma)
    au = lp_norm(grid, family.apply(u), np.inf, q, sigma)
    return np.stack([np.atleast_1d(sob), np.atleast_1d(au)])


def y_norm_arrays(grid, u, u_hat, family, s, p, q=2.0, sigma=None) -> float:
    parts = y_norm_parts(grid, u, u_hat, family, s, p, q, sigma)
    return float(parts[0].max() + parts[1].max())

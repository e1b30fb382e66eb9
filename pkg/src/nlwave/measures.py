"""Signed time measures used as weights in the nonlocal initial conditions.

A measure on ``[0, T]`` is a finite set of Dirac atoms plus an optional
density sampled on a uniform grid.  Densities are integrated with the
trapezoidal rule, atoms exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True, eq=False)
class TimeMeasure:
    """Atoms plus a trapezoid-integrated density on ``[0, horizon]``.

    Parameters
    ----------
    horizon : float
        Right end ``T`` of the support window.
    atoms : sequence of (location, weight)
        Dirac masses; locations must lie in ``[0, horizon]``.
    density : array_like, optional
        Complex samples at ``linspace(0, horizon, n)`` with ``n >= 2``.
    """

    horizon: float
    atoms: tuple = ()
    density: np.ndarray | None = None
    _nodes: np.ndarray = field(init=False, repr=False)
    _weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        T = float(self.horizon)
        if not np.isfinite(T) or T <= 0:
            raise ValueError(f"measure horizon must be positive, got {self.horizon!r}")
        object.__setattr__(self, "horizon", T)

        atoms = []
        for loc, w in self.atoms:
            loc = float(loc)
            if not (0.0 <= loc <= T):
                raise ValueError(f"atom location {loc} outside [0, {T}]")
            atoms.append((loc, complex(w)))
        object.__setattr__(self, "atoms", tuple(atoms))

        dens = None
        if self.density is not None:
            dens = np.array(self.density, dtype=complex).ravel()
            if dens.size < 2:
                raise ValueError("density needs at least two samples")
            dens.setflags(write=False)
        object.__setattr__(self, "density", dens)

        nodes = [a[0] for a in atoms]
        weights = [a[1] for a in atoms]
        if dens is not None:
            t = np.linspace(0.0, T, dens.size)
            h = T / (dens.size - 1)
            trap = np.full(dens.size, h)
            trap[0] = trap[-1] = 0.5 * h
            nodes.extend(t.tolist())
            weights.extend((trap * dens).tolist())
        nodes = np.asarray(nodes, dtype=float)
        weights = np.asarray(weights, dtype=complex)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_weights", weights)

    @classmethod
    def zero(cls, horizon: float) -> "TimeMeasure":
        return cls(horizon)

    @classmethod
    def from_atoms(cls, horizon: float, atoms: Sequence) -> "TimeMeasure":
        return cls(horizon, tuple(atoms))

    @classmethod
    def from_density(cls, horizon: float, samples, atoms: Sequence = ()) -> "TimeMeasure":
        return cls(horizon, tuple(atoms), np.asarray(samples))

    @property
    def is_zero(self) -> bool:
        return self._nodes.size == 0 or not np.any(self._weights)

    @property
    def nodes(self) -> np.ndarray:
        """Quadrature nodes: atom locations first, then density sample times."""
        return self._nodes

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights matching :attr:`nodes`."""
        return self._weights

    def density_times(self) -> np.ndarray | None:
        if self.density is None:
            return None
        return np.linspace(0.0, self.horizon, self.density.size)

    def scaled(self, factor: complex) -> "TimeMeasure":
        dens = None if self.density is None else self.density * factor
        return TimeMeasure(self.horizon, tuple((l, w * factor) for l, w in self.atoms), dens)

    def __repr__(self):
        nd = 0 if self.density is None else self.density.size
        return f"TimeMeasure(T={self.horizon:g}, atoms={len(self.atoms)}, density_samples={nd})"


def total(m: TimeMeasure) -> complex:
    """Integral of the constant one against ``m``."""
    return complex(np.sum(m.weights)) if m.weights.size else 0j


def absolute_total(m: TimeMeasure) -> float:
    """Total variation: sum of atom moduli plus trapezoid of ``|density|``."""
    s = sum(abs(w) for _, w in m.atoms)
    if m.density is not None:
        s += float(np.trapezoid(np.abs(m.density), m.density_times()))
    return float(s)


def integrate_kernel(m: TimeMeasure, kernel: Callable[[np.ndarray], np.ndarray]):
    """Integrate a vectorized kernel against ``m``.

    Parameters
    ----------
    m : TimeMeasure
    kernel : callable
        Receives a 1-D array of times and returns an array whose leading
        axis runs over those times.  The trailing shape is the value type.

    Returns
    -------
    numpy.ndarray or complex
        ``sum_i w_i K(t_i)``.  For the zero measure this is the zero element
        of the kernel's value type.
    """
    nodes = m.nodes
    if nodes.size == 0:
        probe = np.asarray(kernel(np.zeros(1)))
        out = np.zeros(probe.shape[1:], dtype=np.result_type(probe.dtype, complex))
        return out[()] if out.ndim == 0 else out
    vals = np.asarray(kernel(nodes))
    if vals.shape[:1] != nodes.shape:
        raise ValueError("kernel must return an array with a leading axis over the time nodes")
    out = np.einsum("i,i...->...", m.weights, vals)
    return out[()] if np.ndim(out) == 0 else out


def invertibility_margin(alpha: TimeMeasure, beta: TimeMeasure) -> float:
    """Sufficient-condition margin for the nonlocal operator to be invertible.

    Returns ``|1 + total(alpha) total(beta)| - (|alpha| + |beta|)`` where
    ``|.|`` is the total variation.  A positive value ``m`` certifies an
    inverse bounded by ``1/m``.  Negative values are returned as-is.
    """
    return abs(1.0 + total(alpha) * total(beta)) - (absolute_total(alpha) + absolute_total(beta))


def inverse_bound(margin: float) -> float | None:
    """The inverse-norm bound ``1/margin``; ``None`` when the margin is not positive."""
    return 1.0 / margin if margin > 0 else None


def product_integral(alpha: TimeMeasure, beta: TimeMeasure) -> complex | None:
    """Single integral of the pointwise product ``alpha * beta``.

    Only defined here when both measures are pure densities on matching
    sample grids; otherwise ``None``.  Reported as a diagnostic next to
    the product of totals used by :func:`invertibility_margin`.
    """
    if alpha.atoms or beta.atoms or alpha.density is None or beta.density is None:
        return None
    if alpha.density.size != beta.density.size or alpha.horizon != beta.horizon:
        return None
    return complex(np.trapezoid(alpha.density * beta.density, alpha.density_times()))

"""Exception and warning types raised by the solvers and the CLI."""

from __future__ import annotations


class NlwaveError(Exception):
    """Base class for all package errors."""


class ConfigError(NlwaveError):
    """A scenario file failed to parse or validate.

    Parameters
    ----------
    message : str
        Human-readable description.
    field : str, optional
        Dotted path of the offending key.
    line : int, optional
        Line number in the scenario file, when known.
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class TagMismatch(NlwaveError):
    """A field was passed in the wrong representation (physical vs frequency)."""


class SingularModeSystem(NlwaveError):
    """The per-mode 2x2 nonlocal system is singular for at least one mode.

    Attributes
    ----------
    offenders : list of (mode, channel, determinant)
        Every mode/channel pair whose determinant failed the threshold.
    """

    def __init__(self, offenders):
        self.offenders = [(int(m), int(c), complex(d)) for m, c, d in offenders]
        mode, channel, det = self.offenders[0]
        self.mode, self.channel, self.determinant = mode, channel, det
        more = f" (+{len(self.offenders) - 1} more)" if len(self.offenders) > 1 else ""
        super().__init__(
            f"nonlocal conditions are resonant at mode {mode}, channel {channel}: "
            f"|det| = {abs(det):.3e}{more}"
        )


class NonContraction(NlwaveError):
    """Picard ratios stayed at or above one for too many iterations."""

    def __init__(self, rhos, message: str | None = None):
        self.rhos = [float(r) for r in rhos]
        super().__init__(message or f"Picard iteration is not contracting; last ratios {self.rhos[-5:]}")


class BlowupSuspected(NlwaveError):
    """An iterate crossed the configured norm ceiling or became non-finite."""

    def __init__(self, norm: float, ceiling: float, iteration: int):
        self.norm = float(norm)
        self.ceiling = float(ceiling)
        self.iteration = int(iteration)
        super().__init__(
            f"solution norm {self.norm:.3e} exceeded ceiling {self.ceiling:.3e} at iteration {iteration}"
        )


class WindowExceeded(NlwaveError):
    """The requested horizon is longer than the contraction window allows."""

    def __init__(self, T_user: float, T_window: float):
        self.T_user = float(T_user)
        self.T_window = float(T_window)
        super().__init__(
            f"requested horizon T={T_user:g} exceeds the contraction window {T_window:.6g}; "
            "shorten the horizon (the nonlocal conditions live on [0, T]), reduce the data size, "
            "or set picard.enforce_window=false to attempt the iteration anyway"
        )


class BranchAmbiguityWarning(UserWarning):
    """A fractional power was requested at an eigenvalue on the negative real axis."""


class GridLeakWarning(UserWarning):
    """Data does not decay near the box boundary, so periodization is visible."""

"""Exception hierarchy shared by all qrdyn modules."""

from __future__ import annotations


class QrdynError(Exception):
    """Base class; the CLI maps every subclass to exit status 1."""


class DomainError(QrdynError, ValueError):
    """Input lies outside the domain of the requested map."""


class DegenerateMapError(QrdynError, ValueError):
    """Linear map is singular (|det| below the degeneracy threshold)."""


class BranchError(QrdynError, ValueError):
    """Requested inverse branch cannot contain the given image point."""


class TruncationError(QrdynError, ArithmeticError):
    """An iteration left floating range; carries the last finite state."""

    def __init__(self, message: str, last=None, steps: int | None = None):
        super().__init__(message)
        self.last = last
        self.steps = steps


class AnalysisError(QrdynError, RuntimeError):
    """Spectral analysis failed; ``fallback`` holds the profile-only verdict."""

    def __init__(self, message: str, fallback=None):
        super().__init__(message)
        self.fallback = fallback


class EstimateFailure(QrdynError, RuntimeError):
    """Too many samples were dropped to produce a trustworthy estimate."""

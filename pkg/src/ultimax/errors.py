"""Exception types raised across the package."""

from __future__ import annotations


class UltimaxError(Exception):
    """Base class for all package errors."""


class DomainError(UltimaxError, ValueError):
    """An argument lies outside the domain of a function."""


class RegimeError(UltimaxError):
    """The model parameters fall in a regime where the requested object is undefined.

    ``regime`` carries the regime name that *does* apply, so callers can
    point the user to the closed-form answer instead.
    """

    def __init__(self, message: str, regime: str | None = None):
        super().__init__(message)
        self.regime = regime


class BracketError(UltimaxError):
    """No sign change was found for a root search below the growth cap."""


class MissingCurve(UltimaxError):
    """A boundary curve is required for the boundary regime but was not supplied."""


class ResourceError(UltimaxError):
    """A request would exceed the configured memory budget."""

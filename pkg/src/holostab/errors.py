"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class HolostabError(Exception):
    """Base class for all library errors."""


class InvalidInputError(HolostabError, ValueError):
    """Non-finite entries, wrong shapes or violated type invariants."""


class DimensionError(InvalidInputError):
    pass


class CompositionError(InvalidInputError):
    """Paths or loops that cannot be joined (endpoint / base-point mismatch)."""


class UnsupportedSurfaceError(InvalidInputError):
    pass


class DegeneracyLostError(HolostabError):
    pass


class GaugeAlignmentError(HolostabError):
    pass


class ConvergenceError(HolostabError):
    """Step-doubling refinement did not reach the requested tolerance.

    ``estimate`` holds the finest product computed and ``distance`` the last
    step-doubling difference.
    """

    def __init__(self, message, estimate=None, distance=None):
        super().__init__(message)
        self.estimate = estimate
        self.distance = distance


class SelfCheckError(HolostabError):
    """An internal consistency check (two independent routes) disagreed."""

"""Exception types raised across the package."""


class OscillaError(Exception):
    """Base class for package errors."""


class DomainError(OscillaError, ValueError):
    """A point or coordinate lies outside the region it must belong to."""


class MeshError(OscillaError, ValueError):
    """Invalid mesh parameters or inconsistent mesh data."""


class ConvergenceError(OscillaError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class CompatibilityError(OscillaError, RuntimeError):
    """A singular problem's right-hand side violates its solvability condition."""

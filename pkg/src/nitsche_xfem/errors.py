"""Exception types raised across the package."""

from __future__ import annotations


class XFEMError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(XFEMError, ValueError):
    """Invalid run configuration or an operation requested outside its limits."""


class NotPositiveDefiniteError(XFEMError, ArithmeticError):
    """A matrix expected to be SPD failed a factorization or eigenvalue check."""


class DegenerateElementError(XFEMError):
    """A cut element produced a singular local problem."""

    def __init__(self, message: str, element: int | None = None):
        super().__init__(message if element is None else f"element {element}: {message}")
        self.element = element


class GeometryError(XFEMError):
    """Unsupported interface configuration (e.g. two interfaces in one element)."""


class ConvergenceError(XFEMError):
    """An iterative method stopped before reaching its tolerance."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report

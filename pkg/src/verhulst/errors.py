"""Exceptions shared by the numerical modules."""


class DomainError(ValueError):
    """Argument outside the supported numerical domain."""


class ConvergenceError(RuntimeError):
    """A quadrature failed to meet its tolerance within budget."""

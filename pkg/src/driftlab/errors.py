"""Shared exception types."""


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its declared tolerances."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge within its evaluation budget."""

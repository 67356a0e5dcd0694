"""Exception types raised by dptune."""


class DomainError(ValueError):
    """An argument lies outside the domain where the bound is defined."""


class GridMismatchError(ValueError):
    """Curves that must share a grid of Rényi orders do not."""


class MissingOrderError(DomainError):
    """A bound needs an order the supplied curve does not carry."""


class NonConvergenceError(RuntimeError):
    """Two quadrature refinements disagreed beyond the tolerance."""


class NoSolutionError(RuntimeError):
    """A calibration target cannot be met inside the search bracket."""

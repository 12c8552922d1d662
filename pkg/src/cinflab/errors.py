"""Exception hierarchy shared by every module of the package."""


class CinfLabError(Exception):
    """Base class for errors raised by :mod:`cinflab`."""


class DomainError(CinfLabError, ValueError):
    """An argument lies outside the domain of the operation."""


class PoleError(DomainError):
    """A transform was evaluated exactly at one of its poles."""


class SingularConfigurationError(CinfLabError, ArithmeticError):
    """The masked complement basis is rank deficient.

    Under Haar sampling this happens with probability zero, but the
    certificate is undefined when it does, so it is detected and reported.
    """


class FptSolverError(CinfLabError, RuntimeError):
    """Root search for the G-transform system did not produce a valid state."""

    def __init__(self, message, last_residual=None, grid_index=None, x=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.grid_index = grid_index
        self.x = x

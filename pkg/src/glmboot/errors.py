"""Exception hierarchy shared by the solvers, harnesses and CLI."""


class GlmBootError(Exception):
    """Base class for all package errors."""


class ConfigError(GlmBootError, ValueError):
    """Invalid configuration, family name or option."""


class DataError(GlmBootError, ValueError):
    """Dataset violates a structural or family-specific invariant."""


class NumericalError(GlmBootError, ArithmeticError):
    """Numerical failure: overflow, singular system, non-convergence."""


class DomainOverflowError(NumericalError):
    """Linear predictor left the range where the link functions are finite."""


class SingularMatrixError(NumericalError):
    """A matrix that must be inverted is (numerically) singular."""

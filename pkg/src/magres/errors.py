"""Exception hierarchy shared by all magres modules."""


class MagresError(Exception):
    """Base class for toolkit errors."""


class DomainError(MagresError, ValueError):
    """An argument lies outside the domain of an operation."""


class DimensionError(MagresError, ValueError):
    """Array shapes do not agree."""


class DegenerateScaleError(DomainError):
    """Weight matrix is all zero, so no conductance scale can be derived."""


class TopologyError(MagresError):
    """Random topology generation failed (e.g. nilpotent recurrent matrix)."""


class SingularSystemError(MagresError, ArithmeticError):
    """Normal equations are singular; use a positive ridge parameter."""


class DegenerateChannelError(MagresError, ArithmeticError):
    """Channel output equals its input, so the symbol recovery rate is undefined."""


class NumericalBlowupError(MagresError, ArithmeticError):
    """A simulated quantity became non-finite."""


class ConfigError(MagresError):
    """Invalid or unreadable experiment configuration."""


class ConvergenceWarning(RuntimeWarning):
    """Iterative estimate stopped before meeting its tolerance."""

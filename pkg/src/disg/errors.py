"""Exception types raised across the package."""


class DisgError(Exception):
    """Base class for all package errors."""


class ModelError(DisgError, ValueError):
    """A Markov model or belief violates a structural invariant."""

    def __init__(self, message, *, where=None):
        super().__init__(message)
        self.where = where


class NonStochasticRow(ModelError):
    pass


class NegativeEntry(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class InvalidBelief(ModelError):
    pass


class ZeroLikelihood(DisgError, ValueError):
    """The observed data has probability zero under the current belief."""


class SignalActionMismatch(DisgError, ValueError):
    """A signal disagrees with the sender's action (Obs needs a=1, epsilon needs a=0)."""


class GridMismatch(DisgError, ValueError):
    pass


class ResolutionTooLarge(DisgError, ValueError):
    pass


class OracleViolation(DisgError, AssertionError):
    """The greedy region escaped the opponent region; indicates a solver bug."""


class EnumerationTooLarge(DisgError, ValueError):
    pass


class UnsupportedDimension(DisgError, ValueError):
    pass


class ConfigError(DisgError, ValueError):
    pass

"""Exception hierarchy shared by every module."""


class MechanismError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(MechanismError, ValueError):
    """A constructed value violates one of its invariants."""


class PreconditionError(ParameterError):
    """An operation was called outside its documented domain."""


class DimensionError(ParameterError):
    """Two vectors that must share a length do not."""


class AssumptionError(MechanismError):
    """The loss-gap assumption Theta > kappa1 * Lambda does not hold."""


class EmptyCohortError(MechanismError):
    """A quantity that needs at least one participant was asked for an empty cohort."""


class NumericError(MechanismError, ArithmeticError):
    """Divergence, non-convergence or a division by a vanishing probability."""


class ConfigError(MechanismError):
    """A scenario file failed to parse or validate.

    ``problems`` lists every violated invariant so callers can report them at once.
    """

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [])

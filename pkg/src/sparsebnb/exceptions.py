"""Exception types raised by the solver layers."""


class SparseBnbError(Exception):
    """Base class for all package errors."""


class InfeasibleFixation(SparseBnbError, ValueError):
    """A coordinate fixed to zero carries a nonzero coefficient."""


class NumericalFailure(SparseBnbError, ArithmeticError):
    """A factorization that must succeed did not (corrupted data)."""


class IterationLimit(SparseBnbError, RuntimeWarning):
    """An iterative method stopped at its iteration cap.

    Solvers never raise this; they flag the result instead. It exists so
    callers can escalate with ``warnings.simplefilter("error", IterationLimit)``.
    """


class NoFractional(SparseBnbError, ValueError):
    """No free coordinate has a fractional relaxation value."""


class TooLarge(SparseBnbError, ValueError):
    """Instance exceeds the size an exhaustive oracle can handle."""


class InvalidSpec(SparseBnbError, ValueError):
    """Synthetic instance parameters are out of range."""


class ParseError(SparseBnbError, ValueError):
    """Malformed numeric CSV input."""


class DimensionMismatch(SparseBnbError, ValueError):
    """Design matrix and response disagree in length."""

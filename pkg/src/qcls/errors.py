"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Matrix or vector dimensions are inconsistent."""


class LayoutError(ValueError):
    """A register layout does not match the operation being applied."""


class PreconditionError(ValueError):
    """A documented precondition of an operation was violated."""


class InputError(ValueError):
    """Bad user-facing input (files, configs, degenerate vectors)."""


class ContractError(RuntimeError):
    """A runtime contract check failed (e.g. out-of-band spectral weight)."""


class NumericError(RuntimeError):
    """A numeric routine failed to converge or lost too much precision."""


class SynthesisError(RuntimeError):
    """Phase synthesis could not meet the requested tolerance.

    Carries the best error actually achieved so callers can report it.
    """

    def __init__(self, message, achieved_error=None, degree=None):
        super().__init__(message)
        self.achieved_error = achieved_error
        self.degree = degree


class InfeasibleError(RuntimeError):
    """The requested solve is infeasible (e.g. b orthogonal to col(A))."""


class ContractWarning(UserWarning):
    """An input violated a soft contract; the result may be degraded."""

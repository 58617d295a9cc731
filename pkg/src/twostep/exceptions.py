"""Exception types shared across the package."""


class TwoStepError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(TwoStepError, ValueError):
    pass


class SingularMatrix(TwoStepError, ArithmeticError):
    pass


class InvalidSize(TwoStepError, ValueError):
    pass


class DomainExceeded(TwoStepError, ValueError):
    pass


class NoRoot(TwoStepError, ArithmeticError):
    pass


class CriterionViolated(TwoStepError, ValueError):
    pass


class NotApplicable(TwoStepError):
    """Raised when a quantity is undefined, e.g. H* at the boundary beta == b."""


class InsufficientData(TwoStepError, ValueError):
    pass


class SingularJacobian(TwoStepError, ArithmeticError):
    """The Jacobian could not be factored at outer iteration ``k``.

    The partial trace up to (but excluding) iteration ``k`` is attached.
    """

    def __init__(self, k, trace=None):
        super().__init__(f"singular Jacobian at iteration {k}")
        self.k = k
        self.trace = trace


class SingularSchur(SingularJacobian):
    def __init__(self, k, trace=None):
        super().__init__(k, trace)
        self.args = (f"singular Schur complement at iteration {k}",)


class MaxIterations(TwoStepError, RuntimeError):
    def __init__(self, max_iter, trace=None):
        super().__init__(f"no convergence within {max_iter} iterations")
        self.max_iter = max_iter
        self.trace = trace

"""Exception hierarchy.

Input problems derive from :class:`SpecError` (a ``ValueError``) and map to
CLI exit code 2. Failed certificates derive from :class:`CertificateError`
and map to exit code 3.
"""


class SpecError(ValueError):
    """Malformed or out-of-domain input."""


class ReducibleChainError(SpecError):
    """The chain has more than one closed communicating class."""

    def __init__(self, message, classes=()):
        super().__init__(message)
        self.classes = [list(c) for c in classes]


class InfeasibleError(SpecError):
    """A threshold condition of a bound (feasible k, kappa, ...) is violated."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class CertificateError(RuntimeError):
    """A certificate an operation depends on does not hold."""


class PropertyMError(CertificateError):
    """The semigroup identity fails at some depth."""

    def __init__(self, message, depth=None, gap=None):
        super().__init__(message)
        self.depth = depth
        self.gap = gap


class BoundViolationError(CertificateError):
    """An empirical lower confidence limit exceeds a theoretical bound."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row

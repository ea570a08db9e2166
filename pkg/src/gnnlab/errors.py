"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: bad grid sizes, malformed specs, out-of-range parameters."""


class OutOfDomainError(ValidationError):
    """Query point lies outside the closed unit disk (beyond the clamp tolerance)."""


class GridMismatchError(ValidationError):
    """Field and problem live on different grids."""


class SingularJacobianError(RuntimeError):
    """The linearized system could not be solved; reported distinctly from
    plain non-convergence so callers can tell the two failure modes apart."""


class SolverFailure(RuntimeError):
    """A solve did not reach the requested tolerance (carries the report)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report

"""Exception types shared across the solver suite."""


class ConvergenceError(RuntimeError):
    """An iteration ran out of its budget before reaching tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IndefiniteOperatorError(RuntimeError):
    """A conjectured positive-definite operator produced non-positive curvature.

    Raised by the inner conjugate-gradient solve instead of silently
    returning garbage; it falsifies the positivity assumption for the
    parameters at hand and should be reported, not swallowed.
    """


class NullspaceVerificationError(RuntimeError):
    """A constructed nullspace vector failed its residual check."""

    def __init__(self, message, defect=None):
        super().__init__(message)
        self.defect = defect


class StructureViolationError(RuntimeError):
    """The computed spectrum violated the expected real, paired structure."""


class PartialResultError(ConvergenceError):
    """The eigensolver stalled; carries whatever modes did converge."""

    def __init__(self, message, modes=None, residual=None):
        super().__init__(message, residual=residual)
        self.modes = modes if modes is not None else []

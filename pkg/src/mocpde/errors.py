"""Exception types raised across the package."""


class MocPdeError(ValueError):
    """Base class for all errors raised by mocpde."""


class DimensionError(MocPdeError):
    pass


class SymmetryError(MocPdeError):
    pass


class DomainError(MocPdeError):
    """Argument outside the domain of a closed-form function (poles, t <= 0, ...)."""


class CFLError(MocPdeError):
    pass


class SolverError(MocPdeError):
    """Non-finite values produced by a time step.

    ``location`` holds the first offending node index.
    """

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class HypothesisError(MocPdeError):
    """The comparison target does not dominate the initial modulus."""


class EvaluationError(MocPdeError):
    """Operator evaluation failed during a structure check; carries the tuple."""

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample

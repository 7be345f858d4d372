class PerturbEulerError(Exception):
    """Base class for all errors raised by this package."""


class EvaluationError(PerturbEulerError, ArithmeticError):
    """A right-hand side or field evaluation produced a non-finite value."""


class InvalidTolerance(PerturbEulerError, ValueError):
    pass


class StepSizeUnderflow(PerturbEulerError):
    """The step size fell to machine scale with no collapse in sight."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NotABlowupTrajectory(PerturbEulerError, ValueError):
    pass


class NotABlowupSeed(PerturbEulerError, ValueError):
    pass


class QuadratureFailure(PerturbEulerError):
    pass


class DomainError(PerturbEulerError, ValueError):
    pass


class NegativeRadius(DomainError):
    pass


class GridOutsideSupport(PerturbEulerError, ValueError):
    pass


class BlowupInsideRange(PerturbEulerError, ValueError):
    pass


class VacuumOnGrid(PerturbEulerError, ValueError):
    pass


class UnboundedSupport(PerturbEulerError, ValueError):
    pass

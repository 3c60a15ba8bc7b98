"""Exception types raised across the package."""


class ContractViolation(ValueError):
    """An argument broke an operation's precondition."""


class NotPositiveDefinite(ContractViolation):
    pass


class NotStronglyConvex(ContractViolation):
    pass


class RankDeficient(ContractViolation):
    pass


class NotDescent(ContractViolation):
    pass


class SolverError(RuntimeError):
    """Base for run-time solver failures; carries the partial trace when available."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class LineSearchFailed(SolverError):
    pass


class Diverged(SolverError):
    pass


class SketchFailed(SolverError):
    pass

class CCMatchError(Exception):
    """Base class for all errors raised by the package."""


class InstanceError(CCMatchError):
    """An instance failed validation. ``problems`` lists every violation found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ConvexityError(InstanceError):
    pass


class StructureError(CCMatchError):
    """The group family does not have the structure an operation requires."""


class InfeasibleError(CCMatchError):
    """No matching reaches the utility floor (or the requested flow value)."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ConvergenceError(CCMatchError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

"""Exception hierarchy shared by the package."""


class PottsAdmError(Exception):
    """Base class for all errors raised by potts_adm."""


class InvalidArgument(PottsAdmError, ValueError):
    pass


class NumericError(PottsAdmError, ArithmeticError):
    pass


class UnsupportedInput(PottsAdmError, ValueError):
    pass


class ResourceLimit(PottsAdmError, RuntimeError):
    pass


class SolverFailure(PottsAdmError, RuntimeError):
    """A discrete solve inside a training loop failed.

    ``iteration`` is the training iteration at which the run was aborted.
    """

    def __init__(self, iteration, cause):
        super().__init__(f"discrete solver failed at iteration {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause

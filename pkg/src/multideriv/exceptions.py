class SolverError(RuntimeError):
    """Base class for failures inside a time step."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class NewtonDiverged(SolverError):
    pass


class SingularSystem(SolverError):
    pass


class LocalSolverSingular(SolverError):
    pass


class GMRESStalled(SolverError):
    def __init__(self, message, x=None, residual=None, step=None):
        super().__init__(message, step=step)
        self.x = x
        self.residual = residual


class NonPhysicalState(SolverError):
    """Non-positive density or pressure met while evaluating a flux."""

class PreconditionError(ValueError):
    """Inputs violate a stated structural precondition (e.g. m <= 1, K < 1)."""


class QuadratureError(RuntimeError):
    """A refining quadrature did not reach its tolerance within budget."""

    def __init__(self, name, achieved, tol):
        self.name = name
        self.achieved = achieved
        self.tol = tol
        super().__init__(
            f"quadrature for {name!r} did not converge: error estimate "
            f"{achieved:.3e} > tol {tol:.1e}")


class SolverError(RuntimeError):
    """Newton failure or non-finite state inside a time stepper."""

    def __init__(self, message, step=None, residual=None):
        self.step = step
        self.residual = residual
        super().__init__(message)


class ConfigError(ValueError):
    """Experiment configuration could not be parsed or validated."""

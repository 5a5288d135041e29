class ConfigError(ValueError):
    """Invalid parameters or run configuration (CLI exit code 1)."""


class NumericalError(RuntimeError):
    """A solver failed numerically (CLI exit code 2)."""


class EigensolverError(NumericalError):
    pass


class IntegrationError(NumericalError):
    """Non-finite state encountered while stepping the mean-field equations."""

    def __init__(self, message, step=None, trajectory=None, seed=None, position=None):
        super().__init__(message)
        self.step = step
        self.position = position
        self.trajectory = trajectory
        self.seed = seed

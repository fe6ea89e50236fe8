"""Exception types shared across the package."""


class ExcitationOverflowError(ValueError):
    """Excitation |C1|^2 + |C2|^2 exceeds one beyond tolerance."""


class IntegrationError(RuntimeError):
    """The ODE stepper failed to meet its tolerances."""


class GridMismatchError(ValueError):
    """Two trajectories that must share a time grid do not."""


class MissingSensitivityError(KeyError):
    """A trajectory lacks the sensitivity track a computation needs."""


class NonHermitianError(ValueError):
    pass


class NegativeEigenvalueError(ValueError):
    pass


class InvalidPovmError(ValueError):
    pass


class ConfigError(ValueError):
    """Experiment config is unreadable or fails schema validation."""

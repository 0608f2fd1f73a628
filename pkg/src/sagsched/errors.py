"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A scenario, link parameter, or preset is invalid or infeasible."""


class SchedulingError(ValueError):
    """A channel assignment violates the environment's contracts."""


class TrainingDiverged(RuntimeError):
    """The policy-ratio divergence detector tripped during training."""

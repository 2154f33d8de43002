"""Exception types shared across the package."""


class CapacityError(ValueError):
    """A register or operator would exceed the configured size limit."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its residual tolerance."""


class ProjectionError(ValueError):
    """A projector annihilated the state (success probability ~ 0)."""


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""

"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value or key."""


class UnsupportedDimensionError(ConfigError):
    """Spatial dimension outside {2, 3}."""


class PreconditionError(ValueError):
    """An operation precondition was violated."""


class MeshDegenerationError(RuntimeError):
    """The deformation gradient lost positivity somewhere: the flow map is
    no longer orientation-preserving and the run must halt."""


class SolverError(RuntimeError):
    """A linear or nonlinear solve failed."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class FitDomainError(ValueError):
    """Decay-rate fit requested on a window without usable samples."""

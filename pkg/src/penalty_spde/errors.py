"""Exception types shared across the package."""


class PenaltySpdeError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(PenaltySpdeError):
    """Degenerate or non-planar geometry."""


class ConfigurationError(PenaltySpdeError):
    """Bad user-facing parameter or config file content."""


class MeshParseError(PenaltySpdeError):
    """Malformed or unsupported mesh file."""


class SolverError(PenaltySpdeError):
    """Linear solve failed or produced an unusable result."""


class StepError(PenaltySpdeError):
    """A time step could not be completed."""

    def __init__(self, message, step_index=None, residual=None):
        super().__init__(message)
        self.step_index = step_index
        self.residual = residual

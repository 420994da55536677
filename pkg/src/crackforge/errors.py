"""Exception hierarchy shared across the package."""


class CrackforgeError(Exception):
    """Base class for all domain errors raised by this package."""


class ConfigError(CrackforgeError):
    """Invalid run configuration, spec file, or CLI parameters."""


class VolumeError(CrackforgeError):
    """Malformed volume file or invalid volume operation."""


class EmptyTessellationError(CrackforgeError):
    """A Poisson draw produced zero points; caller may retry with a new seed."""


class CycleAnchorError(CrackforgeError):
    """No tessellation vertex lies on one of the vertical window edges."""


class NoSpanningChainError(CrackforgeError):
    """The parity system admits no facet subset with the prescribed boundary."""


class SolverTimeoutError(CrackforgeError):
    """Branch-and-bound hit its budget.  Carries the best incumbent found."""

    def __init__(self, message, incumbent=None):
        super().__init__(message)
        self.incumbent = incumbent
        self.optimal = False


class TrainingDivergedError(CrackforgeError):
    """Loss became non-finite during training.  Carries the loss history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])

"""Exception hierarchy shared by all balbot modules."""


class BalbotError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidInputError(BalbotError):
    """Malformed or out-of-contract input (shapes, signs, empty data)."""


class SolverFailureError(BalbotError):
    """Iterative solver did not converge or produced an unusable result.

    Carries the final residual so callers can report how close it got.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IdentifiabilityError(BalbotError):
    """Experiment data does not excite the parameters being fitted."""


class ModelMismatchError(BalbotError):
    """Fitted parameters fall outside the assumed model class."""


class InfeasiblePlacementError(BalbotError):
    """Requested pole locations cannot be realized with the given plant."""


class CrossingNotFoundError(BalbotError):
    """No stability-boundary crossing inside the searched interval."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class SimulationDivergedError(BalbotError):
    """State left the representable range during integration."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ProtocolError(BalbotError):
    """Malformed or out-of-contract wire message."""


class SessionLimitError(BalbotError):
    """Server refused to open another concurrent session."""

"""Exception types shared across the package."""


class KoopeigError(Exception):
    """Base class for all library errors."""


class BlowUpError(KoopeigError):
    """Trajectory norm exceeded the blow-up bound before the requested time."""

    def __init__(self, message, time=None, state=None):
        super().__init__(message)
        self.time = time
        self.state = state


class StepUnderflowError(KoopeigError):
    """Adaptive step size fell below the hard floor."""


class NoCrossingError(KoopeigError):
    """Event function never changed sign within the time budget."""


class NotInDomainError(KoopeigError):
    """Query point is outside the swept domain of an eigenfunction."""


class AmbiguousCrossingError(KoopeigError):
    """Backward/forward orbit met the data manifold more than once in-window."""


class OutOfRangeError(KoopeigError):
    """Parameter value outside the data-function grid."""


class GridMismatchError(KoopeigError):
    """Two tabulated functions do not share the same sample grid."""


class ZeroFieldError(KoopeigError):
    """Vector field vanishes on the data manifold (fixed point on it)."""


class BranchCutError(KoopeigError):
    """Non-integer power of a value off the positive real axis."""


class EmptyTargetError(KoopeigError):
    """Target sample has zero norm; nothing to decompose."""


class ConfigError(KoopeigError):
    """Bad run configuration; carries a dotted field path when known."""

    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field

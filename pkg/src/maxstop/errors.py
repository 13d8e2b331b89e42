"""Exception hierarchy shared across the solver."""


class MaxstopError(Exception):
    """Base class for all library errors."""


class ModelError(MaxstopError):
    """Invalid diffusion specification or evaluation outside the state space."""


class RewardError(MaxstopError):
    """Inconsistent reward specification (e.g. running income without its potential)."""


class ValueInfiniteError(MaxstopError):
    """The problem is ill-posed: a boundary growth limit diverges."""


class NoTangencyError(MaxstopError):
    """No tangent line from the requested point touches the transformed reward."""


class UnsupportedStructureError(MaxstopError):
    """Continuation set is not a half-interval; outside the supported problem class."""


class UnsupportedModelError(MaxstopError):
    """log-phi is neither strictly convex nor linear; the explicit diagonal formula does not apply."""


class TruncationError(MaxstopError):
    """Outer integral survival factor did not decay before the working cap."""


class ConfigError(MaxstopError):
    """Problem configuration file could not be parsed or validated."""

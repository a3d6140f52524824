"""
Exception hierarchy for the lab.

Every condition an operation can signal has its own class so that callers
(and the runner's exit-code mapping) can tell them apart. Conditions caused
by bad arguments also derive from ValueError.
"""


class FppLabError(Exception):
    """Base class for all lab errors."""


class ConfigError(FppLabError, ValueError):
    """Experiment configuration is missing, malformed or inconsistent."""


class ConfigMismatchError(FppLabError, ValueError):
    """Reports being merged were produced by different configurations."""


class InvalidDirectionError(FppLabError, ValueError):
    """Direction is zero or has a negative coordinate."""


class UnreachableError(FppLabError):
    """The region disconnects the endpoints (travel time is infinite)."""


class WindowTooSmallError(FppLabError):
    """No path exists inside the window although one exists in the region.

    The quantity is censored: the window has to grow.
    """


class EmptyTargetError(FppLabError, ValueError):
    """No window point satisfies the target predicate."""


class WindowOverflowError(FppLabError):
    """A flood reached the window boundary where completeness was required."""


class NoWhiteWitnessError(FppLabError):
    """No box around the center touches a boundary-reaching white cluster."""


class NoRegenerationError(FppLabError):
    """No regeneration level occurred within the scanned range."""


class InsufficientDataError(FppLabError, ValueError):
    """Too few independent samples for the requested estimate."""


class RadiusTooSmallError(FppLabError, ValueError):
    """Cylinder radius too small for the detour argument."""


class MuTooUncertainError(FppLabError):
    """Time-constant reference is too noisy for the requested tolerance."""


class MuDegenerateError(FppLabError):
    """Time constant is (numerically) zero in some direction."""


class EmptySampleError(FppLabError, ValueError):
    """An estimator received no samples."""


class InvalidExponentsError(FppLabError, ValueError):
    """Exponents violate beta*K <= alpha*L."""


class EmptyFanError(FppLabError, ValueError):
    """A time-constant estimate has no directions to interpolate from."""

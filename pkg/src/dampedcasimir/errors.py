"""Exception hierarchy shared by every module of the package."""


class CasimirError(Exception):
    """Base class for all package errors."""


class InvalidParams(CasimirError, ValueError):
    """Raw physical parameters violate their invariants."""


class BoundedRegimeRequired(CasimirError):
    """A quantity defined only for K/(eps*omega0) > 1 was requested outside that regime."""


class NoSteadyState(CasimirError):
    """The phenomenological model has no stationary photon number for these parameters."""


class TruncationTooSmall(CasimirError):
    """The Fock-space truncation cannot represent the requested object accurately."""


class TruncationLeak(CasimirError):
    """Population reached the top of the truncated space during time evolution."""


class DimensionMismatch(CasimirError, ValueError):
    """Objects living on different truncated spaces were combined."""


class ToleranceNotMet(CasimirError):
    """The adaptive integrator could not satisfy its error tolerance."""


class DegenerateKernel(CasimirError):
    """The Liouvillian kernel is not one-dimensional."""


class ObservableNotRegistered(CasimirError, KeyError):
    """An observable was requested from a trajectory that never recorded it."""


class Unresolvable(CasimirError):
    """Neither candidate C2 convention matches the numerically fitted amplitude."""

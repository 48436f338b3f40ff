"""Exception hierarchy shared by the library and the command line front end.

Every error carries the process exit code the CLI should return for it.
"""


class FrontReconError(Exception):
    exit_code = 1


class ConfigError(FrontReconError, ValueError):
    """Invalid input data or configuration."""

    exit_code = 2


class FluxValidationError(ConfigError):
    """The flux does not satisfy the structural hypothesis it was declared with."""


class CoefficientError(ConfigError):
    """Malformed piecewise-constant coefficient."""


class HorizonTooShort(FrontReconError):
    """The observation window ended before a required event happened."""

    exit_code = 3


class Congested(FrontReconError):
    """The obstructed region is fully congested and cannot be probed."""

    exit_code = 4


class InconsistentObservation(FrontReconError):
    """Observed data contradict every admissible wave pattern."""

    exit_code = 5


class AccessViolation(FrontReconError):
    """A query touched the unobservable window."""

    exit_code = 5


class Unattainable(FrontReconError):
    """No stationary state satisfies the requested flux balance."""

    exit_code = 5


class LivelockError(FrontReconError):
    """The event loop exceeded its interaction budget."""

"""Exception hierarchy shared across the package.

Process exit codes: 0 success, 1 verification tolerance failure,
2 configuration error, 3 numerical failure.  Exceptions carry the
exit code they map to; tolerance failures are reported, not raised.
"""


class IonPulseError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(IonPulseError):
    """Invalid user input: bad config files, flags, or request payloads."""

    exit_code = 2


class NumericalFailure(IonPulseError):
    """An iterative or numerical routine failed to converge."""


class UnstableChain(NumericalFailure):
    """Transverse confinement too weak: the linear chain would buckle."""


class UnsupportedFixture(ConfigError):
    """Requested a tabulated chain size that is not shipped."""


class EmptyBasis(ConfigError):
    """Frequency window contains no harmonic of the gate duration."""


class InsufficientDOF(IonPulseError):
    """Constraint matrix leaves no free directions to draw pulses from."""


class InvalidPair(ConfigError):
    """Operation requires two distinct ions."""


class TooManyGates(ConfigError):
    """More gates requested than mode/eigenvalue slots available."""


class InfeasibleAssignment(IonPulseError):
    """Gate/mode matching forced a zero-coupling assignment."""


class DegenerateSolution(IonPulseError):
    """Projected eigenvector couples negligibly to the target pair."""


class SignInfeasible(IonPulseError):
    """Achievable entangling angle has the wrong sign in strict-sign mode."""


class UnsupportedGraph(ConfigError):
    """Power rebalancing is only defined for star-like overlap patterns."""


class InvalidInput(ConfigError):
    """Scalar input out of its valid domain (e.g. non-positive angle factor)."""


class InvalidCount(ConfigError):
    """Sign-schedule size must be a power of two."""


class InvalidSchedule(ConfigError):
    """Slot count and pulse count do not match."""


class SamplingError(ConfigError):
    """Waveform export rate below the Nyquist rate of the basis."""

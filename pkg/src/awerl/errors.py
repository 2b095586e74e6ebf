"""Exception types shared across the package."""


class AweError(Exception):
    """Base class for all package errors."""


class AlignmentSingularity(AweError):
    """Relative wind aligned with the tether; the bank-angle geometry is undefined."""

    def __init__(self, message="relative wind aligned with tether", substep=None):
        super().__init__(message if substep is None else f"{message} (substep {substep})")
        self.substep = substep


class PolarSingularity(AweError):
    """Kite too close to the zenith for the spherical equations of motion."""

    def __init__(self, message="sin(theta) below tolerance", substep=None):
        super().__init__(message if substep is None else f"{message} (substep {substep})")
        self.substep = substep


class DegenerateWind(AweError):
    """Relative wind speed too small to define a direction."""


class OutOfRange(AweError, ValueError):
    """Argument outside the tabulated or admissible range."""


class AboveDomain(AweError):
    """Query above the top of a bounded wind field."""


class BelowGround(AweError):
    """Query below z = 0."""


class FormatError(AweError):
    """Malformed file (bad magic, version or size)."""


class DataError(AweError):
    """File is well formed but holds invalid values."""


class EpisodeOver(AweError):
    """``step`` called on a terminated episode."""


class CycleFailed(AweError):
    """A phase of a pumping cycle ended in failure."""

    def __init__(self, phase, reason, ledger=None, trajectory=None):
        super().__init__(f"cycle failed in {phase}: {reason}")
        self.phase = phase
        self.reason = reason
        self.ledger = ledger
        self.trajectory = trajectory


class NumericalDivergence(AweError):
    """Network parameters or losses became non-finite."""


class ConfigError(AweError):
    """Invalid run configuration."""

"""Exception types used across the package.

Every error that callers are expected to handle derives from
:class:`PhasemcError`; the CLI maps each subclass to a machine-readable
category string and a nonzero exit status.
"""


class PhasemcError(Exception):
    """Base class for all package errors."""

    category = "internal"


class ConfigError(PhasemcError):
    """Invalid or inconsistent simulation configuration."""

    category = "config"


class GridTooNarrow(PhasemcError):
    """A state does not fit on the spatial grid (tail mass above tolerance)."""

    category = "grid"


class GridTooCoarse(PhasemcError):
    """A requested detector momentum lies beyond the grid's momentum range."""

    category = "grid"


class CoverageError(PhasemcError):
    """The detector lattice cannot cover the requested run."""

    category = "coverage"


class NotNormalized(PhasemcError):
    """Operation requires a normalized wavefunction."""

    category = "state"


class TimestepTooLarge(PhasemcError):
    """Total jump probability per step exceeds the stability bound."""

    category = "timestep"


class BoundaryLeak(PhasemcError):
    """Wavefunction mass near the grid boundary exceeds tolerance."""

    category = "boundary"


class StepUnstable(PhasemcError):
    """Density-matrix integrator lost trace conservation."""

    category = "integrator"


class InsufficientData(PhasemcError):
    """Not enough samples for the requested statistical estimate."""

    category = "statistics"

"""Exception hierarchy shared across the package.

Every error raised by gelab derives from GelabError so callers can catch
library failures without masking programming errors.
"""

from __future__ import annotations


class GelabError(Exception):
    """Base class for all gelab errors."""


class ConfigError(GelabError):
    """Invalid run configuration: bad key, bad value, or malformed file."""


class DomainError(GelabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class UnsupportedFormError(GelabError):
    """The kernel form cannot support the requested operation."""


class IndeterminateError(GelabError):
    """A numeric probe could not reach a conclusion (e.g. kernel vanished
    on every probe pair)."""


class EmptyMeasureError(GelabError):
    """The distribution carries no mass where the operation needs some."""


class SeparationUndecidedError(GelabError):
    """Dyadic mass-separation search exhausted its depth and horizon
    extensions without reaching either outcome."""


class StepRejectedError(GelabError):
    """Explicit Euler step rejected: requested dt exceeds the stability
    bound.  Carries the largest admissible dt."""

    def __init__(self, requested_dt: float, admissible_dt: float):
        self.requested_dt = requested_dt
        self.admissible_dt = admissible_dt
        super().__init__(
            f"dt={requested_dt:.6g} exceeds stability bound "
            f"dt_max={admissible_dt:.6g}"
        )


class InsufficientDataError(GelabError):
    """Not enough usable data points for a fit or statistic."""


class ReportError(GelabError):
    """Nothing to report, or the report target is unusable."""

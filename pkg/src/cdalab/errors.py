"""Shared exception types."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """A grid, parameter, or config-file value violates a contract."""


class BlowUpError(RuntimeError):
    """A time step produced non-finite or absurdly large coefficients.

    Carries the simulation time of failure and, for ensemble runs, the index
    of the first offending member.
    """

    def __init__(self, time: float, member: int | None = None):
        self.time = float(time)
        self.member = member
        where = f" (member {member})" if member is not None else ""
        super().__init__(f"solution blew up at t={time:.6g}{where}")


class GainDegeneracyError(RuntimeError):
    """The innovation covariance is singular or numerically unusable.

    Expected for under-sized ensembles; carries the condition estimate that
    tripped the guard.
    """

    def __init__(self, condition: float, threshold: float):
        self.condition = float(condition)
        self.threshold = float(threshold)
        super().__init__(
            f"innovation covariance degenerate: condition estimate "
            f"{condition:.3e} exceeds {threshold:.1e}"
        )

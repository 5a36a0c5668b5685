"""Feedback-control assimilation (interpolated nudging).

Wraps a model step with an explicit increment mu * P_M(obs - v) pulling the
simulated state toward projected, possibly noisy, observations of the
reference. Observations taken at t_n drive the step from t_n to t_{n+1}.
The increment uses the observation operator's band only, so the complement
modes evolve purely under the model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .kse import KseStepper
from .nse import NseStepper

V0_MODES = ("zero", "projected-obs")


@dataclass(frozen=True)
class NudgingParams:
    mu: float
    v0_mode: str = "zero"

    def __post_init__(self) -> None:
        if self.mu < 0:
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if self.v0_mode not in V0_MODES:
            raise ConfigurationError(
                f"v0_mode must be one of {V0_MODES}, got {self.v0_mode!r}"
            )


@dataclass(frozen=True)
class CflReport:
    """Advisory stability report for the explicit feedback term."""

    mu: float
    dt: float
    bound: float
    within_bound: bool
    margin: float

    def summary(self) -> str:
        verdict = "ok" if self.within_bound else "flagged"
        return (
            f"mu={self.mu:g} vs bound 2/dt={self.bound:g} "
            f"(margin {self.margin:.3g}x): {verdict}"
        )


def cfl_check(mu: float, dt: float) -> CflReport:
    """Pure advisory predicate mu < 2/dt; equality counts as flagged."""
    bound = 2.0 / dt
    margin = bound / mu if mu > 0 else np.inf
    return CflReport(mu=mu, dt=dt, bound=bound, within_bound=mu < bound, margin=margin)


def nudged_kse_step(
    coeffs: np.ndarray,
    obs_coeffs: np.ndarray,
    mu: float,
    observed_mask: np.ndarray,
    stepper: KseStepper,
) -> np.ndarray:
    """Integrating-factor Euler step plus the integrating-factor-weighted
    nudging increment dt*e^{L dt}*mu*P_M(obs - v)."""
    out = stepper.step(coeffs)
    if mu:
        out = out + stepper.dt_exp_l * (mu * ((obs_coeffs - coeffs) * observed_mask))
    return out


def nudged_nse_step(
    coeffs: np.ndarray,
    obs_coeffs: np.ndarray,
    mu: float,
    observed_mask: np.ndarray,
    stepper: NseStepper,
) -> np.ndarray:
    """ETDRK4 step plus the plain explicit increment mu*dt*P_M(obs - v)."""
    out = stepper.step(coeffs)
    if mu:
        out = out + (mu * stepper.dt) * ((obs_coeffs - coeffs) * observed_mask)
    return out

"""Stochastic ensemble Kalman filter.

The observation operator is the projection onto modes 1 <= |k| <= M. The
observed space is vectorized over real coordinates: the real and imaginary
parts of each independent observed mode (conjugate partners carry no extra
information for a real field), so obs_dof = 2 x independent modes (2M in
1D). Per-member observation perturbations enter the normalized anomalies,
the member update itself uses the unperturbed innovation, and additive
inflation noise (observed-mode support) is applied after each forecast.

Rank bookkeeping: anomalies are mean-subtracted, so rank(U) <= K-1 and the
innovation covariance U U^T always loses at least one dimension when
K <= obs_dof. The gain is assembled on the covariance's numerical range. A
single undetermined direction is structural (the mean subtraction at the
K = obs_dof operating point) and is tolerated: that direction simply
receives no correction that cycle. Any deeper deficiency, or an
ill-conditioned retained spectrum, raises GainDegeneracyError instead of
silently regularizing - under-sized ensembles (K < obs_dof) fail loudly,
which reproduces the practical K >= 2M requirement in 1D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, ConfigurationError, GainDegeneracyError
from .rng import SeedHub
from .spectral import (
    BLOWUP_LIMIT,
    NoiseSpec,
    SpectralField,
    WaveGrid,
    generate_noise,
    observed_packing,
    state_packing,
)

# eigenvalues below RANK_RTOL * max are treated as numerically null
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class EnkfParams:
    members: int
    sigma_e_sq: float
    sigma_i_sq: float
    condition_limit: float = 1e12

    def __post_init__(self) -> None:
        if self.members < 2:
            raise ConfigurationError(
                f"ensemble needs at least 2 members (anomalies undefined otherwise), "
                f"got {self.members}"
            )
        if self.sigma_e_sq < 0 or self.sigma_i_sq < 0:
            raise ConfigurationError("noise variances must be >= 0")


def recommended_min_members(grid: WaveGrid, cutoff_m: int) -> int:
    """Advisory ensemble size: the observed real degrees of freedom
    (2M in 1D, ~ the observed lattice count in 2D)."""
    return observed_packing(grid, cutoff_m).real_size


class Ensemble:
    """K member coefficient stacks sharing one grid.

    `phase` alternates forecast -> analysis -> forecast; the pre-inflation
    member mean of the latest forecast is kept for error metrics.
    """

    def __init__(
        self,
        grid: WaveGrid,
        coeffs: np.ndarray,
        dt: float,
        phase: str = "forecast",
        hub: SeedHub | None = None,
    ):
        if coeffs.ndim != grid.dims + 1 or coeffs.shape[1:] != grid.shape:
            raise ConfigurationError(
                f"member stack shape {coeffs.shape} does not match grid {grid.shape}"
            )
        self.grid = grid
        self.coeffs = coeffs
        self.dt = dt
        self.phase = phase
        self.mean_before_inflation: np.ndarray = coeffs.mean(axis=0)
        self._steps = 0
        self._t0 = 0.0
        members = coeffs.shape[0]
        self._perturb_rngs: list[np.random.Generator] | None = None
        self._inflate_rngs: list[np.random.Generator] | None = None
        if hub is not None:
            self._perturb_rngs = [hub.stream(f"enkf-perturb-{k:04d}") for k in range(members)]
            self._inflate_rngs = [hub.stream(f"enkf-inflate-{k:04d}") for k in range(members)]

    @property
    def members(self) -> int:
        return self.coeffs.shape[0]

    @property
    def time(self) -> float:
        return self._t0 + self._steps * self.dt

    def mean_field(self) -> SpectralField:
        return SpectralField(self.grid, self.coeffs.mean(axis=0))


def ensemble_mean(ens: Ensemble) -> SpectralField:
    """Coefficient-wise arithmetic member mean (the filter's point estimate)."""
    return ens.mean_field()


def init_ensemble(
    obs0: SpectralField,
    params: EnkfParams,
    cutoff_m: int,
    dt: float,
    hub: SeedHub,
) -> Ensemble:
    """Forecast members = first observation plus an independent observed-mode
    draw with std sigma_E per member; unobserved modes start at zero."""
    grid = obs0.grid
    spec = NoiseSpec(params.sigma_e_sq, cutoff_m)
    stack = np.empty((params.members,) + grid.shape, dtype=np.complex128)
    for k in range(params.members):
        rng = hub.stream(f"enkf-init-{k:04d}")
        stack[k] = obs0.coeffs + generate_noise(grid, spec, rng).coeffs
    return Ensemble(grid, stack, dt, phase="forecast", hub=hub)


def _range_restricted_inverse(cov: np.ndarray, condition_limit: float) -> np.ndarray:
    """Invert a symmetric PSD covariance on its numerical range.

    Tolerates exactly one undetermined direction (the structural
    mean-subtraction deficiency); anything worse raises GainDegeneracyError,
    as does a retained spectrum with condition estimate beyond the limit.
    """
    dim = cov.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    lam_max = eigvals[-1] if eigvals.size else 0.0
    if not np.isfinite(lam_max) or lam_max <= 0.0:
        raise GainDegeneracyError(np.inf, condition_limit)
    keep = eigvals > RANK_RTOL * lam_max
    deficiency = dim - int(np.count_nonzero(keep))
    if deficiency > 1:
        lam_min = max(float(eigvals[0]), 0.0)
        condition = lam_max / lam_min if lam_min > 0 else np.inf
        raise GainDegeneracyError(condition, condition_limit)
    retained_condition = float(lam_max / eigvals[keep][0])
    if retained_condition > condition_limit:
        raise GainDegeneracyError(retained_condition, condition_limit)
    vecs = eigvecs[:, keep]
    return (vecs / eigvals[keep]) @ vecs.T


def analysis_step(
    ens: Ensemble,
    obs: SpectralField,
    params: EnkfParams,
    cutoff_m: int,
) -> np.ndarray:
    """Perturbed-anomaly analysis update; returns the assembled gain.

    Per member k: draw err_k ~ N(0, sigma_E) on the observed band, form
    normalized anomalies

        V_k = (v_k - vbar)/sqrt(K-1),
        U_k = (Hv_k - err_k - Hbar + err_bar)/sqrt(K-1),

    gain G = V U^T (U U^T)^{-1} on real coordinates, and update
    v_k += G (obs - Hv_k).
    """
    if ens.phase != "forecast":
        raise ConfigurationError(f"analysis requires a forecast-phase ensemble, got {ens.phase!r}")
    if ens._perturb_rngs is None:
        raise ConfigurationError("ensemble has no noise streams; construct it with a SeedHub")
    grid = ens.grid
    k_members = ens.members
    s_pack = state_packing(grid)
    o_pack = observed_packing(grid, cutoff_m)

    states = s_pack.pack_real(ens.coeffs)           # (K, s)
    h_members = o_pack.pack_real(ens.coeffs)        # (K, m)

    spec = NoiseSpec(params.sigma_e_sq, cutoff_m)
    err = np.empty_like(h_members)
    for k in range(k_members):
        rng = ens._perturb_rngs[k]
        err[k] = o_pack.pack_real(generate_noise(grid, spec, rng).coeffs)

    norm = np.sqrt(k_members - 1.0)
    v_anom = (states - states.mean(axis=0)).T / norm                     # (s, K)
    u_anom = (h_members - err - h_members.mean(axis=0) + err.mean(axis=0)).T / norm  # (m, K)

    cov_inv = _range_restricted_inverse(u_anom @ u_anom.T, params.condition_limit)
    gain = (v_anom @ u_anom.T) @ cov_inv                                 # (s, m)
    if not np.all(np.isfinite(gain)):
        raise GainDegeneracyError(np.inf, params.condition_limit)

    innovations = o_pack.pack_real(obs.coeffs) - h_members               # (K, m)
    ens.coeffs = s_pack.unpack_real(states + innovations @ gain.T)
    ens.phase = "analysis"
    return gain


def forecast_and_inflate(ens: Ensemble, stepper, params: EnkfParams, cutoff_m: int) -> None:
    """Advance every member one model step, then add independent inflation
    noise (observed-mode support, std sigma_I) per member.

    The pre-inflation member mean is stashed on the ensemble; error metrics
    read it so the reported observed error excludes the inflation kick.
    """
    if ens.phase != "analysis":
        raise ConfigurationError(f"forecast requires an analysis-phase ensemble, got {ens.phase!r}")
    if ens._inflate_rngs is None:
        raise ConfigurationError("ensemble has no noise streams; construct it with a SeedHub")
    stepped = stepper.step(ens.coeffs)
    ens._steps += 1

    flat = stepped.reshape(ens.members, -1)
    finite = np.isfinite(flat).all(axis=1)
    peak = np.abs(flat).max(axis=1)
    bad = ~finite | (peak > BLOWUP_LIMIT)
    if bad.any():
        raise BlowUpError(ens.time, member=int(np.argmax(bad)))

    ens.mean_before_inflation = stepped.mean(axis=0)
    spec = NoiseSpec(params.sigma_i_sq, cutoff_m)
    for k in range(ens.members):
        rng = ens._inflate_rngs[k]
        stepped[k] += generate_noise(ens.grid, spec, rng).coeffs
    ens.coeffs = stepped
    ens.phase = "forecast"

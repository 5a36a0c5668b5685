"""Identical-twin experiment orchestration.

One reference run produces the "truth"; projected, noise-contaminated
observations of it are assimilated into a second run started from different
initial data. Reference and estimate share a single dt and advance in
lockstep; the observation taken at t_n is consumed by the step to t_{n+1}.
Errors are split into observed / unobserved / total L2 components whose
squares sum exactly.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .enkf import (
    EnkfParams,
    analysis_step,
    forecast_and_inflate,
    init_ensemble,
    recommended_min_members,
)
from .errors import BlowUpError, ConfigurationError, GainDegeneracyError
from .kse import KseParams, KseSolver
from .nse import NseParams, NseSolver, compute_grashof
from .nudging import NudgingParams, cfl_check, nudged_kse_step, nudged_nse_step
from .rng import SeedHub
from .spectral import (
    BLOWUP_LIMIT,
    NoiseSpec,
    Projector,
    SpectralField,
    generate_noise,
    l2_norm,
    observed_packing,
)

MODELS = ("kse", "nse")
METHODS = ("nudging", "enkf", "free-run")
OBSERVED_VARIABLES = ("streamfunction", "vorticity")


@dataclass(frozen=True)
class ErrorRecord:
    time: float
    err_observed: float
    err_unobserved: float
    err_total: float


def error_decomposition(
    truth: SpectralField,
    estimate: SpectralField,
    projector: Projector,
    time: float = 0.0,
) -> ErrorRecord:
    """Observed / unobserved / total L2 errors of estimate against truth."""
    if truth.grid != estimate.grid:
        raise ConfigurationError("truth and estimate live on different grids")
    diff = SpectralField(truth.grid, truth.coeffs - estimate.coeffs)
    return ErrorRecord(
        time=time,
        err_observed=l2_norm(diff, "observed", projector),
        err_unobserved=l2_norm(diff, "complement", projector),
        err_total=l2_norm(diff),
    )


class ObservationStream:
    """Emits P_M(truth) plus a fresh observed-band noise draw per call."""

    def __init__(self, projector: Projector, sigma_o_sq: float, rng: np.random.Generator):
        self.projector = projector
        self.noise = NoiseSpec(sigma_o_sq, projector.cutoff_m)
        self.rng = rng

    def observe(self, truth: SpectralField) -> SpectralField:
        eta = generate_noise(truth.grid, self.noise, self.rng)
        return SpectralField(truth.grid, truth.coeffs * self.projector.observed_mask + eta.coeffs)


@dataclass(frozen=True)
class TwinConfig:
    model: str
    method: str
    cutoff_m: int
    kse_params: KseParams | None = None
    nse_params: NseParams | None = None
    sigma_o_sq: float = 0.0
    nudging: NudgingParams | None = None
    enkf: EnkfParams | None = None
    spin_up_time: float = 1000.0
    horizon: float = 100.0
    record_stride: int = 10
    master_seed: int = 1
    observed_variable: str = "streamfunction"

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ConfigurationError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.method not in METHODS:
            raise ConfigurationError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.horizon <= 0:
            raise ConfigurationError(f"horizon must be positive, got {self.horizon}")
        if self.record_stride < 1:
            raise ConfigurationError(f"record_stride must be >= 1, got {self.record_stride}")
        if self.sigma_o_sq < 0:
            raise ConfigurationError(f"sigma_o_sq must be >= 0, got {self.sigma_o_sq}")
        if self.spin_up_time < 0:
            raise ConfigurationError(f"spin_up_time must be >= 0, got {self.spin_up_time}")
        if self.method == "nudging" and self.nudging is None:
            raise ConfigurationError("method 'nudging' needs nudging parameters")
        if self.method == "enkf" and self.enkf is None:
            raise ConfigurationError("method 'enkf' needs enkf parameters")
        if self.observed_variable not in OBSERVED_VARIABLES:
            raise ConfigurationError(
                f"observed_variable must be one of {OBSERVED_VARIABLES}, "
                f"got {self.observed_variable!r}"
            )
        if self.observed_variable == "vorticity" and self.model != "nse":
            raise ConfigurationError("vorticity observations only apply to the nse model")

    @property
    def model_params(self):
        if self.model == "kse":
            return self.kse_params or KseParams()
        return self.nse_params or NseParams()


def generate_reference(cfg: TwinConfig):
    """Spin up the reference from canonical initial data and restart its
    clock at zero. Deterministic in (config, seed)."""
    if cfg.model == "kse":
        solver = KseSolver(cfg.model_params)
    else:
        solver = NseSolver(cfg.model_params)
    solver.spin_up(cfg.spin_up_time)
    return solver


class _NudgingMethod:
    def __init__(self, cfg: TwinConfig, stepper, projector: Projector, obs0: SpectralField):
        self.mu = cfg.nudging.mu
        self.mask = projector.observed_mask
        self.stepper = stepper
        self.step_fn = nudged_kse_step if cfg.model == "kse" else nudged_nse_step
        if cfg.nudging.v0_mode == "projected-obs":
            self.coeffs = obs0.coeffs.copy()
        else:
            self.coeffs = np.zeros_like(obs0.coeffs)

    def estimate(self) -> np.ndarray:
        return self.coeffs

    def advance(self, obs: SpectralField, time_next: float) -> None:
        out = self.step_fn(self.coeffs, obs.coeffs, self.mu, self.mask, self.stepper)
        if not np.all(np.isfinite(out)) or np.max(np.abs(out)) > BLOWUP_LIMIT:
            raise BlowUpError(time_next)
        self.coeffs = out


class _FreeRunMethod:
    """Chaos control: no assimilation, estimate started from the projected
    (noisy) initial observation."""

    def __init__(self, cfg: TwinConfig, stepper, obs0: SpectralField):
        self.stepper = stepper
        self.coeffs = obs0.coeffs.copy()

    def estimate(self) -> np.ndarray:
        return self.coeffs

    def advance(self, obs: SpectralField, time_next: float) -> None:
        out = self.stepper.step(self.coeffs)
        if not np.all(np.isfinite(out)) or np.max(np.abs(out)) > BLOWUP_LIMIT:
            raise BlowUpError(time_next)
        self.coeffs = out


class _EnkfMethod:
    def __init__(self, cfg: TwinConfig, stepper, obs0: SpectralField, hub: SeedHub):
        self.params = cfg.enkf
        self.cutoff_m = cfg.cutoff_m
        self.stepper = stepper
        self.ensemble = init_ensemble(obs0, self.params, self.cutoff_m, stepper.dt, hub)
        self._estimate = self.ensemble.coeffs.mean(axis=0)

    def estimate(self) -> np.ndarray:
        return self._estimate

    def advance(self, obs: SpectralField, time_next: float) -> None:
        analysis_step(self.ensemble, obs, self.params, self.cutoff_m)
        forecast_and_inflate(self.ensemble, self.stepper, self.params, self.cutoff_m)
        self._estimate = self.ensemble.mean_before_inflation


@dataclass
class TwinResult:
    records: list[ErrorRecord]
    manifest: dict

    @property
    def status(self) -> str:
        return self.manifest["status"]


def _steps_for(horizon: float, dt: float) -> int:
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ConfigurationError(f"horizon {horizon} is not a positive multiple of dt {dt}")
    return n


def run_twin_experiment(cfg: TwinConfig) -> TwinResult:
    """Run reference and assimilated solution in lockstep, recording the
    error decomposition every `record_stride` steps.

    A blow-up ends the run early; the partial records survive and the
    manifest carries the failure time (and member, for ensembles).
    """
    params = cfg.model_params
    dt = params.dt
    n_steps = _steps_for(cfg.horizon, dt)

    t_spin = _time.perf_counter()
    reference = generate_reference(cfg)
    spin_up_seconds = _time.perf_counter() - t_spin

    grid = reference.grid
    projector = Projector(grid, cfg.cutoff_m)
    hub = SeedHub(cfg.master_seed)
    stream = ObservationStream(projector, cfg.sigma_o_sq, hub.stream("observation-noise"))

    if cfg.observed_variable == "vorticity":
        ksq = grid.k_phys(0) ** 2 + grid.k_phys(1) ** 2
        inv_ksq = np.zeros_like(ksq)
        inv_ksq[ksq > 0] = 1.0 / ksq[ksq > 0]

        def observe() -> SpectralField:
            vort = SpectralField(grid, ksq * reference.coeffs)
            noisy = stream.observe(vort)
            return SpectralField(grid, noisy.coeffs * inv_ksq)

    else:

        def observe() -> SpectralField:
            return stream.observe(reference.field)

    obs = observe()
    stepper = reference.stepper
    if cfg.method == "nudging":
        method = _NudgingMethod(cfg, stepper, projector, obs)
    elif cfg.method == "enkf":
        method = _EnkfMethod(cfg, stepper, obs, hub)
    else:
        method = _FreeRunMethod(cfg, stepper, obs)

    records: list[ErrorRecord] = []

    def record(step_index: int) -> None:
        records.append(
            error_decomposition(
                reference.field,
                SpectralField(grid, method.estimate()),
                projector,
                time=step_index * dt,
            )
        )

    status = "completed"
    failure: dict | None = None
    t_run = _time.perf_counter()
    record(0)
    step_reached = 0
    try:
        for n in range(n_steps):
            method.advance(obs, time_next=(n + 1) * dt)
            reference.step()
            step_reached = n + 1
            if (n + 1) % cfg.record_stride == 0 or n + 1 == n_steps:
                record(n + 1)
            if n + 1 < n_steps:
                obs = observe()
    except BlowUpError as exc:
        status = "blow-up"
        failure = {"time": exc.time, "member": exc.member}
    except GainDegeneracyError as exc:
        status = "gain-degeneracy"
        failure = {"time": step_reached * dt, "condition_estimate": exc.condition}
    run_seconds = _time.perf_counter() - t_run

    manifest = _build_manifest(cfg, n_steps, spin_up_seconds, run_seconds, status, failure)
    return TwinResult(records=records, manifest=manifest)


def _config_dict(cfg: TwinConfig) -> dict:
    params = cfg.model_params
    if cfg.model == "kse":
        model = {
            "type": "kse",
            "lam": params.lam,
            "domain_length": params.domain_length,
            "n": params.n,
            "dt": params.dt,
        }
    else:
        model = {
            "type": "nse",
            "nu": params.nu,
            "forcing_amplitude": params.forcing_amplitude,
            "forcing_mode": list(params.forcing_mode),
            "n": params.n,
            "dt": params.dt,
        }
    method: dict = {"type": cfg.method, "cutoff_m": cfg.cutoff_m, "sigma_o_sq": cfg.sigma_o_sq}
    if cfg.method == "nudging":
        method.update({"mu": cfg.nudging.mu, "v0": cfg.nudging.v0_mode})
    elif cfg.method == "enkf":
        method.update(
            {
                "members": cfg.enkf.members,
                "sigma_e_sq": cfg.enkf.sigma_e_sq,
                "sigma_i_sq": cfg.enkf.sigma_i_sq,
            }
        )
    if cfg.model == "nse":
        method["observed_variable"] = cfg.observed_variable
    return {
        "model": model,
        "method": method,
        "spin_up_time": cfg.spin_up_time,
        "horizon": cfg.horizon,
        "record_stride": cfg.record_stride,
        "master_seed": cfg.master_seed,
    }


def _build_manifest(
    cfg: TwinConfig,
    n_steps: int,
    spin_up_seconds: float,
    run_seconds: float,
    status: str,
    failure: dict | None,
) -> dict:
    params = cfg.model_params
    grid = params.make_grid()
    packing = observed_packing(grid, cfg.cutoff_m)
    derived: dict = {
        "dealias_cutoff": grid.dealias_cutoff,
        "observed_mode_count": 2 * packing.pair_count,
        "independent_observed_modes": packing.pair_count,
        "observed_real_dof": 2 * packing.pair_count,
        "steps": n_steps,
    }
    if cfg.method == "nudging":
        derived["cfl"] = cfl_check(cfg.nudging.mu, params.dt).__dict__
    if cfg.method == "enkf":
        derived["advisory_min_members"] = recommended_min_members(grid, cfg.cutoff_m)
    if cfg.model == "nse":
        derived["grashof"] = compute_grashof(params)
        derived["grashof_norm_convention"] = "amplitude (||f|| := forcing_amplitude)"
    manifest = {
        "code_version": __version__,
        "config": _config_dict(cfg),
        "seed": cfg.master_seed,
        "status": status,
        "timings_seconds": {"spin_up": spin_up_seconds, "assimilation": run_seconds},
        "derived": derived,
    }
    if failure is not None:
        manifest["failure"] = failure
    return manifest


def stationary_stats(records: list[ErrorRecord], fraction: float = 1.0 / 3.0) -> dict:
    """Median and 10-90% band of each error component over the trailing
    `fraction` of the recorded horizon (robust plateau statistics)."""
    if not records:
        raise ConfigurationError("no records to summarize")
    t_end = records[-1].time
    t_start = t_end * (1.0 - fraction)
    tail = [r for r in records if r.time >= t_start]
    out = {}
    for name in ("err_observed", "err_unobserved", "err_total"):
        values = np.array([getattr(r, name) for r in tail])
        out[name] = {
            "median": float(np.median(values)),
            "p10": float(np.percentile(values, 10)),
            "p90": float(np.percentile(values, 90)),
        }
    return out

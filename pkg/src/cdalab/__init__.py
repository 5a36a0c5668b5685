"""cdalab: twin-experiment lab for continuous data assimilation.

Pseudospectral solvers for the 1D Kuramoto-Sivashinsky and 2D incompressible
Navier-Stokes equations, feedback-control nudging, a stochastic ensemble
Kalman filter, and a deterministic twin-experiment harness with CSV/SVG
output.
"""

__version__ = "0.1.0"

from .enkf import (
    EnkfParams,
    Ensemble,
    analysis_step,
    ensemble_mean,
    forecast_and_inflate,
    init_ensemble,
    recommended_min_members,
)
from .errors import BlowUpError, ConfigurationError, GainDegeneracyError
from .kse import KseParams, KseSolver, KseStepper, initial_profile, linear_symbol
from .nse import (
    NseParams,
    NseSolver,
    NseStepper,
    compute_grashof,
    derived_fields,
    forcing_field,
    kinetic_energy,
)
from .nudging import (
    CflReport,
    NudgingParams,
    cfl_check,
    nudged_kse_step,
    nudged_nse_step,
)
from .rng import SeedHub, derive_seed, stream_generator
from .spectral import (
    NoiseSpec,
    Projector,
    SpectralField,
    WaveGrid,
    dealias,
    energy_spectrum,
    forward_transform,
    generate_noise,
    hermitian_residual,
    inverse_transform,
    l2_norm,
    observed_packing,
    project,
    state_packing,
)
from .twin import (
    ErrorRecord,
    ObservationStream,
    TwinConfig,
    TwinResult,
    error_decomposition,
    generate_reference,
    run_twin_experiment,
    stationary_stats,
)

__all__ = [name for name in dir() if not name.startswith("_")]

"""2D incompressible Navier-Stokes solver, streamfunction form, ETDRK4.

The evolved variable is the streamfunction psi on the periodic square
[-pi, pi)^2, with velocity u = (d_y psi, -d_x psi) and vorticity
omega = -Lap(psi):

    psi_t + Lap^{-1}(u . grad omega) = nu*Lap(psi) + F,

where the forcing enters directly through its streamfunction-equation form
F = A * cos(k_f . x), A the configured forcing strength times
FORCING_TERM_SCALE. The inverse Laplacian is mean-free (k=0 coefficient
pinned to zero). Time stepping is ETDRK4 with the diagonal linear symbol
-nu*|k|^2; the phi-function coefficients are evaluated by contour averaging
on a unit circle around each L*dt to stay accurate for |L*dt| << 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, ConfigurationError
from .spectral import (
    BLOWUP_LIMIT,
    SpectralField,
    WaveGrid,
    fft_coeffs,
    forward_transform,
    ifft_values,
)

_CONTOUR_POINTS = 32

# Cosine-term amplitude per unit forcing strength. Calibrated so the
# canonical strength-50 configuration sits on a chaotic attractor
# (twin-separation rate ~0.5/unit) with max|u| ~ 4, which the explicit
# advective stages integrate stably at dt=0.01 on the n=128 grid; a literal
# strength-50 cosine drives max|u| above 100 and no stated time step
# survives the advective stability limit.
FORCING_TERM_SCALE = 1.0 / 200.0


@dataclass(frozen=True)
class NseParams:
    nu: float = 0.01
    forcing_amplitude: float = 50.0
    forcing_mode: tuple[int, int] = (5, 5)
    n: int = 128
    dt: float = 0.01

    def __post_init__(self) -> None:
        if self.nu <= 0:
            raise ConfigurationError(f"nu must be positive, got {self.nu}")
        if self.dt <= 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        grid = self.make_grid()
        if max(abs(m) for m in self.forcing_mode) > grid.dealias_cutoff:
            raise ConfigurationError(
                f"forcing mode {self.forcing_mode} outside the dealiasing "
                f"cutoff {grid.dealias_cutoff}"
            )

    def make_grid(self) -> WaveGrid:
        return WaveGrid(dims=2, n=self.n, length=2.0 * np.pi, origin=-np.pi)

    @property
    def forcing_term_amplitude(self) -> float:
        """Amplitude of the streamfunction-equation forcing cosine.

        `forcing_amplitude` is the forcing strength (the Grashof numerator);
        the term entering the dynamics is strength * FORCING_TERM_SCALE.
        """
        return self.forcing_amplitude * FORCING_TERM_SCALE


def forcing_field(grid: WaveGrid, amplitude: float, mode: tuple[int, int]) -> SpectralField:
    """Streamfunction-equation forcing amplitude*cos(k_f . x) as a single
    cosine lattice mode."""
    x, y = grid.coords()
    phase = grid.k_unit * (mode[0] * x + mode[1] * y)
    return forward_transform(grid, amplitude * np.cos(phase))


def compute_grashof(params: NseParams, first_stokes_eigenvalue: float = 1.0) -> float:
    """Forcing-strength label ||f|| / (nu^2 * lambda_1).

    Uses the amplitude convention ||f|| := forcing_amplitude, the only
    normalization under which the canonical configuration (f0=50, nu=0.01)
    carries its published label 5e5. Recorded in run manifests, not used by
    the dynamics.
    """
    return params.forcing_amplitude / (params.nu**2 * first_stokes_eigenvalue)


def derived_fields(field: SpectralField) -> tuple[SpectralField, SpectralField, SpectralField]:
    """Velocity components and vorticity derived from the streamfunction."""
    grid = field.grid
    ik1 = 1j * grid.k_phys(0)
    ik2 = 1j * grid.k_phys(1)
    ksq = grid.k_phys(0) ** 2 + grid.k_phys(1) ** 2
    u1 = SpectralField(grid, ik2 * field.coeffs)
    u2 = SpectralField(grid, -ik1 * field.coeffs)
    vorticity = SpectralField(grid, ksq * field.coeffs)
    return u1, u2, vorticity


def kinetic_energy(field: SpectralField) -> float:
    """0.5 * ||u||^2 for the velocity derived from this streamfunction."""
    grid = field.grid
    ksq = grid.k_phys(0) ** 2 + grid.k_phys(1) ** 2
    return float(0.5 * grid.measure * np.sum(ksq * np.abs(field.coeffs) ** 2))


def _etdrk4_coefficient(expr, lr: np.ndarray, dt: float) -> np.ndarray:
    return dt * expr(lr).mean(axis=-1).real


class NseStepper:
    """Immutable per-(grid, dt, nu) ETDRK4 tables plus the forcing term."""

    def __init__(self, params: NseParams):
        self.params = params
        self.grid = params.make_grid()
        self.dt = params.dt
        grid = self.grid

        k1 = grid.k_phys(0)
        k2 = grid.k_phys(1)
        self.ik1 = 1j * k1
        self.ik2 = 1j * k2
        self.ksq = k1**2 + k2**2
        inv_ksq = np.zeros_like(self.ksq)
        nonzero = self.ksq > 0
        inv_ksq[nonzero] = 1.0 / self.ksq[nonzero]
        self.inv_ksq = inv_ksq
        self.mask = grid.dealias_mask
        forcing = (
            forcing_field(grid, params.forcing_term_amplitude, params.forcing_mode).coeffs
            * self.mask
        )
        forcing.reshape(-1)[0] = 0.0  # exactly mean-free
        self.forcing = forcing

        symbol = -params.nu * self.ksq
        dt = params.dt
        self.exp_full = np.exp(dt * symbol)
        self.exp_half = np.exp(0.5 * dt * symbol)

        # contour quadrature around each L*dt avoids cancellation at small |L*dt|
        roots = np.exp(1j * np.pi * (np.arange(_CONTOUR_POINTS) + 0.5) / _CONTOUR_POINTS)
        lr = dt * symbol[..., None] + roots
        self.coeff_q = _etdrk4_coefficient(lambda z: (np.exp(z / 2) - 1) / z, lr, dt)
        self.coeff_f1 = _etdrk4_coefficient(
            lambda z: (-4 - z + np.exp(z) * (4 - 3 * z + z**2)) / z**3, lr, dt
        )
        self.coeff_f2 = _etdrk4_coefficient(
            lambda z: (2 + z + np.exp(z) * (-2 + z)) / z**3, lr, dt
        )
        self.coeff_f3 = _etdrk4_coefficient(
            lambda z: (-4 - 3 * z - z**2 + np.exp(z) * (4 - z)) / z**3, lr, dt
        )

    def advection(self, coeffs: np.ndarray) -> np.ndarray:
        """Dealiased spectral u . grad(omega); accepts leading batch axes."""
        grid = self.grid
        u1 = ifft_values(grid, self.ik2 * coeffs)
        u2 = ifft_values(grid, -self.ik1 * coeffs)
        vort = self.ksq * coeffs
        wx = ifft_values(grid, self.ik1 * vort)
        wy = ifft_values(grid, self.ik2 * vort)
        return fft_coeffs(grid, u1 * wx + u2 * wy) * self.mask

    def nonlinear(self, coeffs: np.ndarray) -> np.ndarray:
        """Negated mean-free inverse Laplacian of the advection term plus the
        forcing term: adv/(-|k|^2) with k=0 pinned to zero, then negated."""
        return self.advection(coeffs) * self.inv_ksq + self.forcing

    def step(self, coeffs: np.ndarray, nonlinear=None) -> np.ndarray:
        """One ETDRK4 step; accepts leading batch axes."""
        nl = self.nonlinear if nonlinear is None else nonlinear
        n0 = nl(coeffs)
        a = self.exp_half * coeffs + self.coeff_q * n0
        na = nl(a)
        b = self.exp_half * coeffs + self.coeff_q * na
        nb = nl(b)
        c = self.exp_half * a + self.coeff_q * (2 * nb - n0)
        nc = nl(c)
        return (
            self.exp_full * coeffs
            + self.coeff_f1 * n0
            + 2 * self.coeff_f2 * (na + nb)
            + self.coeff_f3 * nc
        )


class NseSolver:
    """Owns one evolving streamfunction state; default start is rest."""

    def __init__(self, params: NseParams | None = None, coeffs: np.ndarray | None = None):
        self.params = params or NseParams()
        self.stepper = NseStepper(self.params)
        self.grid = self.stepper.grid
        if coeffs is None:
            coeffs = np.zeros(self.grid.shape, dtype=np.complex128)
        if coeffs.shape != self.grid.shape:
            raise ConfigurationError(
                f"initial coefficients shape {coeffs.shape} does not match grid {self.grid.shape}"
            )
        coeffs = np.asarray(coeffs, dtype=np.complex128) * self.grid.dealias_mask
        coeffs.reshape(-1)[0] = 0.0  # mean-free streamfunction
        self.coeffs = coeffs
        self._steps = 0
        self._t0 = 0.0

    @property
    def time(self) -> float:
        return self._t0 + self._steps * self.params.dt

    @property
    def field(self) -> SpectralField:
        return SpectralField(self.grid, self.coeffs)

    def step(self, count: int = 1) -> None:
        for _ in range(count):
            out = self.stepper.step(self.coeffs)
            self._steps += 1
            if not np.all(np.isfinite(out)) or np.max(np.abs(out)) > BLOWUP_LIMIT:
                raise BlowUpError(self.time)
            self.coeffs = out

    def spin_up(self, duration: float) -> None:
        self.step(int(round(duration / self.params.dt)))
        self.reset_clock()

    def reset_clock(self) -> None:
        self._t0 = 0.0
        self._steps = 0

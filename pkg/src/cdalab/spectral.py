"""Fourier-space fields, transforms, projections, noise, and norms.

Conventions used throughout the package:

- Coefficients are amplitudes: the forward transform divides by the point
  count, so a constant field c has coefficient c at k=0 and cos(k_phys*x)
  has 1/2 at lattice indices +-k.
- The physical wavenumber for lattice index k is 2*pi*k/length.
- L2 norms carry the domain measure: ||f||^2 = measure * sum_k |c_k|^2,
  which equals the trapezoidal quadrature of |f|^2 on the periodic grid.
- Real fields are represented by Hermitian coefficient arrays,
  c(-k) = conj(c(k)); constructors that draw or update coefficients mirror
  an independent half-lattice so the symmetry holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as _fft

from .errors import ConfigurationError

BLOWUP_LIMIT = 1e10


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class WaveGrid:
    """Periodic grid with its integer wavenumber lattice.

    Parameters
    ----------
    dims : 1 or 2
    n : points per dimension (power of two, >= 4)
    length : domain length per dimension
    origin : coordinate of the first grid node
    """

    dims: int
    n: int
    length: float
    origin: float = 0.0

    def __post_init__(self) -> None:
        if self.dims not in (1, 2):
            raise ConfigurationError(f"dims must be 1 or 2, got {self.dims}")
        if not _is_power_of_two(self.n) or self.n < 4:
            raise ConfigurationError(f"n must be a power of two >= 4, got {self.n}")
        if self.length <= 0:
            raise ConfigurationError(f"length must be positive, got {self.length}")

        ax = np.rint(np.fft.fftfreq(self.n, 1.0 / self.n)).astype(np.int64)
        cutoff = (2 * (self.n // 2)) // 3
        if self.dims == 1:
            radius_sq = ax * ax
            mask = np.abs(ax) <= cutoff
            axes = (ax,)
        else:
            k1 = ax[:, None]
            k2 = ax[None, :]
            radius_sq = k1 * k1 + k2 * k2
            mask = (np.abs(k1) <= cutoff) & (np.abs(k2) <= cutoff)
            axes = (k1, k2)

        set_ = object.__setattr__
        set_(self, "modes", axes)
        set_(self, "mode_radius_sq", radius_sq)
        set_(self, "dealias_cutoff", int(cutoff))
        set_(self, "dealias_mask", mask)
        set_(self, "k_unit", 2.0 * np.pi / self.length)
        set_(self, "shape", (self.n,) * self.dims)
        set_(self, "size", self.n**self.dims)
        set_(self, "measure", self.length**self.dims)

    @property
    def fft_axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dims, 0))

    def k_phys(self, axis: int = 0) -> np.ndarray:
        """Physical wavenumber array for one axis, broadcastable to shape."""
        return self.modes[axis] * self.k_unit

    def axis_coords(self) -> np.ndarray:
        return self.origin + np.arange(self.n) * (self.length / self.n)

    def coords(self):
        """Physical coordinates: one array (1D) or a meshgrid tuple (2D)."""
        x = self.axis_coords()
        if self.dims == 1:
            return x
        return np.meshgrid(x, x, indexing="ij")


@dataclass
class SpectralField:
    """Complex Fourier coefficients of a real periodic field."""

    grid: WaveGrid
    coeffs: np.ndarray

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())


def fft_coeffs(grid: WaveGrid, values: np.ndarray) -> np.ndarray:
    """Forward transform of physical samples; supports leading batch axes."""
    return _fft.fftn(values, axes=grid.fft_axes) / grid.size


def ifft_values(grid: WaveGrid, coeffs: np.ndarray, keep_complex: bool = False) -> np.ndarray:
    """Inverse transform to physical samples; supports leading batch axes."""
    values = _fft.ifftn(coeffs * grid.size, axes=grid.fft_axes)
    return values if keep_complex else values.real


def forward_transform(grid: WaveGrid, values: np.ndarray) -> SpectralField:
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise ConfigurationError(
            f"field shape {values.shape} does not match grid shape {grid.shape}"
        )
    if np.iscomplexobj(values):
        raise ConfigurationError("physical-space input must be real")
    return SpectralField(grid, fft_coeffs(grid, values.astype(np.float64)))


def inverse_transform(field: SpectralField, keep_complex: bool = False) -> np.ndarray:
    if field.coeffs.shape != field.grid.shape:
        raise ConfigurationError(
            f"coefficient shape {field.coeffs.shape} does not match grid "
            f"shape {field.grid.shape}"
        )
    return ifft_values(field.grid, field.coeffs, keep_complex=keep_complex)


def dealias(field: SpectralField) -> SpectralField:
    """Zero every mode above the 2/3 cutoff (per dimension)."""
    return SpectralField(field.grid, field.coeffs * field.grid.dealias_mask)


def hermitian_residual(field: SpectralField) -> float:
    """max |c(-k) - conj(c(k))| over the lattice; 0 for an exactly real field."""
    c = field.coeffs
    mirrored = c
    for axis in range(-field.grid.dims, 0):
        mirrored = np.roll(np.flip(mirrored, axis=axis), 1, axis=axis)
    return float(np.max(np.abs(mirrored - np.conj(c))))


@dataclass(frozen=True)
class Projector:
    """Splits a field into the observed low-mode band 1 <= |k| <= M and its
    complement (which keeps the mean mode and everything above M)."""

    grid: WaveGrid
    cutoff_m: int

    def __post_init__(self) -> None:
        if self.cutoff_m < 1:
            raise ConfigurationError(f"cutoff_m must be >= 1, got {self.cutoff_m}")
        if self.cutoff_m > self.grid.dealias_cutoff:
            raise ConfigurationError(
                f"cutoff_m={self.cutoff_m} exceeds the dealiasing cutoff "
                f"{self.grid.dealias_cutoff} for n={self.grid.n}"
            )
        rsq = self.grid.mode_radius_sq
        mask = (rsq >= 1) & (rsq <= self.cutoff_m**2)
        object.__setattr__(self, "observed_mask", mask)

    @property
    def mode_count(self) -> int:
        """Lattice modes in the observed shell (conjugate pairs counted twice)."""
        return int(np.count_nonzero(self.observed_mask))

    @property
    def independent_mode_count(self) -> int:
        return self.mode_count // 2

    def observed(self, field: SpectralField) -> SpectralField:
        return SpectralField(field.grid, field.coeffs * self.observed_mask)

    def complement(self, field: SpectralField) -> SpectralField:
        return SpectralField(field.grid, field.coeffs * ~self.observed_mask)


def project(field: SpectralField, projector: Projector, part: str) -> SpectralField:
    if part == "observed":
        return projector.observed(field)
    if part == "complement":
        return projector.complement(field)
    raise ConfigurationError(f"unknown projection part {part!r}")


def l2_norm(field: SpectralField, part: str = "all", projector: Projector | None = None) -> float:
    """Parseval L2 norm of the selected mode set."""
    power = np.abs(field.coeffs) ** 2
    if part == "all":
        total = power.sum()
    elif part in ("observed", "complement"):
        if projector is None:
            raise ConfigurationError(f"part={part!r} requires a projector")
        mask = projector.observed_mask if part == "observed" else ~projector.observed_mask
        total = power[mask].sum()
    else:
        raise ConfigurationError(f"unknown norm part {part!r}")
    return float(np.sqrt(field.grid.measure * total))


def energy_spectrum(field: SpectralField) -> tuple[np.ndarray, np.ndarray]:
    """Shell-summed spectral energy.

    Shells have unit width centered on integer |k| (1D shells are exact
    integer |k|). The energies sum to the squared L2 norm.
    """
    radius = np.sqrt(field.grid.mode_radius_sq.astype(np.float64))
    shell = np.floor(radius + 0.5).astype(np.int64)
    weights = field.grid.measure * np.abs(field.coeffs) ** 2
    energy = np.bincount(shell.ravel(), weights=weights.ravel())
    return np.arange(energy.size), energy


class ModePacking:
    """Bijection between Hermitian coefficient arrays and complex vectors.

    The vector holds one entry per independent mode (one representative per
    conjugate pair, optionally the mean mode first). `unpack` rebuilds the
    full lattice by conjugate mirroring, enforcing Hermitian symmetry
    exactly; the mean entry is forced real.
    """

    def __init__(self, grid: WaveGrid, include_mean: bool, max_radius: int | None = None):
        self.grid = grid
        self.include_mean = include_mean
        self.max_radius = max_radius

        if grid.dims == 1:
            half = grid.modes[0] > 0
        else:
            k1, k2 = grid.modes
            half = (k1 > 0) | ((k1 == 0) & (k2 > 0))
        select = half & grid.dealias_mask
        if max_radius is not None:
            select = select & (grid.mode_radius_sq <= max_radius**2)

        idx = np.flatnonzero(select.ravel())
        # conjugate partner of flat index: negate each axis index mod n
        n = grid.n
        if grid.dims == 1:
            mirror = (-idx) % n
        else:
            i1, i2 = np.unravel_index(idx, grid.shape)
            mirror = np.ravel_multi_index(((-i1) % n, (-i2) % n), grid.shape)
        self.indices = idx
        self.mirror_indices = mirror
        self.pair_count = idx.size
        self.size = idx.size + (1 if include_mean else 0)

    def pack(self, coeffs: np.ndarray) -> np.ndarray:
        flat = coeffs.reshape(*coeffs.shape[: -self.grid.dims], self.grid.size)
        parts = flat[..., self.indices]
        if self.include_mean:
            mean = flat[..., :1]
            return np.concatenate([mean, parts], axis=-1)
        return parts

    def unpack(self, vec: np.ndarray) -> np.ndarray:
        lead = vec.shape[:-1]
        flat = np.zeros(lead + (self.grid.size,), dtype=np.complex128)
        if self.include_mean:
            flat[..., 0] = vec[..., 0].real
            rest = vec[..., 1:]
        else:
            rest = vec
        flat[..., self.indices] = rest
        flat[..., self.mirror_indices] = np.conj(rest)
        return flat.reshape(lead + self.grid.shape)

    @property
    def real_size(self) -> int:
        """Real degrees of freedom: Re and Im per independent mode (plus the
        mean when included)."""
        return 2 * self.pair_count + (1 if self.include_mean else 0)

    def pack_real(self, coeffs: np.ndarray) -> np.ndarray:
        """Flatten to real coordinates: [mean,] Re parts, Im parts."""
        z = self.pack(coeffs)
        if self.include_mean:
            return np.concatenate([z[..., :1].real, z[..., 1:].real, z[..., 1:].imag], axis=-1)
        return np.concatenate([z.real, z.imag], axis=-1)

    def unpack_real(self, vec: np.ndarray) -> np.ndarray:
        m = self.pair_count
        if self.include_mean:
            mean = vec[..., :1]
            z = vec[..., 1 : 1 + m] + 1j * vec[..., 1 + m :]
            return self.unpack(np.concatenate([mean.astype(np.complex128), z], axis=-1))
        z = vec[..., :m] + 1j * vec[..., m:]
        return self.unpack(z)


@lru_cache(maxsize=None)
def state_packing(grid: WaveGrid) -> ModePacking:
    """Packing over all dealias-supported independent modes.

    The mean mode is excluded: both solved models are mean-free (the KSE
    nonlinearity preserves a zero mean exactly, the streamfunction is pinned
    mean-free), so the mean carries no uncertainty; `unpack` restores it to
    zero.
    """
    return ModePacking(grid, include_mean=False)


@lru_cache(maxsize=None)
def observed_packing(grid: WaveGrid, cutoff_m: int) -> ModePacking:
    """Packing over the independent observed modes 1 <= |k| <= M."""
    Projector(grid, cutoff_m)  # validates M against the dealias cutoff
    return ModePacking(grid, include_mean=False, max_radius=cutoff_m)


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian noise on the observed band.

    `variance` is the per-component variance: Re and Im of each independent
    mode with 1 <= |k| <= cutoff_m are drawn i.i.d. N(0, sqrt(variance));
    conjugate modes are mirrored so the noise field is real in physical space.
    """

    variance: float
    cutoff_m: int

    def __post_init__(self) -> None:
        if self.variance < 0:
            raise ConfigurationError(f"variance must be >= 0, got {self.variance}")

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


def generate_noise(grid: WaveGrid, spec: NoiseSpec, rng: np.random.Generator) -> SpectralField:
    packing = observed_packing(grid, spec.cutoff_m)
    re = rng.normal(0.0, spec.std, packing.pair_count)
    im = rng.normal(0.0, spec.std, packing.pair_count)
    return SpectralField(grid, packing.unpack(re + 1j * im))

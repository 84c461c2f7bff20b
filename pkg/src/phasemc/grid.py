"""Wavefunctions on a uniform spatial grid, in harmonic-oscillator units.

Everything here uses ħ = m = ω = 1, so momentum and wavenumber coincide
(p ≡ k) and the trap Hamiltonian is H0 = x²/2 + p²/2.  States are complex
amplitude arrays ψ(x_i) on a periodic grid; inner products are plain
Riemann sums with weight dx, which are spectrally accurate for smooth
states that decay well inside the box.

The momentum representation follows the unitary convention

    ψ̃(k) = (2π)^(-1/2) ∫ ψ(x) e^(-ikx) dx,

discretized with the FFT, so that Σ|ψ̃(k)|² dk = Σ|ψ(x)|² dx exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, GridTooNarrow, NotNormalized

__all__ = [
    "Grid",
    "PhasePoint",
    "Wavefunction",
    "MomentumWavefunction",
    "coherent_state",
    "to_momentum_space",
    "to_position_space",
    "mean_x",
    "mean_p",
    "mean_energy",
    "boundary_mass",
]

#: |norm² - 1| above this is rejected by observable evaluation.
NORM_TOL = 1e-6

#: Gaussian tail mass outside the grid above this raises GridTooNarrow.
TAIL_TOL = 1e-12


class PhasePoint(NamedTuple):
    """A point (x, p) in phase space, harmonic-oscillator units."""

    x: float
    p: float


@dataclass(frozen=True)
class Grid:
    """Uniform periodic spatial grid.

    Parameters
    ----------
    x_min, x_max : float
        Box edges.  Grid points are x_min + i*dx, i = 0..n_points-1
        (the right edge is excluded, as usual for periodic transforms).
    n_points : int
        Number of points; must be a power of two.
    """

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.x_max <= self.x_min:
            raise ConfigError(f"empty grid: x_min={self.x_min}, x_max={self.x_max}")
        n = self.n_points
        if n < 2 or (n & (n - 1)) != 0:
            raise ConfigError(f"n_points must be a power of two, got {n}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def dk(self) -> float:
        return 2.0 * math.pi / (self.x_max - self.x_min)

    @property
    def k_max(self) -> float:
        """Largest resolvable wavenumber magnitude (Nyquist)."""
        return math.pi / self.dx

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k_fft(self) -> np.ndarray:
        """Wavenumber array in FFT (unshifted) order."""
        return 2.0 * math.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @property
    def k_sorted(self) -> np.ndarray:
        """Wavenumber array in ascending order."""
        return np.fft.fftshift(self.k_fft)

    def index_near(self, x: float) -> int:
        """Index of the grid point closest to x."""
        return int(round((x - self.x_min) / self.dx))


@dataclass
class Wavefunction:
    """Complex amplitudes ψ(x_i) on a grid (units: length^(-1/2))."""

    grid: Grid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.grid.n_points,):
            raise ConfigError(
                f"amplitude array shape {amps.shape} != ({self.grid.n_points},)"
            )
        self.amplitudes = amps

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real * self.grid.dx)

    def normalized(self) -> "Wavefunction":
        n2 = self.norm_squared()
        if n2 <= 0.0 or not math.isfinite(n2):
            raise NotNormalized(f"cannot normalize state with norm² = {n2}")
        return Wavefunction(self.grid, self.amplitudes / math.sqrt(n2))

    def copy(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.amplitudes.copy())


@dataclass
class MomentumWavefunction:
    """Momentum-representation amplitudes ψ̃(k_i) on the ascending k grid."""

    grid: Grid
    amplitudes: np.ndarray  # aligned with grid.k_sorted

    @property
    def k(self) -> np.ndarray:
        return self.grid.k_sorted

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real * self.grid.dk)


def _gaussian_tail_mass(center: float, sigma: float, lo: float, hi: float) -> float:
    """Probability mass of N(center, sigma²) outside [lo, hi]."""
    s = sigma * math.sqrt(2.0)
    return 0.5 * (math.erfc((center - lo) / s) + math.erfc((hi - center) / s))


def coherent_state(center: PhasePoint, sigma: float, grid: Grid) -> Wavefunction:
    """Minimum-uncertainty Gaussian wavepacket centered at a phase-space point.

    ψ(x) = (2πσ²)^(-1/4) exp(-(x - x_c)² / 4σ²) exp(i p_c x)

    The |ψ|² profile is a normal density with standard deviation σ; the
    momentum profile is a Gaussian of width 1/(2σ) around p_c.

    Raises
    ------
    GridTooNarrow
        If the Gaussian mass outside the box exceeds 1e-12.
    """
    x_c, p_c = float(center[0]), float(center[1])
    if sigma <= 0.0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    tail = _gaussian_tail_mass(x_c, sigma, grid.x_min, grid.x_max)
    if tail > TAIL_TOL:
        raise GridTooNarrow(
            f"coherent state at x={x_c} (sigma={sigma}) has tail mass "
            f"{tail:.3e} outside [{grid.x_min}, {grid.x_max}]"
        )
    x = grid.x
    norm = (2.0 * math.pi * sigma**2) ** -0.25
    amps = norm * np.exp(-((x - x_c) ** 2) / (4.0 * sigma**2) + 1j * p_c * x)
    return Wavefunction(grid, amps)


def to_momentum_space(psi: Wavefunction) -> MomentumWavefunction:
    """Unitary transform to the momentum representation.

    Norm is preserved to machine precision; composing with
    :func:`to_position_space` is the identity.
    """
    g = psi.grid
    raw = np.fft.fft(psi.amplitudes)
    # phase factor accounts for x_min offset of the grid origin
    phased = raw * np.exp(-1j * g.k_fft * g.x_min)
    amps = np.fft.fftshift(phased) * (g.dx / math.sqrt(2.0 * math.pi))
    return MomentumWavefunction(g, amps)


def to_position_space(phi: MomentumWavefunction) -> Wavefunction:
    """Inverse of :func:`to_momentum_space`."""
    g = phi.grid
    phased = np.fft.ifftshift(phi.amplitudes) / (g.dx / math.sqrt(2.0 * math.pi))
    raw = phased * np.exp(1j * g.k_fft * g.x_min)
    return Wavefunction(g, np.fft.ifft(raw))


def _require_normalized(psi: Wavefunction) -> None:
    n2 = psi.norm_squared()
    if abs(n2 - 1.0) > NORM_TOL:
        raise NotNormalized(f"norm² = {n2!r}, expected 1 within {NORM_TOL}")


def mean_x(psi: Wavefunction) -> float:
    """Position expectation ⟨x⟩ of a normalized state."""
    _require_normalized(psi)
    density = np.abs(psi.amplitudes) ** 2
    return float(np.dot(density, psi.grid.x) * psi.grid.dx)


def mean_p(psi: Wavefunction) -> float:
    """Momentum expectation ⟨p⟩, evaluated in momentum space."""
    _require_normalized(psi)
    g = psi.grid
    spec = np.abs(np.fft.fft(psi.amplitudes)) ** 2
    # normalization cancels in the ratio against the spectral norm
    return float(np.dot(spec, g.k_fft) / np.sum(spec))


def mean_energy(psi: Wavefunction) -> float:
    """Trap-Hamiltonian expectation ⟨H0⟩ = ⟨x²⟩/2 + ⟨p²⟩/2."""
    _require_normalized(psi)
    g = psi.grid
    density = np.abs(psi.amplitudes) ** 2
    pot = 0.5 * np.dot(density, g.x**2) * g.dx
    spec = np.abs(np.fft.fft(psi.amplitudes)) ** 2
    kin = 0.5 * np.dot(spec, g.k_fft**2) / np.sum(spec)
    return float(pot + kin)


def boundary_mass(psi: Wavefunction, fraction: float = 0.9) -> float:
    """Probability mass at |x| > fraction·x_max (boundary-leak monitor)."""
    g = psi.grid
    edge = fraction * g.x_max
    density = np.abs(psi.amplitudes) ** 2
    mask = np.abs(g.x) > edge
    return float(np.sum(density[mask]) * g.dx)

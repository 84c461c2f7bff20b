"""Rectangular phase-space lattice of Gaussian detectors.

Each detector is a coherent state |α_jk⟩ centered at (j·d_x, k·d_p) with
spatial width σ; the jump operator of detector α is √γ |α⟩⟨α|.  Overlaps
c_α = ⟨α|ψ⟩ drive both the click probabilities and the damping term of the
non-unitary evolution, so they are the per-step hot spot.  Detector states
are stored on truncated windows of ±8σ around their centers: the neglected
Gaussian tail changes any overlap by far less than 1e-8, and the windowed
structure turns the overlap sweep into one small matrix product instead of
a dense N_detectors × N_grid contraction.

For two detectors with σ = √(1/2) the overlap law is

    |⟨α|α'⟩|² = exp(-(Δx² + Δp²)/2),

which is also the (discretized, normalized) Husimi weight governing which
detector clicks first after the particle has just been localized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .errors import ConfigError, CoverageError, GridTooCoarse, GridTooNarrow
from .grid import Grid, PhasePoint, Wavefunction

__all__ = [
    "DetectorLattice",
    "build_lattice",
    "overlaps",
    "apply_damping",
    "husimi_click_distribution",
    "initial_dispersion",
    "analytic_overlap_sq",
    "required_coverage_radius",
]

#: Half-width of the truncation window, in units of the detector width.
WINDOW_SIGMAS = 8.0

#: Minimal margin (ho length units) the lattice must keep beyond the
#: classical orbit; below this the run is considered uncoverable.
MIN_ORBIT_MARGIN = 3.0


def analytic_overlap_sq(dx_: float, dp_: float, sigma: float) -> float:
    """|⟨α|α'⟩|² for two equal-width Gaussian detectors separated by (Δx, Δp)."""
    return math.exp(-(dx_**2) / (4.0 * sigma**2) - sigma**2 * dp_**2)


def required_coverage_radius(config: SimConfig) -> float:
    """Phase-space radius the lattice should cover for a full run.

    Initial orbit radius plus three standard deviations of the expected
    diffusive spread over the run, plus a fixed buffer.
    """
    d_coeff = 4.0 * math.pi * config.gamma * config.sigma**2 / (config.d_x * config.d_p)
    orbit = math.hypot(config.x0, config.p0)
    return orbit + 3.0 * math.sqrt(d_coeff * config.t_final) + 6.0


@dataclass
class DetectorLattice:
    """Immutable detector lattice with precomputed windowed states.

    ``j_values`` / ``k_values`` are the integer lattice indices along x and
    p.  Flat detector order is row-major: j varies slowest, k fastest; this
    is also the scan order used when sampling a jump from the cumulative
    distribution.
    """

    grid: Grid
    gamma: float
    d_x: float
    d_p: float
    sigma: float
    j_values: np.ndarray  # (n_x,) ints, ascending
    k_values: np.ndarray  # (n_p,) ints, ascending

    # windowed position-space machinery (filled in __post_init__)
    window_len: int = field(init=False)
    win_starts: np.ndarray = field(init=False)  # (n_x,) window start index per j
    envelopes: np.ndarray = field(init=False)  # (n_x, W) real Gaussian samples
    _phase_rows: np.ndarray = field(init=False)  # (n_p, W) exp(-i p_k w dx)
    _corner: np.ndarray = field(init=False)  # (n_x, n_p) dx·exp(-i p_k x_start_j)

    def __post_init__(self):
        g = self.grid
        half_pts = int(round(WINDOW_SIGMAS * self.sigma / g.dx))
        w = 2 * half_pts + 1
        if w > g.n_points:
            raise GridTooNarrow("detector window wider than the whole grid")
        starts = np.empty(len(self.j_values), dtype=np.int64)
        envelopes = np.empty((len(self.j_values), w))
        norm = (2.0 * math.pi * self.sigma**2) ** -0.25
        for i, j in enumerate(self.j_values):
            x_j = j * self.d_x
            s = g.index_near(x_j) - half_pts
            if s < 0 or s + w > g.n_points:
                raise GridTooNarrow(
                    f"window of detector column x={x_j} exceeds the grid"
                )
            xs = g.x_min + g.dx * np.arange(s, s + w)
            envelopes[i] = norm * np.exp(-((xs - x_j) ** 2) / (4.0 * self.sigma**2))
            starts[i] = s
        self.window_len = w
        self.win_starts = starts
        self.envelopes = envelopes

        norms = np.sum(envelopes**2, axis=1) * g.dx
        worst = float(np.max(np.abs(norms - 1.0))) if len(norms) else 0.0
        if worst > 1e-8:
            raise GridTooNarrow(f"stored detector state norm off by {worst:.2e}")

        p = self.p_centers
        offsets = g.dx * np.arange(w)
        self._phase_rows = np.exp(-1j * np.outer(p, offsets))
        x_start = g.x_min + g.dx * starts
        self._corner = g.dx * np.exp(-1j * np.outer(x_start, p))

    # ----- geometry -------------------------------------------------------

    @property
    def n_x(self) -> int:
        return len(self.j_values)

    @property
    def n_p(self) -> int:
        return len(self.k_values)

    @property
    def n_detectors(self) -> int:
        return self.n_x * self.n_p

    @property
    def x_centers(self) -> np.ndarray:
        return self.j_values * self.d_x

    @property
    def p_centers(self) -> np.ndarray:
        return self.k_values * self.d_p

    @property
    def coverage_x(self) -> float:
        """Half-extent in x beyond which the lattice no longer surrounds a state."""
        return float(np.max(np.abs(self.x_centers))) + 0.5 * self.d_x

    @property
    def coverage_p(self) -> float:
        return float(np.max(np.abs(self.p_centers))) + 0.5 * self.d_p

    def flat_index(self, j: int, k: int) -> int:
        ji = int(np.searchsorted(self.j_values, j))
        ki = int(np.searchsorted(self.k_values, k))
        if ji >= self.n_x or ki >= self.n_p or self.j_values[ji] != j or self.k_values[ki] != k:
            raise ConfigError(f"detector ({j}, {k}) not on the lattice")
        return ji * self.n_p + ki

    def jk_of_flat(self, flat: int) -> tuple[int, int]:
        ji, ki = divmod(int(flat), self.n_p)
        return int(self.j_values[ji]), int(self.k_values[ki])

    def center(self, j: int, k: int) -> PhasePoint:
        return PhasePoint(j * self.d_x, k * self.d_p)

    # ----- states ---------------------------------------------------------

    def state(self, j: int, k: int) -> Wavefunction:
        """Full-grid detector state (zero outside its window)."""
        ji = self.flat_index(j, k) // self.n_p
        amps = np.zeros(self.grid.n_points, dtype=np.complex128)
        s = self.win_starts[ji]
        xs = self.grid.x_min + self.grid.dx * np.arange(s, s + self.window_len)
        amps[s : s + self.window_len] = self.envelopes[ji] * np.exp(1j * (k * self.d_p) * xs)
        return Wavefunction(self.grid, amps)

    def window_of(self, psi_amps: np.ndarray) -> np.ndarray:
        """Gather ψ samples over every column window: shape (n_x, W)."""
        idx = self.win_starts[:, None] + np.arange(self.window_len)[None, :]
        return psi_amps[idx]


def build_lattice(config: SimConfig, grid: Grid | None = None) -> DetectorLattice:
    """Construct the detector lattice for a run.

    The lattice extent is either explicit (``config.lattice_radius``) or
    auto-sized: the coverage radius asked for by
    :func:`required_coverage_radius`, capped to what the grid can actually
    represent (detector windows must fit in the box, detector momenta must
    stay well below Nyquist).  Capping is legitimate because the diffusive
    3-sigma bound is very conservative for these orbits; trajectories that
    do wander outside the covered region are flagged by the runner rather
    than silently kept.

    Raises
    ------
    CoverageError
        If even the classical orbit plus a small margin does not fit.
    GridTooCoarse
        If a requested detector momentum exceeds the representable range.
    GridTooNarrow
        If an explicitly requested lattice does not fit in the box.
    """
    g = grid if grid is not None else config.grid()
    sigma = config.sigma
    w_half_x = WINDOW_SIGMAS * sigma + g.dx
    w_half_p = WINDOW_SIGMAS / (2.0 * sigma) + g.dk
    cap_x = min(-g.x_min, g.x_max) - w_half_x
    cap_p = g.k_max - w_half_p
    # a click on the outermost ring must not trip the boundary-leak
    # monitor (mass beyond 0.9·x_max); 6σ leaves it at the 1e-9 level
    leak_guard = 0.9 * min(-g.x_min, g.x_max) - 6.0 * sigma
    auto_cap_x = min(cap_x, leak_guard)
    if cap_x <= 0 or cap_p <= 0:
        raise GridTooNarrow("grid cannot represent even a single detector window")

    if config.lattice_radius is not None:
        radius_x = radius_p = config.lattice_radius
        if radius_x > cap_x:
            raise GridTooNarrow(
                f"requested lattice radius {radius_x} exceeds representable |x| {cap_x:.3f}"
            )
        if radius_p > cap_p:
            raise GridTooCoarse(
                f"requested lattice radius {radius_p} exceeds representable |p| {cap_p:.3f}"
            )
    else:
        # symmetric radius: the trap rotates phase space, so coverage beyond
        # the smaller of the two representable caps would never be used
        wanted = required_coverage_radius(config)
        radius_x = radius_p = min(wanted, auto_cap_x, cap_p)
        orbit = math.hypot(config.x0, config.p0)
        if radius_x < orbit + MIN_ORBIT_MARGIN:
            raise CoverageError(
                f"lattice radius {radius_x:.3f} cannot cover the "
                f"classical orbit of radius {orbit:.3f}"
            )

    j_max = int(math.floor(radius_x / config.d_x + 1e-12))
    k_max = int(math.floor(radius_p / config.d_p + 1e-12))
    j_values = np.arange(-j_max, j_max + 1)
    k_values = np.arange(-k_max, k_max + 1)

    lat = DetectorLattice(
        grid=g,
        gamma=config.gamma,
        d_x=config.d_x,
        d_p=config.d_p,
        sigma=sigma,
        j_values=j_values,
        k_values=k_values,
    )
    if abs(config.j0_effective) > j_max or abs(config.k0) > k_max:
        raise CoverageError(
            f"initial detector ({config.j0_effective}, {config.k0}) is outside "
            f"the lattice (|j| <= {j_max}, |k| <= {k_max})"
        )
    return lat


def overlaps(psi: Wavefunction, lat: DetectorLattice) -> np.ndarray:
    """Complex overlaps c_α = ⟨α|ψ⟩ for every detector, flat row-major order.

    Evaluated as windowed Riemann sums; deterministic for given inputs.
    """
    if psi.grid is not lat.grid and psi.grid != lat.grid:
        raise ConfigError("wavefunction and lattice live on different grids")
    windows = lat.window_of(psi.amplitudes)  # (n_x, W)
    weighted = lat.envelopes * windows
    c = lat._corner * (weighted @ lat._phase_rows.T)  # (n_x, n_p)
    return c.ravel()


def apply_damping(psi: Wavefunction, lat: DetectorLattice, c: np.ndarray) -> Wavefunction:
    """Damping increment u(x) = Σ_α c_α α(x), so that (Σ_α C†C) ψ = γ·u.

    Linear in ψ through c and Hermitian as an operator on states.
    """
    cm = np.asarray(c, dtype=np.complex128).reshape(lat.n_x, lat.n_p)
    coeff = (cm * np.conj(lat._corner)) / lat.grid.dx  # (n_x, n_p)
    rows = lat.envelopes * (coeff @ np.conj(lat._phase_rows))  # (n_x, W)
    out = np.zeros(lat.grid.n_points, dtype=np.complex128)
    w = lat.window_len
    for i in range(lat.n_x):
        s = lat.win_starts[i]
        out[s : s + w] += rows[i]
    return Wavefunction(lat.grid, out)


def husimi_click_distribution(j0: int, k0: int, lat: DetectorLattice) -> np.ndarray:
    """Normalized first-click probability table Q(j, k), shape (n_x, n_p).

    Q is the squared overlap of each detector with the detector at
    (j0, k0), normalized to unit total mass: the discretized Husimi weight
    of a just-localized particle.
    """
    lat.flat_index(j0, k0)  # membership check
    dxs = (lat.j_values - j0)[:, None] * lat.d_x
    dps = (lat.k_values - k0)[None, :] * lat.d_p
    q = np.exp(-(dxs**2) / (4.0 * lat.sigma**2) - lat.sigma**2 * dps**2)
    return q / q.sum()


def initial_dispersion(lat: DetectorLattice, j0: int, k0: int) -> float:
    """Second moment of the relative x displacement under the first-click table.

    Direct summation Σ Q(j,k)·((j-j0) d_x)²; this is the analytic value the
    fitted dispersion intercept is checked against.
    """
    q = husimi_click_distribution(j0, k0, lat)
    disp = ((lat.j_values - j0) * lat.d_x) ** 2
    return float(np.sum(q * disp[:, None]))

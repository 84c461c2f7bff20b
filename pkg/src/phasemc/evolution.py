"""Stochastic quantum-jump evolution of a monitored wavepacket.

Each time step of length δt does, in order:

1. compute detector overlaps c_α = ⟨α|ψ(t)⟩ and the total jump
   probability δP = Σ_α γ δt |c_α|² (pre-step state);
2. draw one uniform number r.  If r < δP a jump fires: the detector is
   selected by a cumulative scan of the probabilities in row-major lattice
   order and the state is replaced by that detector's wavepacket;
3. otherwise the no-jump evolution applies the non-unitary half-step of
   the damping term followed by split-operator trap propagation,

       ψ' = N[ exp(-iT δt/2) exp(-iV δt) exp(-iT δt/2) (ψ - (γδt/2) u) ],

   with u = Σ_α c_α α, T = p²/2 and V = x²/2.  This agrees with the plain
   first-order step (1 - iHδt)ψ/‖·‖ to O(δt²) and is exactly unitary when
   γ = 0.

Trajectories are reproducible: trajectory i of a run draws from a PCG64
stream seeded by (master_seed, i) and consumes exactly one uniform per
step, so results are independent of execution order and worker count.

The public ``no_jump_step`` is a direct, readable implementation of the
step; :class:`TrajectoryEngine` is the equivalent fast path (momentum-space
windows, detector-row pruning by a rigorous mass bound) used for ensemble
runs.  A regression test pins the two against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

try:  # fast path: skip the scipy.fft dispatch layers in the hot loop
    from scipy.fft._pocketfft import pypocketfft as _ppfft

    def _fft_raw(x: np.ndarray) -> np.ndarray:
        return _ppfft.c2c(x, (0,), True, 1.0, None, 1)

    def _ifft_raw(x: np.ndarray) -> np.ndarray:
        return _ppfft.c2c(x, (0,), False, 1.0 / x.shape[0], None, 1)

    _probe = np.arange(8, dtype=np.complex128)
    if not (
        np.allclose(_fft_raw(_probe), np.fft.fft(_probe))
        and np.allclose(_ifft_raw(_probe), np.fft.ifft(_probe))
    ):
        raise ImportError("pocketfft probe mismatch")
    del _probe
except (ImportError, TypeError):  # pragma: no cover - environment dependent
    def _fft_raw(x: np.ndarray) -> np.ndarray:
        return sfft.fft(x)

    def _ifft_raw(x: np.ndarray) -> np.ndarray:
        return sfft.ifft(x)

from ._kernels import damping_kernel, overlap_kernel
from .config import SimConfig
from .detectors import DetectorLattice, apply_damping, build_lattice, overlaps
from .errors import BoundaryLeak, ConfigError, TimestepTooLarge
from .grid import Wavefunction, boundary_mass, mean_energy, mean_p, mean_x

__all__ = [
    "ClickEvent",
    "Trajectory",
    "jump_probabilities",
    "sample_event",
    "apply_jump",
    "no_jump_step",
    "run_trajectory",
    "TrajectoryEngine",
    "get_engine",
]

#: Hard stability bound on the per-step total jump probability.
MAX_STEP_JUMP_PROB = 0.5

#: Stricter bound enforced on the first step of a run.
START_JUMP_PROB = 0.1

#: Boundary-mass tolerance (probability beyond 0.9·x_max).
BOUNDARY_TOL = 1e-6

#: Detector momentum rows with less spectral mass than this under their
#: window cannot produce overlaps above ~1e-12 and are skipped.
PRUNE_MASS = 1e-24

#: Steps between boundary/coverage monitor evaluations.
MONITOR_EVERY = 10


@dataclass(frozen=True)
class ClickEvent:
    """One detector firing: time and the detector's phase-space location."""

    t: float
    j: int
    k: int
    x: float
    p: float


@dataclass
class Trajectory:
    """One stochastic realization: an ordered series of clicks.

    ``times`` / ``js`` / ``ks`` are parallel arrays; ``x`` and ``p`` are the
    detector centers.  ``flagged`` marks trajectories whose wavepacket left
    the phase-space region covered by the lattice at some point.
    """

    config_hash: str
    index: int
    seed_key: tuple[int, int]
    times: np.ndarray
    js: np.ndarray
    ks: np.ndarray
    d_x: float
    d_p: float
    flagged: bool
    final_x: float
    final_p: float
    final_energy: float
    truncated_at: float | None = None  # time the run stopped early, if it did
    final_amplitudes: np.ndarray | None = None  # populated only on request

    @property
    def n_clicks(self) -> int:
        return len(self.times)

    @property
    def x(self) -> np.ndarray:
        return self.js * self.d_x

    @property
    def p(self) -> np.ndarray:
        return self.ks * self.d_p

    @property
    def clicks(self) -> list[ClickEvent]:
        return [
            ClickEvent(float(t), int(j), int(k), float(j * self.d_x), float(k * self.d_p))
            for t, j, k in zip(self.times, self.js, self.ks)
        ]

    def validate(self) -> None:
        if self.n_clicks and not np.all(np.diff(self.times) > 0):
            raise ConfigError("click times are not strictly increasing")


def jump_probabilities(c: np.ndarray, gamma: float, dt: float) -> np.ndarray:
    """Per-detector jump probabilities δp_α = γ δt |c_α|²."""
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    return gamma * dt * np.abs(np.asarray(c)) ** 2


def sample_event(rng: np.random.Generator, probs: np.ndarray) -> int | None:
    """One uniform draw deciding jump vs no-jump.

    Returns the flat detector index (cumulative scan in row-major lattice
    order) or ``None`` for no jump.  A draw landing exactly on an interval
    boundary belongs to the later interval.
    """
    total = float(np.sum(probs))
    if total >= 1.0:
        raise TimestepTooLarge(f"total jump probability {total} >= 1")
    r = rng.random()
    if r >= total:
        return None
    cum = np.cumsum(probs)
    return int(np.searchsorted(cum, r, side="right"))


def apply_jump(jk: tuple[int, int], lat: DetectorLattice) -> Wavefunction:
    """Post-measurement state: the stored wavepacket of detector (j, k)."""
    j, k = jk
    return lat.state(j, k)


def no_jump_step(
    psi: Wavefunction,
    lat: DetectorLattice,
    dt: float,
    *,
    include_h0: bool = True,
    first_step: bool = False,
) -> tuple[Wavefunction, np.ndarray, float]:
    """One normalized no-jump step; returns (ψ', pre-step overlaps, δP).

    Reference implementation of the step contract (see module docstring).
    ``include_h0=False`` switches the trap propagation off, leaving the
    pure damping map — useful for checking the norm expansion
    ‖ψ'‖ = 1 - γδt/2 + O(δt²) on a single-detector lattice.
    """
    c = overlaps(psi, lat)
    probs = jump_probabilities(c, lat.gamma, dt)
    total = float(np.sum(probs))
    limit = START_JUMP_PROB if first_step else MAX_STEP_JUMP_PROB
    if total >= limit:
        raise TimestepTooLarge(
            f"sum of jump probabilities {total:.3g} >= {limit} for dt={dt}; reduce dt"
        )
    amps = psi.amplitudes.copy()
    if lat.gamma != 0.0:
        u = apply_damping(psi, lat, c)
        amps -= (0.5 * lat.gamma * dt) * u.amplitudes
    if include_h0:
        g = psi.grid
        kin_half = np.exp(-0.5j * g.k_fft**2 * (0.5 * dt))
        pot = np.exp(-0.5j * g.x**2 * dt)
        amps = np.fft.ifft(np.fft.fft(amps) * kin_half)
        amps *= pot
        amps = np.fft.ifft(np.fft.fft(amps) * kin_half)
    out = Wavefunction(psi.grid, amps).normalized()
    leak = boundary_mass(out)
    if leak > BOUNDARY_TOL:
        raise BoundaryLeak(f"boundary mass {leak:.3e} exceeds {BOUNDARY_TOL}")
    return out, c, total


class TrajectoryEngine:
    """Precomputed fast path for generating trajectories of one config.

    Immutable after construction; safe to share across workers.  The state
    is kept as the raw FFT of ψ between steps, so a no-jump step costs two
    transforms.  Overlaps are evaluated in the momentum representation,
    where each detector momentum row is a Gaussian window of ~8 widths; a
    cumulative-mass bound prunes rows that cannot contribute overlaps
    above ~1e-12.
    """

    def __init__(self, config: SimConfig, *, include_h0: bool = True):
        self.config = config
        self.grid = config.grid()
        self.lattice = build_lattice(config, self.grid)
        self.include_h0 = include_h0
        self.config_hash = config.config_hash()

        g = self.grid
        lat = self.lattice
        n = g.n_points
        dt = config.dt
        sigma = config.sigma
        sigma_k = 1.0 / (2.0 * sigma)
        scale = g.dx / math.sqrt(2.0 * math.pi)

        kin = np.exp(-0.5j * g.k_fft**2 * (0.5 * dt))
        self._kin_half = kin if include_h0 else np.ones(n, dtype=np.complex128)
        pot = np.exp(-0.5j * g.x**2 * dt)
        self._pot = pot if include_h0 else np.ones(n, dtype=np.complex128)

        # momentum windows: row r covers detector momentum p_r ± 8 σ_k
        hk = int(round(8.0 * sigma_k / g.dk))
        wk = 2 * hk + 1
        p_rows = lat.p_centers
        s_center = (n // 2 + np.round(p_rows / g.dk)).astype(np.int64)
        s0 = s_center - hk
        if np.any(s0 < 0) or np.any(s0 + wk > n):
            raise ConfigError("detector momentum window exceeds the grid spectrum")
        self._wk = wk
        self._s0 = s0
        offs = np.arange(wk)
        kappa = (s0[:, None] + offs[None, :] - n // 2) * g.dk  # (n_p, Wk) sorted values
        q = kappa - p_rows[:, None]
        gauss = (2.0 * sigma**2 / math.pi) ** 0.25 * np.exp(-(sigma**2) * q**2)
        self._env_c = g.dk * scale * gauss * np.exp(-1j * kappa * g.x_min)
        self._env_u = gauss * np.exp(1j * kappa * g.x_min) / scale
        x_cols = lat.x_centers
        q0 = kappa[:, 0] - p_rows
        self._a2 = np.exp(1j * np.outer(q0, x_cols))  # (n_p, n_x)
        self._b2t = np.exp(1j * g.dk * np.outer(offs, x_cols))  # (Wk, n_x)
        self._b2_conj = np.ascontiguousarray(np.conj(self._b2t).T)  # (n_x, Wk)
        self._idxk = ((s0[:, None] + offs[None, :]) - n // 2) % n  # fft-order gather
        self._sorted_of_fft = (np.arange(n) + n // 2) % n
        self._mass_factor = scale**2 * g.dk

        # pruning uses upper bounds on spectral mass per window, built from
        # coarse block sums; block size divides n/2 so that sorted-order
        # blocks are a permutation of fft-order blocks (no per-step gather)
        bs = 64
        while bs > 1 and (n // 2) % bs != 0:
            bs //= 2
        nb = n // bs
        self._block_size = bs
        self._n_blocks = nb
        self._bperm = (np.arange(nb) - nb // 2) % nb  # sorted block -> fft block
        self._row_b0 = (s0 // bs).astype(np.int64)
        self._row_b1 = ((s0 + wk - 1) // bs + 1).astype(np.int64)

        # boundary monitor: index range of |x| <= 0.9 x_max
        edge = 0.9 * g.x_max
        self._b_lo = int(np.searchsorted(g.x, -edge, side="left"))
        self._b_hi = int(np.searchsorted(g.x, edge, side="right"))
        self._x_grid = g.x
        self._k_fft = g.k_fft
        self._norm_factor = g.dx / n  # Parseval: Σ|ψ|²dx = Σ|F|²·dx/n

        j0, k0 = config.j0_effective, config.k0
        f0 = np.fft.fft(lat.state(j0, k0).amplitudes)
        self._f_initial = f0 / math.sqrt(float(np.vdot(f0, f0).real) * self._norm_factor)
        self._jump_cache: dict[int, np.ndarray] = {}

    # ----- overlap kernel -------------------------------------------------

    def _overlap_block(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        """Overlaps of the state with all detectors on active momentum rows.

        Returns (active row indices, c block of shape (n_act, n_x), Σ|c|²);
        rows not listed have |c| below ~1e-12 and are treated as exact
        zeros.  The active set comes from a rigorous Cauchy-Schwarz bound:
        the spectral mass under a row's window (over-counted to block
        resolution) bounds every overlap on that row.
        """
        return overlap_kernel(
            f,
            self._bperm,
            self._row_b0,
            self._row_b1,
            self._mass_factor,
            PRUNE_MASS,
            self._env_c,
            self._idxk,
            self._b2t,
            self._a2,
            self._block_size,
        )

    def _apply_damping(self, f: np.ndarray, active: np.ndarray, c_block: np.ndarray, half_damp: float) -> None:
        """Subtract (γδt/2)·ũ from the raw-FFT state in place."""
        damping_kernel(
            f,
            active,
            c_block,
            self._a2,
            self._env_u,
            self._b2_conj,
            self._s0,
            self._wk,
            half_damp,
            self.grid.n_points // 2,
        )

    def overlaps_full(self, f: np.ndarray) -> np.ndarray:
        """Flat overlap vector (row-major j, k order) from a raw-FFT state."""
        active, block, _ = self._overlap_block(f)
        lat = self.lattice
        c_kj = np.zeros((lat.n_p, lat.n_x), dtype=np.complex128)
        c_kj[active] = block
        return np.ascontiguousarray(c_kj.T).ravel()

    def _jump_state(self, flat: int) -> np.ndarray:
        f = self._jump_cache.get(flat)
        if f is None:
            j, k = self.lattice.jk_of_flat(flat)
            raw = np.fft.fft(self.lattice.state(j, k).amplitudes)
            raw /= math.sqrt(float(np.vdot(raw, raw).real) * self._norm_factor)
            if len(self._jump_cache) < 2048:
                self._jump_cache[flat] = raw
            f = raw
        return f.copy()

    # ----- trajectory loop --------------------------------------------------

    def run(self, index: int, keep_state: bool = False, truncate_on_leak: bool = True) -> Trajectory:
        """Generate trajectory ``index``; deterministic in (master_seed, index).

        With ``keep_state=True`` the final wavefunction amplitudes are
        attached to the trajectory (used by the ensemble-vs-master-equation
        comparison); clicks and summaries are unaffected.

        A trajectory whose wavepacket diffuses against the grid boundary
        cannot be continued meaningfully.  By default it is flagged and
        truncated at that point (clicks so far are kept, ``truncated_at``
        records the stop time); with ``truncate_on_leak=False`` the
        boundary check raises instead.
        """
        cfg = self.config
        lat = self.lattice
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(cfg.master_seed, spawn_key=(index,)))
        )
        gdt = lat.gamma * cfg.dt
        half_damp = 0.5 * lat.gamma * cfg.dt
        n = self.grid.n_points
        measuring = lat.gamma > 0.0

        f = self._f_initial.copy()
        times: list[float] = []
        js: list[int] = []
        ks: list[int] = []
        flagged = False
        truncated_at: float | None = None

        for step in range(cfg.n_steps):
            if measuring:
                active, c_block, sum_sq = self._overlap_block(f)
                total = gdt * sum_sq
                limit = START_JUMP_PROB if step == 0 else MAX_STEP_JUMP_PROB
                if total >= limit:
                    raise TimestepTooLarge(
                        f"sum of jump probabilities {total:.3g} >= {limit} "
                        f"at step {step}; reduce dt"
                    )
            else:
                active = None
                total = 0.0

            r = rng.random()
            if r < total:
                # jump: select detector by cumulative scan in (j, k) order
                c_kj = np.zeros((lat.n_p, lat.n_x), dtype=np.complex128)
                c_kj[active] = c_block
                probs = gdt * np.abs(np.ascontiguousarray(c_kj.T).ravel()) ** 2
                flat = int(np.searchsorted(np.cumsum(probs), r, side="right"))
                j, k = lat.jk_of_flat(flat)
                times.append((step + 1) * cfg.dt)
                js.append(j)
                ks.append(k)
                f = self._jump_state(flat)
                continue

            # no-jump: damping half-step, then split-operator propagation
            if measuring and len(active):
                self._apply_damping(f, active, c_block, half_damp)
            f *= self._kin_half
            monitor = step % MONITOR_EVERY == 0
            if monitor and not flagged:
                spec = f.real**2 + f.imag**2  # kin factor is a pure phase
                mp = float(np.dot(spec, self._k_fft) / np.sum(spec))
            psi_x = _ifft_raw(f)
            if monitor:
                dens = psi_x.real**2 + psi_x.imag**2
                total_mass = float(np.sum(dens))
                leak = (
                    float(np.sum(dens[: self._b_lo]) + np.sum(dens[self._b_hi :]))
                    / total_mass
                )
                if leak > BOUNDARY_TOL:
                    if truncate_on_leak:
                        flagged = True
                        truncated_at = step * cfg.dt
                        f = sfft.fft(psi_x)  # undo nothing: state is mid-step but normalized below
                        f /= math.sqrt(float(np.vdot(f, f).real) * self._norm_factor)
                        break
                    raise BoundaryLeak(
                        f"boundary mass {leak:.3e} exceeds {BOUNDARY_TOL} at step {step}"
                    )
                if not flagged:
                    mx = float(np.dot(dens, self._x_grid) / total_mass)
                    if abs(mx) > lat.coverage_x or abs(mp) > lat.coverage_p:
                        flagged = True
            psi_x *= self._pot
            f = _fft_raw(psi_x)
            f *= self._kin_half
            f /= math.sqrt(float(np.vdot(f, f).real) * self._norm_factor)

        psi_final = Wavefunction(self.grid, np.fft.ifft(f)).normalized()
        traj = Trajectory(
            config_hash=self.config_hash,
            index=index,
            seed_key=(cfg.master_seed, index),
            times=np.asarray(times, dtype=np.float64),
            js=np.asarray(js, dtype=np.int32),
            ks=np.asarray(ks, dtype=np.int32),
            d_x=cfg.d_x,
            d_p=cfg.d_p,
            flagged=flagged,
            final_x=mean_x(psi_final),
            final_p=mean_p(psi_final),
            final_energy=mean_energy(psi_final),
            truncated_at=truncated_at,
            final_amplitudes=psi_final.amplitudes if keep_state else None,
        )
        return traj

    def step_nojump_state(self, psi: Wavefunction) -> Wavefunction:
        """Apply one forced no-jump step to an explicit state (for tests)."""
        return self.propagate(psi, 1)

    def propagate(self, psi: Wavefunction, n_steps: int) -> Wavefunction:
        """Deterministic no-jump evolution of a state over n_steps steps.

        With gamma = 0 this is the bare split-operator trap propagator;
        with measurement on it is the conditional no-click evolution.
        """
        half_damp = 0.5 * self.lattice.gamma * self.config.dt
        measuring = self.lattice.gamma > 0.0
        f = np.fft.fft(psi.amplitudes)
        f /= math.sqrt(float(np.vdot(f, f).real) * self._norm_factor)
        for step in range(n_steps):
            if measuring:
                active, c_block, _ = self._overlap_block(f)
                if len(active):
                    self._apply_damping(f, active, c_block, half_damp)
            f *= self._kin_half
            psi_x = _ifft_raw(f)
            psi_x *= self._pot
            f = _fft_raw(psi_x)
            f *= self._kin_half
            f /= math.sqrt(float(np.vdot(f, f).real) * self._norm_factor)
        return Wavefunction(self.grid, np.fft.ifft(f)).normalized()


@lru_cache(maxsize=8)
def get_engine(config: SimConfig) -> TrajectoryEngine:
    """Shared engine per config (immutable, reusable across trajectories)."""
    return TrajectoryEngine(config)


def run_trajectory(config: SimConfig, trajectory_index: int) -> Trajectory:
    """Generate one trajectory; a pure function of (config, index)."""
    return get_engine(config).run(trajectory_index)

"""Small-grid density-matrix reference integrator.

Integrates the Markovian master equation

    dρ/dt = i[ρ, H0] - ½ Σ_α (C†_α C_α ρ + ρ C†_α C_α) + Σ_α C_α ρ C†_α

with a classical fixed-step RK4 scheme, using the same grid discretization
and the same stored detector states as the trajectory engine.  Averaging
many stochastic trajectories must reproduce this ρ(t); that agreement is
the strongest end-to-end check of the jump simulation, which is why this
integrator deliberately shares no evolution code with it.

Dense n×n matrices keep everything transparent; n is capped at 128.  Both
trace and Hermiticity are preserved exactly by the exact equation (the RK4
polynomial inherits this), so drifts beyond roundoff indicate a step-size
problem and raise ``StepUnstable``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .detectors import build_lattice
from .errors import ConfigError, StepUnstable
from .grid import Grid

__all__ = [
    "DensityMatrix",
    "gksl_reference_evolution",
    "ensemble_density",
    "trace_distance",
]

MAX_GRID = 128


@dataclass
class DensityMatrix:
    """ρ(x_i, x_j) on a grid; physical trace is Σ diag(ρ)·dx."""

    grid: Grid
    rho: np.ndarray

    def trace(self) -> float:
        return float(np.trace(self.rho).real * self.grid.dx)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def smallest_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.rho).min() * self.grid.dx)

    def validate(self, check_eigs: bool = False) -> None:
        if self.hermiticity_defect() > 1e-10:
            raise StepUnstable(f"hermiticity defect {self.hermiticity_defect():.2e}")
        if abs(self.trace() - 1.0) > 1e-8:
            raise StepUnstable(f"trace {self.trace()!r} deviates from 1")
        if check_eigs and self.smallest_eigenvalue() < -1e-6:
            raise StepUnstable(f"negative eigenvalue {self.smallest_eigenvalue():.2e}")


def _dense_h0(grid: Grid) -> np.ndarray:
    """Dense H0 = x²/2 + p²/2 with the FFT (periodic) kinetic operator.

    Matches the discrete operator the split-step propagator exponentiates.
    """
    n = grid.n_points
    kin_diag = 0.5 * grid.k_fft**2
    kin = np.fft.ifft(np.fft.fft(np.eye(n), axis=0) * kin_diag[:, None], axis=0)
    h = kin + np.diag(0.5 * grid.x**2).astype(np.complex128)
    return 0.5 * (h + h.conj().T)


def gksl_reference_evolution(
    config: SimConfig,
    *,
    rk_dt: float = 1e-3,
    sample_times: list[float] | None = None,
    include_h0: bool = True,
) -> list[tuple[float, DensityMatrix]]:
    """Integrate the master equation up to config.t_final.

    The initial state is the pure projector onto the detector state at
    (j0, k0), identical to the trajectory initial state.  Returns samples
    at the requested times (0 and t_final always included).
    """
    grid = config.grid()
    if grid.n_points > MAX_GRID:
        raise ConfigError(
            f"reference integrator is limited to n <= {MAX_GRID} grid points"
        )
    lat = build_lattice(config, grid)
    n = grid.n_points
    dx = grid.dx

    # detector vectors as columns; S = Σ C†C = γ dx A A†
    a_mat = np.empty((n, lat.n_detectors), dtype=np.complex128)
    for ji, j in enumerate(lat.j_values):
        for ki, k in enumerate(lat.k_values):
            a_mat[:, ji * lat.n_p + ki] = lat.state(int(j), int(k)).amplitudes
    s_op = lat.gamma * dx * (a_mat @ a_mat.conj().T)

    h0 = _dense_h0(grid) if include_h0 else np.zeros((n, n), dtype=np.complex128)
    gamma_dx2 = lat.gamma * dx * dx

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = 1j * (rho @ h0 - h0 @ rho)
        out -= 0.5 * (s_op @ rho + rho @ s_op)
        q = np.einsum("ia,ij,ja->a", a_mat.conj(), rho, a_mat)
        out += gamma_dx2 * ((a_mat * q.real) @ a_mat.conj().T)
        return out

    psi0 = lat.state(config.j0_effective, config.k0).amplitudes
    psi0 = psi0 / math.sqrt(float(np.vdot(psi0, psi0).real) * dx)
    rho = np.outer(psi0, psi0.conj())

    times = sorted(set([0.0, config.t_final] + list(sample_times or [])))
    if times[0] < 0 or times[-1] > config.t_final:
        raise ConfigError("sample times must lie in [0, t_final]")
    samples = [(0.0, DensityMatrix(grid, rho.copy()))]
    t = 0.0
    for t_target in times[1:]:
        span = t_target - t
        n_sub = max(1, int(math.ceil(span / rk_dt)))
        h = span / n_sub
        for _ in range(n_sub):
            k1 = rhs(rho)
            k2 = rhs(rho + 0.5 * h * k1)
            k3 = rhs(rho + 0.5 * h * k2)
            k4 = rhs(rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t_target
        dm = DensityMatrix(grid, rho.copy())
        drift = abs(dm.trace() - 1.0)
        if drift > 1e-6 * max(t, 1.0):
            raise StepUnstable(
                f"trace drift {drift:.2e} at t={t}; reduce rk_dt ({rk_dt})"
            )
        samples.append((t, dm))
    return samples


def ensemble_density(grid: Grid, states: list[np.ndarray]) -> DensityMatrix:
    """Average projector (1/N) Σ |ψ_i⟩⟨ψ_i| of an ensemble of pure states."""
    if not states:
        raise ConfigError("empty ensemble")
    n = grid.n_points
    rho = np.zeros((n, n), dtype=np.complex128)
    for amps in states:
        rho += np.outer(amps, amps.conj())
    rho /= len(states)
    return DensityMatrix(grid, rho)


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    """½ ‖ρ_a - ρ_b‖₁ with the grid quadrature weight."""
    if a.grid != b.grid:
        raise ConfigError("density matrices live on different grids")
    eigs = np.linalg.eigvalsh(a.rho - b.rho)
    return float(0.5 * np.sum(np.abs(eigs)) * a.grid.dx)

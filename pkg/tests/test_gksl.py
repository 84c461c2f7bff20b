"""Master-equation reference integrator and unraveling consistency."""

import math

import numpy as np
import pytest

from phasemc.config import SimConfig
from phasemc.errors import ConfigError
from phasemc.evolution import TrajectoryEngine
from phasemc.gksl import (
    DensityMatrix,
    ensemble_density,
    gksl_reference_evolution,
    trace_distance,
)

SMALL = SimConfig(
    x_min=-8.0,
    x_max=8.0,
    n_points=64,
    d_x=1.0,
    d_p=1.0,
    lattice_radius=2.0,
    j0=1,
    k0=0,
    gamma=1.0,
    t_final=1.0,
    dt=0.005,
)


class TestIntegrator:
    def test_grid_size_cap(self):
        with pytest.raises(ConfigError):
            gksl_reference_evolution(SimConfig(t_final=0.1))  # n = 2048

    def test_trace_and_hermiticity(self):
        samples = gksl_reference_evolution(SMALL, rk_dt=1e-3, sample_times=[0.5])
        for t, dm in samples:
            assert abs(dm.trace() - 1.0) < 1e-8
            assert dm.hermiticity_defect() < 1e-10
        assert samples[0][0] == 0.0 and samples[-1][0] == 1.0

    def test_positivity_spot_check(self):
        samples = gksl_reference_evolution(SMALL, rk_dt=1e-3)
        assert samples[-1][1].smallest_eigenvalue() > -1e-6

    def test_unitary_case_preserves_purity(self):
        cfg = SMALL.replace(gamma=0.0, t_final=0.5)
        samples = gksl_reference_evolution(cfg, rk_dt=5e-4)
        eig0 = np.sort(np.linalg.eigvalsh(samples[0][1].rho))
        eigT = np.sort(np.linalg.eigvalsh(samples[-1][1].rho))
        assert np.max(np.abs(eig0 - eigT)) < 1e-8

    def test_single_detector_fixed_point_without_trap(self):
        # with H0 off and one detector, |α⟩⟨α| is stationary: the jump
        # term exactly cancels the anticommutator
        cfg = SMALL.replace(lattice_radius=0.5, j0=0, k0=0, t_final=0.5)
        samples = gksl_reference_evolution(cfg, rk_dt=1e-3, include_h0=False)
        rho0 = samples[0][1].rho
        rhoT = samples[-1][1].rho
        assert np.max(np.abs(rhoT - rho0)) < 1e-10


class TestUnravelingConsistency:
    def test_moderate_ensemble_tracks_master_equation(self):
        n_traj = 400
        cfg = SMALL.replace(n_traj=n_traj)
        rho_ref = gksl_reference_evolution(cfg, rk_dt=1e-3)[-1][1]
        eng = TrajectoryEngine(cfg)
        states = [eng.run(i, keep_state=True).final_amplitudes for i in range(n_traj)]
        dist = trace_distance(rho_ref, ensemble_density(eng.grid, states))
        # statistical tolerance for 400 trajectories
        assert dist < 0.12

    def test_trace_distance_basics(self):
        g = SMALL.grid()
        eng = TrajectoryEngine(SMALL)
        a = eng.lattice.state(0, 0).amplitudes
        b = eng.lattice.state(1, 0).amplitudes
        rho_a = ensemble_density(g, [a])
        rho_b = ensemble_density(g, [b])
        assert trace_distance(rho_a, rho_a) < 1e-12
        d = trace_distance(rho_a, rho_b)
        # orthogonal-ish states: distance near sqrt(1-|<a|b>|^2)
        ov = abs(np.vdot(a, b) * g.dx) ** 2
        assert d == pytest.approx(math.sqrt(1 - ov), abs=1e-6)
        assert 0.0 < d <= 1.0

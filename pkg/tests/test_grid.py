"""Grid, wavefunction and observable contracts."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phasemc.config import DEFAULT_SIGMA
from phasemc.errors import ConfigError, GridTooNarrow, NotNormalized
from phasemc.grid import (
    Grid,
    PhasePoint,
    Wavefunction,
    boundary_mass,
    coherent_state,
    mean_energy,
    mean_p,
    mean_x,
    to_momentum_space,
    to_position_space,
)

GRID = Grid(-40.0, 40.0, 2048)


def quad_moment(psi: Wavefunction, power: int) -> float:
    """Independent quadrature oracle for ⟨x^power⟩."""
    dens = np.abs(psi.amplitudes) ** 2
    return float(np.sum(dens * psi.grid.x**power) * psi.grid.dx)


class TestGrid:
    def test_spacings(self):
        assert GRID.dx == pytest.approx(80.0 / 2048)
        assert GRID.dk == pytest.approx(2 * math.pi / 80.0)
        assert GRID.k_max == pytest.approx(math.pi / GRID.dx)

    def test_power_of_two_required(self):
        with pytest.raises(ConfigError):
            Grid(-10.0, 10.0, 1000)

    def test_empty_box_rejected(self):
        with pytest.raises(ConfigError):
            Grid(5.0, -5.0, 64)

    def test_momentum_grids_consistent(self):
        assert np.allclose(np.sort(GRID.k_fft), GRID.k_sorted)


class TestCoherentState:
    def test_origin_state(self):
        psi = coherent_state(PhasePoint(0.0, 0.0), DEFAULT_SIGMA, GRID)
        assert psi.norm_squared() == pytest.approx(1.0, abs=1e-10)
        assert np.all(psi.amplitudes.real > -1e-300)
        assert np.max(np.abs(psi.amplitudes.imag)) == 0.0
        assert mean_x(psi) == pytest.approx(0.0, abs=1e-10)
        assert mean_p(psi) == pytest.approx(0.0, abs=1e-10)

    def test_displaced_state(self):
        psi = coherent_state(PhasePoint(19.44, 0.0), DEFAULT_SIGMA, GRID)
        assert mean_x(psi) == pytest.approx(19.44, abs=1e-8)

    def test_momentum_profile_peak(self):
        psi = coherent_state(PhasePoint(0.0, 3.0), DEFAULT_SIGMA, GRID)
        phi = to_momentum_space(psi)
        k_peak = phi.k[np.argmax(np.abs(phi.amplitudes))]
        assert abs(k_peak - 3.0) <= GRID.dk

    def test_energy_formula(self):
        # oracle: Gaussian moments by direct quadrature
        for x0, p0 in [(19.44, 0.0), (3.0, -2.0), (0.0, 0.0)]:
            psi = coherent_state(PhasePoint(x0, p0), DEFAULT_SIGMA, GRID)
            x2 = quad_moment(psi, 2)
            expected = 0.5 * (x0**2 + p0**2) + 0.5
            assert x2 == pytest.approx(x0**2 + 0.5, abs=1e-8)
            assert mean_energy(psi) == pytest.approx(expected, abs=1e-6)

    def test_grid_too_narrow(self):
        with pytest.raises(GridTooNarrow):
            coherent_state(PhasePoint(39.0, 0.0), DEFAULT_SIGMA, GRID)

    @given(
        x0=st.floats(-30.0, 30.0),
        p0=st.floats(-30.0, 30.0),
    )
    @settings(max_examples=25, deadline=None)
    def test_center_recovered(self, x0, p0):
        psi = coherent_state(PhasePoint(x0, p0), DEFAULT_SIGMA, GRID)
        assert mean_x(psi) == pytest.approx(x0, abs=1e-8)
        assert mean_p(psi) == pytest.approx(p0, abs=1e-8)
        assert psi.norm_squared() == pytest.approx(1.0, abs=1e-10)


class TestMomentumSpace:
    def test_unitarity_on_coherent(self):
        psi = coherent_state(PhasePoint(5.0, 2.0), DEFAULT_SIGMA, GRID)
        phi = to_momentum_space(psi)
        assert phi.norm_squared() == pytest.approx(psi.norm_squared(), abs=1e-12)

    def test_round_trip_random_state(self):
        rng = np.random.default_rng(3)
        amps = rng.normal(size=GRID.n_points) + 1j * rng.normal(size=GRID.n_points)
        psi = Wavefunction(GRID, amps).normalized()
        back = to_position_space(to_momentum_space(psi))
        assert np.max(np.abs(back.amplitudes - psi.amplitudes)) < 1e-10

    def test_gaussian_centered_at_zero(self):
        psi = coherent_state(PhasePoint(0.0, 0.0), DEFAULT_SIGMA, GRID)
        phi = to_momentum_space(psi)
        assert abs(phi.k[np.argmax(np.abs(phi.amplitudes))]) < GRID.dk / 2

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=15, deadline=None)
    def test_parseval(self, seed):
        rng = np.random.default_rng(seed)
        amps = rng.normal(size=256) + 1j * rng.normal(size=256)
        g = Grid(-10.0, 10.0, 256)
        psi = Wavefunction(g, amps)
        phi = to_momentum_space(psi)
        assert phi.norm_squared() == pytest.approx(psi.norm_squared(), rel=1e-12)


class TestObservableGuards:
    def test_not_normalized_rejected(self):
        psi = coherent_state(PhasePoint(0.0, 0.0), DEFAULT_SIGMA, GRID)
        bad = Wavefunction(GRID, 2.0 * psi.amplitudes)
        for op in (mean_x, mean_p, mean_energy):
            with pytest.raises(NotNormalized):
                op(bad)

    def test_boundary_mass_of_central_state(self):
        psi = coherent_state(PhasePoint(0.0, 0.0), DEFAULT_SIGMA, GRID)
        assert boundary_mass(psi) < 1e-12

    def test_boundary_mass_of_edge_state(self):
        psi = coherent_state(PhasePoint(37.0, 0.0), 0.25, GRID)
        assert boundary_mass(psi) > 0.5

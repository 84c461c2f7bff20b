"""Quantum-jump Monte Carlo simulation of a monitored trapped particle.

A particle in a harmonic trap is watched by a rectangular phase-space
lattice of Gaussian detectors; each detector click projects the
wavefunction onto that detector's coherent state.  This package generates
single stochastic trajectories of the monitored particle, reproduces the
master-equation dynamics as an ensemble average, and provides the
statistics pipeline (classical mean orbits, diffusive dispersion growth,
click-energy distributions and heating) together with a CLI driver.
"""

__version__ = "0.1.0"

from .bessel import bessel_i0, bessel_i0e
from .config import SimConfig, parse_config_text
from .detectors import (
    DetectorLattice,
    analytic_overlap_sq,
    apply_damping,
    build_lattice,
    husimi_click_distribution,
    initial_dispersion,
    overlaps,
)
from .errors import (
    BoundaryLeak,
    ConfigError,
    CoverageError,
    GridTooCoarse,
    GridTooNarrow,
    InsufficientData,
    NotNormalized,
    PhasemcError,
    StepUnstable,
    TimestepTooLarge,
)
from .evolution import (
    ClickEvent,
    Trajectory,
    TrajectoryEngine,
    apply_jump,
    jump_probabilities,
    no_jump_step,
    run_trajectory,
    sample_event,
)
from .gksl import DensityMatrix, ensemble_density, gksl_reference_evolution, trace_distance
from .grid import (
    Grid,
    MomentumWavefunction,
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
from .stats import (
    DispersionFit,
    EnergyHistogram,
    ThermalFit,
    TimeBinnedSeries,
    analytic_diffusion,
    analytic_diffusion_dimensional,
    bin_clicks,
    energy_histogram,
    energy_pdf_initial,
    fit_dispersion,
    fit_thermal,
    mean_energy_law_check,
)

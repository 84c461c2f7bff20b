"""Ensemble statistics of click trajectories, and their analytic references.

The pipeline mirrors how the measurement record is analyzed: all clicks of
an ensemble are pooled into coarse time bins; per-bin means trace the
classical orbit, per-bin variances grow linearly (Brownian spreading on
top of the oscillation), and the click energies E = (x² + p²)/2 start out
distributed like a displaced Gaussian cloud

    p(E) = exp(-(E + E0)) I0(2 √(E0 E)),

turning into a thermal exponential exp(-E/ε)/ε once the accumulated
diffusion dwarfs the initial energy.  The analytic diffusion coefficient
for lattice spacing d and click rate γ is D = 2π γ / d².

Variances use the population (1/n) estimator: the per-bin ensemble spread
is the quantity of interest, not an inference about a larger population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import chi2 as _chi2_dist

from .bessel import bessel_i0, bessel_i0e
from .errors import ConfigError, InsufficientData

__all__ = [
    "TimeBinnedSeries",
    "DispersionFit",
    "EnergyHistogram",
    "ThermalFit",
    "EnergyLawReport",
    "collect_clicks",
    "bin_clicks",
    "fit_dispersion",
    "analytic_diffusion",
    "analytic_diffusion_dimensional",
    "energy_histogram",
    "energy_pdf_initial",
    "fit_thermal",
    "mean_energy_law_check",
    "bessel_i0",
    "bessel_i0e",
]

TWO_PI = 2.0 * math.pi

#: Bins with fewer ensemble clicks than this are excluded from fits.
MIN_BIN_COUNT = 30

#: Least number of usable bins for a dispersion fit.
MIN_FIT_BINS = 10

#: Least number of clicks for an energy histogram.
MIN_HISTOGRAM_CLICKS = 500


def collect_clicks(trajectories: Iterable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pool (t, x, p) arrays of all clicks of an ensemble."""
    ts, xs, ps = [], [], []
    for tr in trajectories:
        if tr.n_clicks:
            ts.append(np.asarray(tr.times, dtype=float))
            xs.append(np.asarray(tr.x, dtype=float))
            ps.append(np.asarray(tr.p, dtype=float))
    if not ts:
        return (np.empty(0), np.empty(0), np.empty(0))
    return np.concatenate(ts), np.concatenate(xs), np.concatenate(ps)


@dataclass
class TimeBinnedSeries:
    """Per-bin sample moments of the pooled ensemble clicks.

    Empty bins keep count 0 and NaN statistics; they are marked, never
    fabricated.
    """

    bin_width: float
    t_centers: np.ndarray
    counts: np.ndarray
    mean_x: np.ndarray
    mean_p: np.ndarray
    var_x: np.ndarray
    var_p: np.ndarray
    mean_e: np.ndarray
    var_e: np.ndarray

    @property
    def total_clicks(self) -> int:
        return int(self.counts.sum())

    @property
    def n_bins(self) -> int:
        return len(self.t_centers)


def bin_clicks(trajectories: Iterable, bin_width: float, t_total: float | None = None) -> TimeBinnedSeries:
    """Pool all ensemble clicks into time bins of the given width.

    Bins are [b·w, (b+1)·w); a click exactly at the final time lands in
    the last bin.  Per-click energy is E = (x² + p²)/2.
    """
    if bin_width <= 0:
        raise ConfigError(f"bin_width must be positive, got {bin_width}")
    t, x, p = collect_clicks(trajectories)
    if len(t) == 0:
        raise InsufficientData("no clicks to bin")
    horizon = float(t_total) if t_total is not None else float(t.max())
    n_bins = max(1, int(math.ceil(horizon / bin_width - 1e-9)))
    idx = np.minimum((t / bin_width).astype(np.int64), n_bins - 1)
    if idx.min() < 0:
        raise ConfigError("negative click times")

    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    e = 0.5 * (x**2 + p**2)

    def moments(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s1 = np.bincount(idx, weights=values, minlength=n_bins)
        s2 = np.bincount(idx, weights=values**2, minlength=n_bins)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(counts > 0, s1 / counts, np.nan)
            var = np.where(counts > 0, s2 / counts - mean**2, np.nan)
        return mean, np.maximum(var, 0.0, where=counts > 0, out=var)

    mean_x, var_x = moments(x)
    mean_p, var_p = moments(p)
    mean_e, var_e = moments(e)
    centers = (np.arange(n_bins) + 0.5) * bin_width
    return TimeBinnedSeries(
        bin_width=bin_width,
        t_centers=centers,
        counts=counts,
        mean_x=mean_x,
        mean_p=mean_p,
        var_x=var_x,
        var_p=var_p,
        mean_e=mean_e,
        var_e=var_e,
    )


@dataclass
class DispersionFit:
    """Ordinary-least-squares line through the binned dispersion."""

    coord: str
    diffusion: float  # slope D
    intercept: float  # dispersion² extrapolated to t = 0
    t_min: float
    t_max: float
    residual_rms: float
    r_squared: float
    n_bins_used: int


def fit_dispersion(
    series: TimeBinnedSeries,
    t_min: float = TWO_PI,
    coord: str = "x",
    min_count: int = MIN_BIN_COUNT,
) -> DispersionFit:
    """OLS fit of the per-bin variance to D·t + δ0².

    Uses bins at t >= t_min (default: one trap period, skipping the
    initial localization transient) with at least ``min_count`` clicks.
    """
    if coord == "x":
        values = series.var_x
    elif coord == "p":
        values = series.var_p
    else:
        raise ConfigError(f"coord must be 'x' or 'p', got {coord!r}")
    usable = (series.counts >= min_count) & (series.t_centers >= t_min) & np.isfinite(values)
    if int(usable.sum()) < MIN_FIT_BINS:
        raise InsufficientData(
            f"only {int(usable.sum())} usable bins (need {MIN_FIT_BINS})"
        )
    t = series.t_centers[usable]
    y = values[usable]
    slope, intercept = np.polyfit(t, y, 1)
    pred = slope * t + intercept
    resid = y - pred
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DispersionFit(
        coord=coord,
        diffusion=float(slope),
        intercept=float(intercept),
        t_min=float(t.min()),
        t_max=float(t.max()),
        residual_rms=math.sqrt(ss_res / len(t)),
        r_squared=r2,
        n_bins_used=int(len(t)),
    )


def analytic_diffusion(gamma: float, d: float) -> float:
    """Continuum-limit diffusion coefficient 2π γ / d²."""
    if gamma < 0 or d <= 0:
        raise ConfigError("gamma must be >= 0 and d > 0")
    return TWO_PI * gamma / d**2


def analytic_diffusion_dimensional(
    gamma: float, d_x: float, d_p: float, sigma: float, hbar: float = 1.0
) -> float:
    """Position-space diffusion coefficient in physical units: 4π γ ħ σ²/(d_x d_p)."""
    if min(d_x, d_p, sigma, hbar) <= 0 or gamma < 0:
        raise ConfigError("parameters must be positive (gamma >= 0)")
    return 4.0 * math.pi * gamma * hbar * sigma**2 / (d_x * d_p)


@dataclass
class EnergyHistogram:
    """Normalized click-energy histogram over a time window."""

    t_lo: float
    t_hi: float
    edges: np.ndarray
    densities: np.ndarray
    counts: np.ndarray
    n_clicks: int
    mean_energy: float  # sample mean of the raw energies in the window

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


def energy_histogram(
    trajectories: Iterable,
    window: tuple[float, float],
    bins: int | Sequence[float] = 40,
) -> EnergyHistogram:
    """Histogram of click energies with t in [t_lo, t_hi].

    The window must span at least one trap period so the histogram is
    phase-averaged rather than a snapshot of one orbit segment.
    """
    t_lo, t_hi = float(window[0]), float(window[1])
    if t_hi - t_lo < TWO_PI - 1e-9:
        raise ConfigError(
            f"window length {t_hi - t_lo:.3f} shorter than one period {TWO_PI:.3f}"
        )
    t, x, p = collect_clicks(trajectories)
    sel = (t >= t_lo) & (t <= t_hi)
    e = 0.5 * (x[sel] ** 2 + p[sel] ** 2)
    if len(e) < MIN_HISTOGRAM_CLICKS:
        raise InsufficientData(
            f"{len(e)} clicks in window [{t_lo}, {t_hi}], need {MIN_HISTOGRAM_CLICKS}"
        )
    counts, edges = np.histogram(e, bins=bins)
    widths = np.diff(edges)
    densities = counts / (counts.sum() * widths)
    return EnergyHistogram(
        t_lo=t_lo,
        t_hi=t_hi,
        edges=edges,
        densities=densities,
        counts=counts.astype(np.int64),
        n_clicks=int(len(e)),
        mean_energy=float(e.mean()),
    )


def energy_pdf_initial(e, e0: float):
    """Energy density of a just-localized particle: exp(-(E+E0)) I0(2√(E0 E)).

    Evaluated in scaled form exp(-(√E - √E0)²)·[e^(-z) I0(z)], which stays
    finite for arbitrarily large E0·E.  Accepts scalars or arrays.
    """
    if e0 < 0:
        raise ConfigError(f"e0 must be nonnegative, got {e0}")
    e_arr = np.asarray(e, dtype=float)
    if np.any(e_arr < 0):
        raise ConfigError("energies must be nonnegative")
    flat = e_arr.ravel()
    out = np.empty_like(flat)
    sq0 = math.sqrt(e0)
    for i, ei in enumerate(flat):
        z = 2.0 * sq0 * math.sqrt(ei)
        out[i] = math.exp(-((math.sqrt(ei) - sq0) ** 2)) * bessel_i0e(z)
    result = out.reshape(e_arr.shape)
    return float(result) if np.isscalar(e) or e_arr.shape == () else result


@dataclass
class ThermalFit:
    """Maximum-likelihood exponential fit with a chi-square goodness check."""

    epsilon: float
    chi_squared: float
    dof: int
    p_value: float
    n_clicks: int


def fit_thermal(hist: EnergyHistogram) -> ThermalFit:
    """Fit exp(-E/ε)/ε to a late-time histogram; ε is the sample mean.

    The goodness-of-fit statistic is Pearson's chi-square over the
    histogram bins (merged from the right until every expected count is
    at least 5), with dof = bins - 2 for the estimated mean and the
    normalization.
    """
    eps = hist.mean_energy
    if eps <= 0:
        raise InsufficientData("nonpositive mean energy")
    n = hist.n_clicks
    cdf = 1.0 - np.exp(-hist.edges / eps)
    probs = np.diff(cdf)
    # account for mass beyond the last edge in the final bin
    probs[-1] += 1.0 - cdf[-1]
    expected = n * probs
    observed = hist.counts.astype(float)
    # merge sparse right-tail bins so the chi-square sampling theory holds
    while len(expected) > 3 and expected[-1] < 5.0:
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected = expected[:-1]
        observed = observed[:-1]
    keep = expected >= 5.0
    expected = expected[keep]
    observed = observed[keep]
    if len(expected) < 4:
        raise InsufficientData("too few populated bins for a goodness-of-fit test")
    # renormalize to the retained mass so the statistic is self-consistent
    observed_total = observed.sum()
    expected *= observed_total / expected.sum()
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    dof = len(expected) - 2
    p = float(_chi2_dist.sf(chi2, dof))
    return ThermalFit(epsilon=float(eps), chi_squared=chi2, dof=dof, p_value=p, n_clicks=n)


@dataclass
class EnergyLawReport:
    """Check of ⟨E(t)⟩ against D·t + (δ0² + E0) over the fit window."""

    status: str  # "ok" or "no data"
    max_rel_deviation: float
    n_bins: int


def mean_energy_law_check(
    series: TimeBinnedSeries | None,
    fit: DispersionFit | None,
    e0: float,
    min_count: int = MIN_BIN_COUNT,
) -> EnergyLawReport:
    """Compare binned mean energies with the linear growth law.

    Returns a "no data" report (not an error) when there are no clicks,
    e.g. for a run with measurement switched off.
    """
    if series is None or fit is None or series.total_clicks == 0:
        return EnergyLawReport(status="no data", max_rel_deviation=math.nan, n_bins=0)
    usable = (
        (series.counts >= min_count)
        & (series.t_centers >= fit.t_min)
        & (series.t_centers <= fit.t_max)
        & np.isfinite(series.mean_e)
    )
    if not np.any(usable):
        return EnergyLawReport(status="no data", max_rel_deviation=math.nan, n_bins=0)
    t = series.t_centers[usable]
    predicted = fit.diffusion * t + fit.intercept + e0
    measured = series.mean_e[usable]
    rel = np.abs(measured - predicted) / np.abs(predicted)
    return EnergyLawReport(
        status="ok",
        max_rel_deviation=float(rel.max()),
        n_bins=int(usable.sum()),
    )

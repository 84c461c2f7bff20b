"""Statistics pipeline: binning, fits, energy distributions, scaling laws."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from phasemc.errors import ConfigError, InsufficientData
from phasemc.stats import (
    EnergyHistogram,
    analytic_diffusion,
    analytic_diffusion_dimensional,
    bin_clicks,
    energy_histogram,
    energy_pdf_initial,
    fit_dispersion,
    fit_thermal,
    mean_energy_law_check,
)

TWO_PI = 2.0 * math.pi


class FakeTrajectory:
    """Minimal click record for statistics-level tests."""

    def __init__(self, times, xs, ps):
        self.times = np.asarray(times, dtype=float)
        self._x = np.asarray(xs, dtype=float)
        self._p = np.asarray(ps, dtype=float)

    @property
    def n_clicks(self):
        return len(self.times)

    @property
    def x(self):
        return self._x

    @property
    def p(self):
        return self._p


def synthetic_linear_series(d_coeff=3.0, intercept=2.0, t_max=60.0, per_bin=200, width=0.1, seed=0):
    """Clicks drawn so that per-bin variance is exactly on a line.

    Each bin gets a symmetric two-point cloud x = ±σ(t) around zero:
    population variance σ²(t) = D t + δ0² with zero sampling noise.
    """
    rng = np.random.default_rng(seed)
    times, xs = [], []
    n_bins = int(t_max / width)
    for b in range(n_bins):
        tc = (b + 0.5) * width
        s = math.sqrt(d_coeff * tc + intercept)
        for i in range(per_bin // 2):
            times.extend([tc, tc])
            xs.extend([s, -s])
    return FakeTrajectory(times, xs, np.zeros(len(xs)))


class TestBinClicks:
    def test_single_click(self):
        tr = FakeTrajectory([0.05], [2.0], [0.0])
        series = bin_clicks([tr], 0.1)
        assert series.counts[0] == 1
        assert series.mean_x[0] == 2.0
        assert series.var_x[0] == 0.0
        assert series.mean_e[0] == 2.0

    def test_two_clicks_population_variance(self):
        tr = FakeTrajectory([0.01, 0.09], [1.0, 3.0], [0.0, 0.0])
        series = bin_clicks([tr], 0.1)
        assert series.mean_x[0] == pytest.approx(2.0)
        assert series.var_x[0] == pytest.approx(1.0)  # denominator n

    def test_empty_bins_marked(self):
        tr = FakeTrajectory([0.05, 1.55], [1.0, 2.0], [0.0, 0.0])
        series = bin_clicks([tr], 0.1, t_total=2.0)
        assert series.counts[5] == 0
        assert math.isnan(series.mean_x[5])
        assert series.total_clicks == 2

    def test_no_clicks_raises(self):
        with pytest.raises(InsufficientData):
            bin_clicks([FakeTrajectory([], [], [])], 0.1)

    def test_final_time_lands_in_last_bin(self):
        tr = FakeTrajectory([2.0], [1.0], [0.0])
        series = bin_clicks([tr], 0.1, t_total=2.0)
        assert series.counts[-1] == 1

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=15, deadline=None)
    def test_reordering_invariance(self, seed):
        rng = np.random.default_rng(seed)
        n = 50
        t = rng.uniform(0, 5, n)
        x = rng.normal(size=n)
        p = rng.normal(size=n)
        one = [FakeTrajectory(t, x, p)]
        perm = rng.permutation(n)
        split = [
            FakeTrajectory(t[perm][:20], x[perm][:20], p[perm][:20]),
            FakeTrajectory(t[perm][20:], x[perm][20:], p[perm][20:]),
        ]
        a = bin_clicks(one, 0.25, t_total=5.0)
        b = bin_clicks(split, 0.25, t_total=5.0)
        assert np.array_equal(a.counts, b.counts)
        assert np.allclose(a.mean_x, b.mean_x, equal_nan=True)
        assert np.allclose(a.var_x, b.var_x, equal_nan=True, atol=1e-12)


class TestDispersionFit:
    def test_exact_line_recovered(self):
        series = bin_clicks([synthetic_linear_series()], 0.1, t_total=60.0)
        fit = fit_dispersion(series, t_min=TWO_PI)
        assert fit.diffusion == pytest.approx(3.0, abs=1e-9)
        assert fit.intercept == pytest.approx(2.0, abs=1e-8)
        assert fit.r_squared > 0.999999
        assert fit.residual_rms < 1e-9

    def test_insufficient_bins(self):
        tr = FakeTrajectory([0.05] * 40, [1.0] * 40, [0.0] * 40)
        series = bin_clicks([tr], 0.1)
        with pytest.raises(InsufficientData):
            fit_dispersion(series, t_min=0.0)

    def test_sparse_bins_excluded(self):
        # a wild bin with fewer than 30 clicks must not enter the fit
        full = synthetic_linear_series(per_bin=200)
        sparse = FakeTrajectory([60.55] * 5, [500.0] * 5, [0.0] * 5)  # outlier bin, n=5
        series = bin_clicks([full, sparse], 0.1, t_total=61.0)
        fit = fit_dispersion(series, t_min=TWO_PI)
        assert fit.diffusion == pytest.approx(3.0, abs=1e-6)

    def test_bad_coord(self):
        series = bin_clicks([synthetic_linear_series()], 0.1)
        with pytest.raises(ConfigError):
            fit_dispersion(series, coord="y")


class TestAnalyticDiffusion:
    def test_reference_value(self):
        assert analytic_diffusion(1.0, 2.16) == pytest.approx(1.3467, abs=2e-4)

    def test_linear_in_gamma(self):
        assert analytic_diffusion(2.0, 2.16) == pytest.approx(
            2.0 * analytic_diffusion(1.0, 2.16), rel=1e-15
        )

    def test_lattice_sum_oracle_d_half(self):
        # direct summation of the displacement second moment at rate gamma
        d = 0.5
        j = np.arange(-200, 201)
        jj, kk = np.meshgrid(j, j, indexing="ij")
        lattice_sum = float(np.sum(np.exp(-(d**2) * (jj**2 + kk**2) / 2.0) * (d * jj) ** 2))
        assert lattice_sum == pytest.approx(analytic_diffusion(1.0, d), rel=0.01)

    def test_lattice_sum_converges_as_d_shrinks(self):
        j = np.arange(-400, 401)
        errs = []
        for d in (1.0, 0.5, 0.25):
            jj, kk = np.meshgrid(j, j, indexing="ij")
            s = float(np.sum(np.exp(-(d**2) * (jj**2 + kk**2) / 2.0) * (d * jj) ** 2))
            errs.append(abs(s - analytic_diffusion(1.0, d)) / analytic_diffusion(1.0, d))
        assert errs[2] < errs[0] and errs[2] < 1e-3

    def test_dimensional_form(self):
        # reduces to the dimensionless law at hbar=1, sigma²=1/2, equal spacings
        assert analytic_diffusion_dimensional(1.0, 2.16, 2.16, math.sqrt(0.5)) == pytest.approx(
            analytic_diffusion(1.0, 2.16), rel=1e-15
        )
        base = analytic_diffusion_dimensional(1.0, 2.0, 3.0, 0.8, hbar=1.0)
        assert analytic_diffusion_dimensional(1.0, 2.0, 3.0, 0.8, hbar=2.0) == pytest.approx(
            2.0 * base, rel=1e-15
        )


class TestEnergyPdf:
    def test_zero_displacement_is_exponential(self):
        es = np.linspace(0.0, 10.0, 50)
        assert np.allclose(energy_pdf_initial(es, 0.0), np.exp(-es), rtol=1e-12)

    @pytest.mark.parametrize("e0", [0.0, 1.0, 50.0, 189.0])
    def test_normalization(self, e0):
        hi = e0 + 40.0 * math.sqrt(2 * e0 + 1) + 40.0
        val, err = quad(lambda e: energy_pdf_initial(e, e0), 0.0, hi, limit=400)
        assert val == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("e0", [0.0, 1.0, 50.0, 189.0])
    def test_mean(self, e0):
        hi = e0 + 40.0 * math.sqrt(2 * e0 + 1) + 40.0
        val, err = quad(lambda e: e * energy_pdf_initial(e, e0), 0.0, hi, limit=400)
        assert val == pytest.approx(e0 + 1.0, abs=1e-6 * max(1.0, e0))

    def test_rejects_negative(self):
        with pytest.raises(ConfigError):
            energy_pdf_initial(-1.0, 2.0)
        with pytest.raises(ConfigError):
            energy_pdf_initial(1.0, -2.0)


class TestEnergyHistogram:
    def test_single_energy_bin(self):
        n = 600
        tr = FakeTrajectory(np.linspace(0.01, TWO_PI, n), np.full(n, 2.0), np.zeros(n))
        hist = energy_histogram([tr], (0.0, TWO_PI), bins=np.array([1.5, 2.5, 3.5]))
        assert hist.counts[0] == n
        mass = float(np.sum(hist.densities * np.diff(hist.edges)))
        assert mass == pytest.approx(1.0, abs=1e-9)

    def test_window_must_cover_a_period(self):
        tr = FakeTrajectory([0.1], [1.0], [0.0])
        with pytest.raises(ConfigError):
            energy_histogram([tr], (0.0, 1.0))

    def test_insufficient_clicks(self):
        tr = FakeTrajectory([0.1] * 10, [1.0] * 10, [0.0] * 10)
        with pytest.raises(InsufficientData):
            energy_histogram([tr], (0.0, TWO_PI))


class TestThermalFit:
    def _hist_from_samples(self, e, t_hi=TWO_PI):
        counts, edges = np.histogram(e, bins=50)
        widths = np.diff(edges)
        return EnergyHistogram(
            t_lo=0.0,
            t_hi=t_hi,
            edges=edges,
            densities=counts / (counts.sum() * widths),
            counts=counts.astype(np.int64),
            n_clicks=len(e),
            mean_energy=float(np.mean(e)),
        )

    def test_recovers_exponential_scale(self):
        rng = np.random.default_rng(42)
        n = 4000
        e = rng.exponential(scale=5.0, size=n)
        fit = fit_thermal(self._hist_from_samples(e))
        # MLE of the exponential scale is the sample mean; 3 sigma band
        assert abs(fit.epsilon - 5.0) < 3.0 * 5.0 / math.sqrt(n)
        assert fit.p_value > 0.01

    def test_rejects_wrong_family(self):
        rng = np.random.default_rng(1)
        e = rng.normal(10.0, 1.0, size=4000)
        e = e[e > 0]
        fit = fit_thermal(self._hist_from_samples(e))
        assert fit.p_value < 1e-6


class TestEnergyLaw:
    def test_noiseless_spiral(self):
        # four symmetric clicks per bin at radius a, a² = 2(D t + δ0²):
        # then var_x = var_p = mean_E = D t + δ0² exactly (here E0 = 0)
        d_coeff, delta0 = 3.0, 2.0
        times, xs, ps = [], [], []
        width = 0.1
        for b in range(600):
            tc = (b + 0.5) * width
            a = math.sqrt(2.0 * (d_coeff * tc + delta0))
            for _ in range(10):
                times.extend([tc] * 4)
                xs.extend([a, -a, 0.0, 0.0])
                ps.extend([0.0, 0.0, a, -a])
        tr = FakeTrajectory(times, xs, ps)
        series = bin_clicks([tr], width, t_total=60.0)
        fit = fit_dispersion(series, t_min=TWO_PI, coord="x")
        assert fit.diffusion == pytest.approx(d_coeff, abs=1e-9)
        report = mean_energy_law_check(series, fit, e0=0.0)
        assert report.status == "ok"
        assert report.max_rel_deviation < 1e-9

    def test_no_data_report(self):
        report = mean_energy_law_check(None, None, e0=0.0)
        assert report.status == "no data"
        assert math.isnan(report.max_rel_deviation)

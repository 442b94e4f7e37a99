import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinksim.analysis import (
    calibrate_temperature,
    directionality,
    exponential_ks_pvalue,
    fit_kramers,
    fit_lifetime,
    fit_lorentzian,
    kramers_lifetime,
    survival_curve,
)
from kinksim.errors import (
    EmptyEnsembleError,
    PoorFitError,
    TooFewEscapesError,
    TooFewPointsError,
)


class TestSurvivalCurve:
    def test_no_escapes_identity(self):
        curve = survival_curve([10.0] * 8, [False] * 8, np.linspace(0, 10, 5))
        np.testing.assert_array_equal(curve.survival, 1.0)

    def test_empty_raises(self):
        with pytest.raises(EmptyEnsembleError):
            survival_curve([], [], [0.0])

    def test_reduces_to_empirical_cdf_without_censoring(self, rng):
        t = rng.exponential(5.0, 400)
        grid = np.linspace(0, 20, 50)
        curve = survival_curve(t, np.ones(400, bool), grid)
        empirical = [(t > g).mean() for g in grid]
        np.testing.assert_allclose(curve.survival, empirical, atol=1e-12)

    def test_matches_exponential_within_bands(self, rng):
        tau = 50.0
        n = 500
        window = 120.0
        t = rng.exponential(tau, n)
        esc = t < window
        durations = np.where(esc, t, window)
        grid = np.linspace(1.0, 100.0, 25)
        curve = survival_curve(durations, esc, grid)
        expected = np.exp(-grid / tau)
        inside = np.abs(curve.survival - expected) < 3 * np.maximum(curve.error, 1e-3)
        assert inside.mean() > 0.9

    def test_censoring_keeps_curve_above_uncensored(self, rng):
        t = rng.exponential(5.0, 300)
        censored_at = 4.0
        esc = t < censored_at
        durations = np.where(esc, t, censored_at)
        grid = np.linspace(0, 3.9, 10)
        km = survival_curve(durations, esc, grid)
        full = survival_curve(t, np.ones_like(esc), grid)
        np.testing.assert_allclose(km.survival, full.survival, atol=0.05)


class TestLifetimeFit:
    def test_degenerate_point_mass(self):
        fit = fit_lifetime([3.0] * 10, [True] * 10)
        assert fit.tau == pytest.approx(3.0)
        assert fit.ci68[0] < 3.0 < fit.ci68[1]

    def test_synthetic_censored_recovery(self, rng):
        tau = 100.0
        window = 150.0
        t = rng.exponential(tau, 200)
        esc = t < window
        durations = np.where(esc, t, window)
        fit = fit_lifetime(durations, esc)
        assert fit.tau == pytest.approx(tau, rel=0.15)
        assert fit.n_censored == int((~esc).sum())

    def test_too_few_escapes(self):
        with pytest.raises(TooFewEscapesError):
            fit_lifetime([1.0, 2.0, 10.0, 10.0], [True, True, False, False])

    @settings(max_examples=20, deadline=None)
    @given(scale=st.floats(0.01, 100.0))
    def test_time_unit_invariance(self, scale):
        base = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 9.0, 9.0])
        esc = np.array([1, 1, 1, 1, 1, 0, 0], dtype=bool)
        f1 = fit_lifetime(base, esc)
        f2 = fit_lifetime(base * scale, esc)
        assert f2.tau == pytest.approx(f1.tau * scale, rel=1e-9)
        assert f2.ci68[0] == pytest.approx(f1.ci68[0] * scale, rel=1e-6)

    def test_background_subtraction(self):
        fit = fit_lifetime([10.0] * 20, [True] * 20, background_rate=0.05)
        # raw rate 0.1 -> signal rate 0.05 -> tau 20
        assert fit.tau == pytest.approx(20.0)

    def test_ks_pvalue_accepts_exponential(self, rng):
        tau, window = 20.0, 60.0
        t = rng.exponential(tau, 400)
        t = t[t < window]
        fit_tau = t.sum() / len(t) + (400 - len(t)) * window / len(t)
        p = exponential_ks_pvalue(t, window, fit_tau)
        assert p > 0.05

    def test_ks_pvalue_rejects_uniform(self, rng):
        t = rng.uniform(0, 60.0, 400)
        p = exponential_ks_pvalue(t, 60.0, np.mean(t))
        assert p < 0.05


class TestLorentzian:
    def test_noiseless_exact_recovery(self):
        f = np.linspace(300e3, 360e3, 40)
        c0, g0, a0, off = 331e3, 4e3, 0.62, 0.08
        p = off + a0 * g0**2 / ((f - c0) ** 2 + g0**2)
        fit = fit_lorentzian(f, p, None, n_peaks=1)
        peak = fit.peaks[0]
        assert peak.center == pytest.approx(c0, rel=1e-6)
        assert peak.width == pytest.approx(g0, rel=1e-4)
        assert peak.amplitude == pytest.approx(a0, rel=1e-4)
        assert fit.offset == pytest.approx(off, rel=1e-3)

    def test_two_peak_recovery(self):
        f = np.linspace(295e3, 360e3, 48)
        p = (0.05
             + 0.6 * 4e3**2 / ((f - 331e3) ** 2 + 4e3**2)
             + 0.25 * 5e3**2 / ((f - 312e3) ** 2 + 5e3**2))
        fit = fit_lorentzian(f, p, None, n_peaks=2)
        centers = sorted(pk.center for pk in fit.peaks)
        assert centers[0] == pytest.approx(312e3, abs=300.0)
        assert centers[1] == pytest.approx(331e3, abs=300.0)
        assert fit.peaks[0].amplitude > fit.peaks[1].amplitude

    def test_too_few_points(self):
        with pytest.raises(TooFewPointsError):
            fit_lorentzian(np.arange(5.0), np.ones(5))

    def test_error_coverage_calibration(self, rng):
        # with binomial noise at n=100/point the reported center error covers
        # the truth at roughly the 68% rate
        f = np.linspace(310e3, 350e3, 30)
        c0, g0, a0, off = 330e3, 4e3, 0.55, 0.05
        p_true = off + a0 * g0**2 / ((f - c0) ** 2 + g0**2)
        n = 100
        hits = 0
        reps = 60
        for _ in range(reps):
            k = rng.binomial(n, p_true)
            p = k / n
            err = np.sqrt(np.maximum(p * (1 - p), 0.25 / n) / n)
            fit = fit_lorentzian(f, p, err, n_peaks=1)
            peak = fit.peaks[0]
            if abs(peak.center - c0) < peak.center_err:
                hits += 1
        assert 0.45 <= hits / reps <= 0.9


class TestTemperatureCalibration:
    def test_equilibrium_anchor(self, units):
        n = 34
        ek0 = 1.5 * n * units.kb_td
        eps = [0.0, 1e-3, 2e-3]
        eks = [ek0, ek0 * 2, ek0 * 3]
        tmap = calibrate_temperature(eps, eks, n, units.energy_unit)
        t0, extr = tmap.temperature(0.0)
        assert t0 == pytest.approx(1e-3, rel=1e-9)
        assert not extr

    def test_extrapolation_flagged(self, units):
        n = 34
        ek0 = 1.5 * n * units.kb_td
        tmap = calibrate_temperature(
            [0.0, 1e-3, 2e-3], [ek0, 2 * ek0, 3 * ek0], n, units.energy_unit
        )
        _, extr = tmap.temperature(3.5e-3)
        assert extr

    def test_requires_anchor_and_points(self, units):
        with pytest.raises(TooFewPointsError):
            calibrate_temperature([1e-3, 2e-3], [1.0, 2.0], 34, units.energy_unit)
        with pytest.raises(TooFewPointsError):
            calibrate_temperature([1e-3, 2e-3, 3e-3], [1.0, 2.0, 3.0], 34,
                                  units.energy_unit)

    def test_poor_fit_rejected(self, units):
        with pytest.raises(PoorFitError):
            calibrate_temperature(
                [0.0, 1e-3, 2e-3, 3e-3], [1.0, 5.0, 1.2, 4.8], 34, units.energy_unit
            )


class TestKramers:
    def test_machine_precision_on_exact_data(self):
        w = 26.5
        t_td = np.array([2.0, 2.5, 3.2, 4.1])
        tau = kramers_lifetime(w, t_td, prefactor=0.31)
        fit = fit_kramers(tau, t_td)
        assert fit.w_kbtd == pytest.approx(w, rel=1e-12)
        assert fit.prefactor == pytest.approx(0.31, rel=1e-10)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_sampled_data_within_3_percent(self, rng):
        w = 26.5
        t_td = np.array([2.0, 2.4, 2.9, 3.6])
        taus = []
        for t in t_td:
            tau_true = kramers_lifetime(w, t, prefactor=0.2)
            taus.append(rng.exponential(tau_true, 500).mean())
        fit = fit_kramers(taus, t_td)
        assert fit.w_kbtd == pytest.approx(w, rel=0.03)

    def test_too_few_points(self):
        with pytest.raises(TooFewPointsError):
            fit_kramers([1.0, 2.0], [1.0, 1.1])
        with pytest.raises(TooFewPointsError):
            fit_kramers([1.0, 2.0, 3.0], [1.0, 1.0, 1.0])

    def test_negative_barrier_flagged(self):
        t_td = np.array([1.0, 2.0, 3.0])
        tau = np.sqrt(t_td) * np.exp(-5.0 / t_td)
        fit = fit_kramers(tau, t_td)
        assert fit.negative_barrier


class TestDirectionality:
    def test_balanced_zero(self):
        res = directionality(25, 25)
        assert res.td == 0.0
        assert res.error == pytest.approx(2 * np.sqrt(0.25 / 50))

    def test_all_right(self):
        res = directionality(30, 0)
        assert res.td == 1.0
        assert res.error > 0

    def test_too_few(self):
        with pytest.raises(TooFewEscapesError):
            directionality(4, 3)

    @settings(max_examples=30, deadline=None)
    @given(n_r=st.integers(0, 200), n_l=st.integers(0, 200))
    def test_bounds_and_symmetry(self, n_r, n_l):
        if n_r + n_l < 10:
            return
        a = directionality(n_r, n_l)
        b = directionality(n_l, n_r)
        assert -1.0 <= a.td <= 1.0
        assert a.td == pytest.approx(-b.td)
        assert a.error == pytest.approx(b.error)

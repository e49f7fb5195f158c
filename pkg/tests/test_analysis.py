"""Estimators: histograms, CAR, fits, correlations, budgets, CHSH, MC errors."""

import math

import numpy as np
import pytest

from ringpair import (CoincidenceHistogram, DetectorModel, SourceModel, TimeTagStream,
                      brute_force_histogram, car, chsh_from_visibility,
                      coincidence_histogram, collection_efficiency,
                      effective_mode_number, fit_power_quadratic, fit_visibility,
                      heralded_g2, infer_emission_probability, loss_budget,
                      monte_carlo_uncertainty, simulate_hbt, unheralded_g2)
from ringpair.errors import (DomainError, FitDegenerate, InconsistentBudget,
                             InsufficientData, ModeNumberUndefined,
                             NoTrueCoincidences, UnstableEstimate)

IDEAL = DetectorModel.ideal()


def poisson_stream(rates: dict[int, float], duration: float, seed: int) -> TimeTagStream:
    rng = np.random.default_rng(seed)
    dur_ps = int(round(duration * 1e12))
    chans = {}
    for ch, rate in rates.items():
        n = rng.poisson(rate * duration)
        chans[ch] = np.sort(rng.integers(0, dur_ps + 1, size=n, dtype=np.int64))
    return TimeTagStream.from_channel_arrays(chans, duration=duration, seed=seed)


class TestHistogram:
    def test_identical_channels_pile_at_zero(self):
        ts = np.arange(0, 10_000_000, 1000, dtype=np.int64)
        st = TimeTagStream.from_channel_arrays({0: ts, 1: ts}, duration=1e-5)
        # span below the 1000 ps period: only the zero-delay bin can fill
        hist = coincidence_histogram(st, 0, 1, bin_width=100e-12, span=1.5e-9)
        center = hist.counts.size // 2
        assert hist.counts[center] == ts.size
        assert hist.counts.sum() == ts.size

    def test_independent_poisson_flat(self):
        r_a, r_b, t = 5e4, 8e4, 5.0
        st = poisson_stream({0: r_a, 1: r_b}, t, seed=5)
        hist = coincidence_histogram(st, 0, 1, bin_width=2e-9, span=100e-9)
        expected = r_a * r_b * hist.bin_width * t
        sigma = math.sqrt(expected)
        assert np.all(np.abs(hist.counts - expected) <= 4.0 * sigma)

    def test_empty_channel_gives_zero_histogram(self):
        st = poisson_stream({0: 1e4}, 0.1, seed=6)
        hist = coincidence_histogram(st, 0, 1, bin_width=1e-9, span=20e-9)
        assert hist.counts.sum() == 0
        assert hist.total_b_counts == 0

    def test_merge_equals_brute_force(self):
        rng = np.random.default_rng(77)
        for trial in range(5):
            st = poisson_stream({0: 4e4, 1: 3e4}, 0.2, seed=100 + trial)
            bw = float(rng.choice([0.1e-9, 0.25e-9, 1e-9]))
            span = float(rng.choice([20e-9, 55e-9]))
            fast = coincidence_histogram(st, 0, 1, bw, span)
            slow = brute_force_histogram(st, 0, 1, bw, span)
            np.testing.assert_array_equal(fast.counts, slow.counts)

    def test_merge_equals_brute_force_with_duplicates(self):
        ts0 = np.repeat(np.arange(0, 100_000, 2366, dtype=np.int64), 3)
        ts1 = ts0 + 17
        st = TimeTagStream.from_channel_arrays({0: ts0, 1: ts1}, duration=1e-7)
        fast = coincidence_histogram(st, 0, 1, 100e-12, 8e-9)
        slow = brute_force_histogram(st, 0, 1, 100e-12, 8e-9)
        np.testing.assert_array_equal(fast.counts, slow.counts)
        assert fast.counts.sum() >= 9 * ts0.size // 3


def synthetic_histogram(peak=10000, floor=50.0, n_half=100, bin_width=1e-9,
                        duration=1.0):
    counts = np.full(2 * n_half + 1, floor, dtype=np.int64)
    counts[n_half] += peak
    delays = np.arange(-n_half, n_half + 1) * bin_width
    return CoincidenceHistogram(bin_width=bin_width, delays=delays, counts=counts,
                                total_a_counts=int(counts.sum()),
                                total_b_counts=int(counts.sum()), duration=duration)


class TestCar:
    def test_flat_plus_peak_algebra(self):
        hist = synthetic_histogram(peak=10000, floor=50)
        r = car(hist, window=1e-9)
        assert r.car == pytest.approx((10000 + 50) / 50.0, rel=1e-12)
        assert r.accidental_cc == pytest.approx(50.0, rel=1e-12)

    def test_window_doubling_halves_car(self):
        hist = synthetic_histogram(peak=10000, floor=50)
        car1 = car(hist, window=1e-9).car
        car3 = car(hist, window=3e-9).car
        assert car3 == pytest.approx(car1 / 3.0, rel=0.05)

    def test_zero_accidentals_lower_bound(self):
        hist = synthetic_histogram(peak=500, floor=0)
        r = car(hist, window=1e-9)
        assert r.is_lower_bound
        assert r.car == 500.0

    def test_span_too_small(self):
        hist = synthetic_histogram(n_half=3)
        with pytest.raises(DomainError):
            car(hist, window=1e-9)


class TestPowerFit:
    def test_exact_recovery(self):
        p = np.array([0.2, 0.5, 1.0, 2.0, 4.0])
        pts = np.column_stack([p, 5000 * p**2 + 200 * p])
        fit = fit_power_quadratic(pts)
        assert fit.a == pytest.approx(5000, rel=1e-9)
        assert fit.b == pytest.approx(200, rel=1e-9)
        assert fit.residual_norm < 1e-6

    def test_pure_noise_channel(self):
        rng = np.random.default_rng(8)
        p = np.array([0.2, 0.5, 1.0, 2.0, 4.0])
        t = 10.0
        rates = rng.poisson(3e4 * p * t) / t
        fit = fit_power_quadratic(np.column_stack([p, rates]))
        assert abs(fit.a) <= 2.0 * math.sqrt(fit.covariance[0, 0])

    def test_poissonian_recovery_within_3_sigma(self):
        rng = np.random.default_rng(9)
        a_true, b_true, t = 5e4, 2e4, 5.0
        p = np.linspace(0.25, 3.0, 12)
        rates = rng.poisson((a_true * p**2 + b_true * p) * t) / t
        fit = fit_power_quadratic(np.column_stack([p, rates]))
        assert abs(fit.a - a_true) <= 3.0 * math.sqrt(fit.covariance[0, 0])
        assert abs(fit.b - b_true) <= 3.0 * math.sqrt(fit.covariance[1, 1])

    def test_unbiased_over_repetitions(self):
        rng = np.random.default_rng(10)
        a_true, b_true, t = 5e4, 2e4, 5.0
        p = np.array([0.25, 0.5, 1.0, 1.5, 2.0, 3.0])
        estimates = []
        sig = None
        for _ in range(100):
            rates = rng.poisson((a_true * p**2 + b_true * p) * t) / t
            fit = fit_power_quadratic(np.column_stack([p, rates]))
            estimates.append(fit.a)
            sig = math.sqrt(fit.covariance[0, 0])
        assert abs(np.mean(estimates) - a_true) <= 3.0 * sig / 10.0

    def test_noise_fraction(self):
        fit = fit_power_quadratic([[0.5, 5000 * 0.25 + 200 * 0.5],
                                   [1.0, 5200.0], [2.0, 5000 * 4 + 400]])
        frac = fit.noise_fraction(1.0)
        assert frac == pytest.approx(200 / 5200, rel=1e-6)

    def test_degenerate_inputs(self):
        with pytest.raises(FitDegenerate):
            fit_power_quadratic([[1.0, 10.0], [1.0, 12.0], [1.0, 9.0]])


class TestHeraldedG2:
    def test_independent_channels_factorize(self):
        st = poisson_stream({0: 3e5, 1: 3e5, 2: 3e5}, 20.0, seed=12)
        curve = heralded_g2(st, coincidence_window=20e-9,
                            tau_grid=np.linspace(-200e-9, 200e-9, 11))
        expected_n123 = curve.n12 * curve.n13.astype(float) / curve.n1
        assert np.all(expected_n123 > 100)
        assert np.all(np.abs(curve.g2 - 1.0) <= 4.0 / np.sqrt(expected_n123))

    def test_contamination_pulls_toward_one(self):
        slot = round(1.64e-9 / math.log(2) * 1e12) * 1e-12
        src = SourceModel(pair_rate_quadratic_coeff=0.02 / slot,
                          correlation_fwhm=1.64e-9)
        st = simulate_hbt(src, IDEAL, IDEAL, IDEAL, 0.5, 1.0,
                          duration=2_000_000 * slot, seed=13)
        clean = heralded_g2(st, coincidence_window=1.64e-9, tau_grid=[0.0])
        # merge an independent Poisson background into signal1
        rng = np.random.default_rng(14)
        extra = np.sort(rng.integers(0, st.duration_ps + 1,
                                     size=int(5e5 * st.duration), dtype=np.int64))
        s1 = np.sort(np.concatenate([st.channel_timestamps(1), extra]))
        mixed_stream = TimeTagStream.from_channel_arrays(
            {0: st.channel_timestamps(0), 1: s1, 2: st.channel_timestamps(2)},
            duration=st.duration)
        mixed = heralded_g2(mixed_stream, coincidence_window=1.64e-9, tau_grid=[0.0])
        assert clean.zero_delay < 0.2
        assert mixed.zero_delay > clean.zero_delay
        assert abs(mixed.zero_delay - 1.0) < abs(clean.zero_delay - 1.0)

    def test_empty_denominator_is_nan(self):
        st = TimeTagStream.from_channel_arrays(
            {0: np.array([1000]), 1: np.array([1500]), 2: np.array([900_000])},
            duration=1e-6)
        curve = heralded_g2(st, coincidence_window=1e-9, tau_grid=[0.0])
        assert math.isnan(curve.g2[0])


class TestUnheraldedG2:
    def test_independent_streams_flat(self):
        st = poisson_stream({0: 1e5, 1: 1e5}, 5.0, seed=15)
        curve = unheralded_g2(st, 0, 1, np.linspace(-20e-9, 20e-9, 9))
        counts = curve.pair_counts.astype(float)
        assert np.all(np.abs(curve.g2 - 1.0) <= 4.0 / np.sqrt(counts))

    def test_mode_number_inversion(self):
        assert effective_mode_number(2.0) == pytest.approx(1.0, rel=1e-12)
        assert effective_mode_number(1.0667) == pytest.approx(15.0, rel=1e-2)
        with pytest.raises(ModeNumberUndefined):
            effective_mode_number(1.0)

    def test_single_point_needs_bin_width(self):
        st = poisson_stream({0: 1e4, 1: 1e4}, 0.1, seed=16)
        with pytest.raises(DomainError):
            unheralded_g2(st, 0, 1, [0.0])


class TestEfficiencyInversion:
    def test_noiseless_exact(self):
        n_c, eta_s, eta_i = 1e6, 0.2, 0.25
        inv = collection_efficiency(
            singles_s=eta_s * n_c, singles_i=eta_i * n_c,
            coincidences=eta_s * eta_i * n_c, accidentals=0.0)
        assert inv.eta_s == pytest.approx(eta_s, rel=1e-12)
        assert inv.eta_i == pytest.approx(eta_i, rel=1e-12)
        assert inv.n_c == pytest.approx(n_c, rel=1e-12)

    def test_with_noise_and_darks_exact(self):
        n_c, eta_s, eta_i = 1e6, 0.2, 0.25
        r_s, r_i, d_s, d_i = 2e5, 1e5, 100.0, 80.0
        singles_s = eta_s * (n_c + r_s) + d_s
        singles_i = eta_i * (n_c + r_i) + d_i
        nf_s = eta_s * r_s / (eta_s * (n_c + r_s))
        nf_i = eta_i * r_i / (eta_i * (n_c + r_i))
        inv = collection_efficiency(singles_s, singles_i,
                                    coincidences=eta_s * eta_i * n_c + 500.0,
                                    accidentals=500.0, noise_fraction_s=nf_s,
                                    noise_fraction_i=nf_i, dark_s=d_s, dark_i=d_i)
        assert inv.eta_s == pytest.approx(eta_s, rel=1e-12)
        assert inv.eta_i == pytest.approx(eta_i, rel=1e-12)
        assert inv.n_c == pytest.approx(n_c, rel=1e-12)

    def test_no_true_coincidences(self):
        with pytest.raises(NoTrueCoincidences):
            collection_efficiency(1e4, 1e4, 50.0, 60.0)


class TestLossBudget:
    def test_measured_budget(self):
        budget = loss_budget(1.50, 2.55, 1.10, 0.750)
        assert budget.total_efficiency == pytest.approx(0.229, abs=0.003)

    def test_inverse_recovers_emission_probability(self):
        p = infer_emission_probability(0.229, 1.50, 2.55, 1.10)
        assert p == pytest.approx(0.750, abs=0.005)

    def test_zero_losses(self):
        assert loss_budget(0, 0, 0, 0.42).total_efficiency == pytest.approx(0.42)

    def test_inconsistent_budget(self):
        with pytest.raises(InconsistentBudget):
            infer_emission_probability(0.9, 1.5, 2.55, 1.10)


class TestVisibility:
    def _scan(self, v, c0=1e5, floor=0.0, phi0=0.3, n=16):
        phases = np.linspace(0, 2 * math.pi, n, endpoint=False)
        counts = c0 * (1 + v * np.cos(phases - phi0)) + floor
        return np.column_stack([phases, counts, np.full(n, floor)])

    def test_noiseless_recovery(self):
        fit = fit_visibility(self._scan(0.973))
        assert fit.v_raw == pytest.approx(0.973, abs=1e-6)

    def test_floor_subtraction_reproduces_gap(self):
        # accidental floor sized so the raw visibility reads 97.3%
        v_true = 0.9939
        c0 = 1e5
        floor = c0 * (v_true / 0.973 - 1.0)
        fit = fit_visibility(self._scan(v_true, c0=c0, floor=floor))
        assert fit.v_raw == pytest.approx(0.973, abs=5e-4)
        assert fit.v_subtracted == pytest.approx(0.994, abs=5e-4)
        # brute-force fringe max/min oracle on the raw curve
        phases = np.linspace(0, 2 * math.pi, 4001)
        raw = c0 * (1 + v_true * np.cos(phases - 0.3)) + floor
        oracle = (raw.max() - raw.min()) / (raw.max() + raw.min())
        assert fit.v_raw == pytest.approx(oracle, abs=5e-4)

    def test_full_visibility_shortcut(self):
        scan = self._scan(1.0)
        scan[:, 1] = np.maximum(scan[:, 1], 0.0)
        fit = fit_visibility(scan)
        assert fit.v_raw == pytest.approx(1.0, abs=1e-6)

    def test_too_few_points(self):
        with pytest.raises(InsufficientData):
            fit_visibility(self._scan(0.9)[:4])


class TestChsh:
    def test_reference_rows(self):
        r = chsh_from_visibility(0.9955, 0.0033)
        assert r.s_value == pytest.approx(2.8157, abs=5e-4)
        assert r.violation_sigmas == pytest.approx(87.39, abs=0.05)
        r = chsh_from_visibility(0.9997, 0.0010)
        assert r.violation_sigmas == pytest.approx(292.59, abs=0.1)

    def test_classical_bound(self):
        r = chsh_from_visibility(1.0 / math.sqrt(2.0), 0.01)
        assert r.s_value == pytest.approx(2.0, rel=1e-12)
        assert r.violation_sigmas == pytest.approx(0.0, abs=1e-9)
        assert r.classical_visibility_bound == pytest.approx(1 / math.sqrt(2))

    def test_identities(self):
        r = chsh_from_visibility(0.98, 0.004)
        assert r.s_value == pytest.approx(2 * math.sqrt(2) * 0.98, rel=1e-12)
        assert r.s_sigma == pytest.approx(2 * math.sqrt(2) * 0.004, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            chsh_from_visibility(1.2, 0.01)


class TestMonteCarloUncertainty:
    @staticmethod
    def _vis_estimator(scan_counts, phases, accidentals):
        fit = fit_visibility(np.column_stack([phases, scan_counts, accidentals]))
        return [fit.v_raw]

    def test_sigma_small_at_huge_counts(self):
        phases = np.linspace(0, 2 * math.pi, 16, endpoint=False)
        counts = 1e8 * (1 + 0.99 * np.cos(phases))
        acc = np.zeros(16)
        sig = monte_carlo_uncertainty(
            lambda d: self._vis_estimator(d, phases, acc), counts,
            trials=50, seed=1)
        assert sig[0] < 2e-4

    def test_table_scale_visibility_error(self):
        # counts sized like a per-point Table-scale run: sigma lands in the
        # few-tenths-of-a-point band of the published error bars
        phases = np.linspace(0, 2 * math.pi, 16, endpoint=False)
        counts = 300.0 * (1 + 0.99 * np.cos(phases))
        acc = np.zeros(16)
        sig = monte_carlo_uncertainty(
            lambda d: self._vis_estimator(d, phases, acc), counts,
            trials=300, seed=2)
        assert 0.003 <= sig[0] <= 0.009

    def test_inverse_sqrt_scaling(self):
        phases = np.linspace(0, 2 * math.pi, 16, endpoint=False)
        sigmas = []
        for scale in (1e4, 1e6):
            counts = scale * (1 + 0.9 * np.cos(phases))
            sigmas.append(monte_carlo_uncertainty(
                lambda d: self._vis_estimator(d, phases, np.zeros(16)), counts,
                trials=200, seed=3)[0])
        assert sigmas[0] / sigmas[1] == pytest.approx(10.0, rel=0.25)

    def test_unstable_estimator(self):
        def flaky(_):
            raise RuntimeError("nope")
        with pytest.raises(UnstableEstimate):
            monte_carlo_uncertainty(flaky, np.ones(4), trials=20, seed=4)

    def test_deterministic(self):
        est = lambda d: [float(np.sum(d))]
        a = monte_carlo_uncertainty(est, np.full(8, 100.0), trials=100, seed=5)
        b = monte_carlo_uncertainty(est, np.full(8, 100.0), trials=100, seed=5)
        assert a[0] == b[0]

    def test_dict_data(self):
        est = lambda d: [float(d["x"].sum() - d["y"].sum())]
        sig = monte_carlo_uncertainty(est, {"x": np.full(4, 1e4), "y": np.full(4, 1e4)},
                                      trials=200, seed=6)
        assert sig[0] == pytest.approx(math.sqrt(8e4), rel=0.2)

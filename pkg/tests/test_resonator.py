"""Q algebra, geometry relations, resonance fitting, dispersion fitting."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.constants import c

from ringpair import (CouplingRegime, ModeProperties, QualityFactors, ResonanceScan,
                      RingGeometry, beta2_from_d2, fit_integrated_dispersion,
                      fit_resonance, fsr_from_radius, loaded_q, lorentzian_dip,
                      physical_to_q, radius_from_fsr, split_loaded_q,
                      transmission_extremum)
from ringpair.errors import DomainError, InsufficientData, NoResonance

from conftest import GROUP_VELOCITY, PUMP_WAVELENGTH, RADIUS

OMEGA0 = 2.0 * math.pi * c / PUMP_WAVELENGTH

positive_q = st.floats(min_value=1e3, max_value=1e9)


class TestLoadedQ:
    def test_measured_device(self):
        # Qe=1.4e6 with Qi=3.5e6 loads to exactly 1.0e6
        assert loaded_q(3.5e6, 1.4e6) == pytest.approx(1.0e6, rel=1e-12)

    def test_second_device_rounds_to_table(self):
        q = loaded_q(4.1e6, 2.6e6)
        assert q == pytest.approx(1.591e6, rel=1e-3)
        assert round(q / 1e6, 1) == 1.6

    @given(positive_q)
    def test_symmetric_input_halves(self, x):
        assert loaded_q(x, x) == pytest.approx(x / 2.0, rel=1e-12)

    @given(positive_q, positive_q)
    def test_loaded_below_both(self, qi, qe):
        assert loaded_q(qi, qe) <= min(qi, qe)

    def test_unbounded_intrinsic(self):
        assert loaded_q(math.inf, 2e6) == 2e6

    @pytest.mark.parametrize("qi,qe", [(0.0, 1e6), (-1e6, 1e6), (1e6, 0.0)])
    def test_nonpositive_rejected(self, qi, qe):
        with pytest.raises(DomainError):
            loaded_q(qi, qe)


class TestQualityFactors:
    def test_regimes(self):
        assert QualityFactors.from_intrinsic_external(3.5e6, 1.4e6).regime == CouplingRegime.OVER
        assert QualityFactors.from_intrinsic_external(5.3e6, 7.8e6).regime == CouplingRegime.UNDER
        assert QualityFactors.from_intrinsic_external(4e6, 4e6 * (1 + 5e-4)).regime == CouplingRegime.CRITICAL

    def test_inconsistent_loaded_rejected(self):
        with pytest.raises(DomainError):
            QualityFactors(q_intrinsic=2e6, q_external=2e6, q_loaded=2e6,
                           regime=CouplingRegime.CRITICAL)


class TestPhysicalToQ:
    def test_alpha_inversion_roundtrip(self, device_geometry, device_mode):
        # alpha back-solved from Qi reproduces Qi exactly
        alpha = OMEGA0 / (3.5e6 * GROUP_VELOCITY)
        assert alpha == pytest.approx(2.46, rel=2e-3)
        kappa_sq = OMEGA0 * device_geometry.roundtrip_length / (GROUP_VELOCITY * 1.4e6)
        assert kappa_sq == pytest.approx(4.4e-3, rel=1e-2)
        q = physical_to_q(alpha, kappa_sq, device_geometry, device_mode, OMEGA0)
        assert q.q_intrinsic == pytest.approx(3.5e6, rel=1e-12)
        assert q.q_external == pytest.approx(1.4e6, rel=1e-12)
        assert q.regime == CouplingRegime.OVER

    def test_lossless_limit(self, device_geometry, device_mode):
        q = physical_to_q(0.0, 4.4e-3, device_geometry, device_mode, OMEGA0)
        assert math.isinf(q.q_intrinsic)
        assert q.q_loaded == pytest.approx(q.q_external, rel=1e-12)

    @pytest.mark.parametrize("kappa_sq", [0.0, -0.1, 1.5])
    def test_bad_coupling_rejected(self, kappa_sq, device_geometry, device_mode):
        with pytest.raises(DomainError):
            physical_to_q(1.0, kappa_sq, device_geometry, device_mode, OMEGA0)


class TestGeometry:
    def test_radius_from_fsr_matches_device(self):
        n_g = c / GROUP_VELOCITY
        assert radius_from_fsr(200e9, n_g) == pytest.approx(113e-6, abs=5e-8)

    def test_inverse_proportionality(self):
        assert radius_from_fsr(200e9, 4.0) == pytest.approx(radius_from_fsr(200e9, 2.0) / 2, rel=1e-12)

    @given(st.floats(min_value=1e9, max_value=1e13), st.floats(min_value=1.0, max_value=5.0))
    def test_mutual_inverse(self, fsr, n_g):
        assert fsr_from_radius(radius_from_fsr(fsr, n_g), n_g) == pytest.approx(fsr, rel=1e-12)

    def test_ring_geometry_invariant(self):
        with pytest.raises(DomainError):
            RingGeometry(radius=RADIUS, roundtrip_length=2 * RADIUS)
        geom = RingGeometry.from_radius(RADIUS)
        assert geom.roundtrip_length == pytest.approx(7.1e-4, rel=1e-3)

    def test_mode_invariants_enforced(self):
        with pytest.raises(DomainError):
            ModeProperties(n_eff=1.85, n_g=2.11, group_velocity=1e8, a_eff=1.16e-12,
                           n2=0.25e-18, gamma=0.88, beta2=-0.88e-25,
                           ref_wavelength=1540.5e-9)


class TestTransmissionExtremum:
    def test_over_coupled_device(self, device_q):
        t_min, er = transmission_extremum(device_q)
        assert t_min == pytest.approx(0.18367, rel=1e-4)
        assert er == pytest.approx(7.36, abs=0.01)
        assert abs(er - 7.5) <= 0.3            # tabulated value

    def test_near_critical_device(self):
        q = QualityFactors.from_intrinsic_external(4.6e6, 4.1e6)
        _, er = transmission_extremum(q)
        assert er == pytest.approx(24.81, abs=0.01)
        # compare at the table's 0.1 dB quoting precision (exact-tie tolerant)
        assert abs(round(er, 1) - 24.5) <= 0.3 + 1e-9

    def test_critical_coupling_unbounded(self):
        q = QualityFactors.from_intrinsic_external(2e6, 2e6)
        t_min, er = transmission_extremum(q)
        assert t_min == 0.0
        assert math.isinf(er)

    @given(positive_q, positive_q)
    def test_swap_invariance(self, qi, qe):
        a = transmission_extremum(QualityFactors.from_intrinsic_external(qi, qe))
        b = transmission_extremum(QualityFactors.from_intrinsic_external(qe, qi))
        assert a[0] == pytest.approx(b[0], rel=1e-9, abs=1e-15)


class TestFitResonance:
    def _scan(self, f0, q, er_db, regime, baseline=1.0, n=2001, span_fwhm=30):
        fwhm = f0 / q
        t_min = 10 ** (-er_db / 10.0)
        f = np.linspace(f0 - span_fwhm * fwhm / 2, f0 + span_fwhm * fwhm / 2, n)
        return ResonanceScan(f, lorentzian_dip(f, f0, fwhm, t_min, baseline)), fwhm, t_min

    def test_noiseless_recovery(self):
        scan, fwhm, _ = self._scan(194.6e12, 1.0e6, 7.4, "over")
        fit = fit_resonance(scan, "over")
        assert fit.q_loaded == pytest.approx(1.0e6, rel=5e-3)
        assert fit.center_frequency == pytest.approx(194.6e12, rel=1e-9)
        assert fit.fwhm == pytest.approx(fwhm, rel=5e-3)
        assert fit.residual_norm < 1e-6

    def test_table_linewidth_gives_quoted_q(self):
        # 193 MHz FWHM at the 1540.5 nm resonance reads back as Q ~ 1.0e6
        f0 = 194.67e12
        scan, _, _ = self._scan(f0, f0 / 193e6, 7.5, "over")
        fit = fit_resonance(scan, "over")
        assert fit.q_loaded == pytest.approx(f0 / 193e6, rel=5e-3)
        assert round(fit.q_loaded / 1e6, 1) == 1.0

    def test_flat_scan_raises(self):
        f = np.linspace(194.0e12, 194.2e12, 500)
        with pytest.raises(NoResonance):
            fit_resonance(ResonanceScan(f, np.ones_like(f)), "over")

    @pytest.mark.parametrize("regime,qi,qe", [
        ("over", 3.5e6, 1.4e6),
        ("under", 5.3e6, 7.8e6),
        ("critical", 4.4e6, 4.4e6),
    ])
    def test_generate_fit_split_roundtrip(self, regime, qi, qe):
        q = QualityFactors.from_intrinsic_external(qi, qe)
        t_min, er = transmission_extremum(q)
        er = 200.0 if math.isinf(er) else er
        scan, _, _ = self._scan(194.6e12, q.q_loaded, er, regime)
        fit = fit_resonance(scan, regime)
        assert fit.q_split.q_external == pytest.approx(qe, rel=1e-2)
        if not math.isinf(fit.q_split.q_intrinsic):
            assert fit.q_split.q_intrinsic == pytest.approx(qi, rel=1e-2)

    def test_split_requires_regime_flag(self):
        # the ER degeneracy: over and under splits swap Qi and Qe
        over = split_loaded_q(1.0e6, 0.18367, CouplingRegime.OVER)
        under = split_loaded_q(1.0e6, 0.18367, CouplingRegime.UNDER)
        assert over.q_external == pytest.approx(under.q_intrinsic, rel=1e-12)
        assert over.q_intrinsic == pytest.approx(under.q_external, rel=1e-12)

    def test_scan_csv_roundtrip(self, tmp_path):
        scan, _, _ = self._scan(194.6e12, 1e6, 7.4, "over", n=101)
        path = tmp_path / "scan.csv"
        scan.to_csv(path)
        back = ResonanceScan.from_csv(path)
        np.testing.assert_allclose(back.frequencies, scan.frequencies, rtol=0)
        np.testing.assert_allclose(back.transmission, scan.transmission, rtol=0)

    def test_scan_requires_increasing_frequencies(self):
        with pytest.raises(DomainError):
            ResonanceScan(np.array([1.0, 1.0, 2.0]), np.array([1.0, 0.5, 1.0]))


class TestDispersionFit:
    D1 = 2 * math.pi * 200e9
    D2 = 2.28e7
    OMEGA_PUMP = 2 * math.pi * 194.6e12

    def _comb(self, n_side, d2=D2, d3=0.0):
        mu = np.arange(-n_side, n_side + 1, dtype=float)
        return (self.OMEGA_PUMP + self.D1 * mu + 0.5 * d2 * mu**2
                + d3 * mu**3 / 6.0), n_side

    def test_exact_quadratic_recovery(self):
        omega, pump = self._comb(40)
        fit = fit_integrated_dispersion(omega, pump)
        assert fit.omega0 == pytest.approx(self.OMEGA_PUMP, rel=1e-12)
        assert fit.d1 == pytest.approx(self.D1, rel=1e-9)
        assert fit.d2 == pytest.approx(self.D2, rel=1e-3)
        assert np.max(np.abs(fit.residuals)) <= 1e-9 * self.OMEGA_PUMP

    def test_measured_d2_recovered(self):
        omega, pump = self._comb(43)
        fit = fit_integrated_dispersion(omega, pump)
        assert fit.d2 == pytest.approx(2.28e7, rel=1e-3)

    def test_pure_linear_comb(self):
        omega, pump = self._comb(30, d2=0.0)
        fit = fit_integrated_dispersion(omega, pump)
        assert abs(fit.d2) <= 1e-9 * self.D1
        assert np.max(np.abs(fit.d_int)) <= 1e-9 * self.OMEGA_PUMP

    def test_d_int_definition(self):
        omega, pump = self._comb(20)
        fit = fit_integrated_dispersion(omega, pump)
        mu = np.arange(len(omega), dtype=float) - pump
        np.testing.assert_allclose(fit.d_int, omega - fit.omega0 - fit.d1 * mu,
                                   rtol=0, atol=1e-6 * abs(fit.d1))

    def test_higher_order_fit(self):
        omega, pump = self._comb(30, d3=5e4)
        fit = fit_integrated_dispersion(omega, pump, order=3)
        assert fit.higher_orders[0] == pytest.approx(5e4, rel=1e-3)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            fit_integrated_dispersion([1.0, 2.0, 3.0, 4.0], 2)

    def test_json_export(self):
        import json
        omega, pump = self._comb(10)
        fit = fit_integrated_dispersion(omega, pump)
        doc = json.loads(fit.to_json())
        assert doc["d1"] == pytest.approx(self.D1)
        assert len(doc["residuals"]) == len(omega)


class TestBeta2:
    def test_reference_value_within_3_percent(self):
        beta2 = beta2_from_d2(1.85, 2 * math.pi * 200e9, 2.28e7)
        assert beta2 == pytest.approx(-8.9098e-26, rel=1e-4)
        assert beta2 == pytest.approx(-0.88e-25, rel=0.03)

    def test_zero_d2(self):
        assert beta2_from_d2(1.85, 1e12, 0.0) == 0.0

    def test_anomalous_sign(self):
        assert beta2_from_d2(1.85, 1e12, 1e7) < 0

    def test_zero_d1_rejected(self):
        with pytest.raises(DomainError):
            beta2_from_d2(1.85, 0.0, 1e7)

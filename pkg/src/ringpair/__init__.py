"""ringpair: micro-ring photon-pair source design, simulation, and analysis."""

__version__ = "0.1.0"

from .analysis import (BellResult, CarResult, CoincidenceHistogram, EfficiencyBudget,
                       EfficiencyInversion, G2Curve, HeraldedG2, PowerFit, VisibilityFit,
                       brute_force_histogram, car, chsh_from_visibility,
                       coincidence_histogram, collection_efficiency,
                       effective_mode_number, fit_power_quadratic, fit_visibility,
                       heralded_g2, infer_emission_probability, loss_budget,
                       monte_carlo_uncertainty, unheralded_g2)
from .comb import (CombLine, ItuChannel, channel_to_wavelength, pair_channels,
                   predicted_jsi, synthesize_comb, wavelength_to_channel)
from .resonator import (CouplingRegime, DispersionFit, ModeProperties, QualityFactors,
                        ResonanceFit, ResonanceScan, RingGeometry, beta2_from_d2,
                        fit_integrated_dispersion, fit_resonance, fsr_from_radius,
                        loaded_q, lorentzian_dip, physical_to_q, radius_from_fsr,
                        split_loaded_q, transmission_extremum)
from .sfwm import (PumpConfig, RateBreakdown, emission_probability,
                   emission_probability_series, emitted_pair_rate,
                   optimize_external_q, pair_generation_rate, phase_mismatch_model,
                   sweep_rates)
from .simulate import (DetectorModel, FransonConfig, SourceModel,
                       coincidence_fwhm_from_linewidth, simulate_franson,
                       simulate_hbt, simulate_pair_source, split_channel)
from .tags import TimeTagStream, read_qtag, read_tag_csv, write_qtag, write_tag_csv

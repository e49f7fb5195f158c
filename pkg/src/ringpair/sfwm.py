"""Pair generation and emission rates for spontaneous four-wave mixing.

The cavity-enhanced generation rate on resonance is

    N_c = 32 v_g^4 gamma^2 P_p^2 Q^7 / (omega0^3 L^2 Q_e^4) * sinc^2(L dk / 2)

with sinc(x) = sin(x)/x. Each generated photon leaves the ring through the
bus waveguide with probability p = Q/Q_e (the high-Q limit of the geometric
escape series), so the emitted pair rate is the product N_cc = N_c * p,
proportional to Q^8/Q_e^5 at dk = 0. At fixed Q_i the generation rate peaks
at Q_e = (3/4) Q_i while the emitted rate peaks at Q_e = (3/5) Q_i; the
optimizer recovers both numerically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .resonator import ModeProperties, QualityFactors, RingGeometry, loaded_q

_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PumpConfig:
    """CW pump: power in W, wavelength in m, resonance flag."""

    power: float
    wavelength: float
    on_resonance: bool = True

    def __post_init__(self) -> None:
        if self.power < 0:
            raise DomainError(f"pump power must be >= 0, got {self.power}")
        if self.wavelength <= 0:
            raise DomainError("pump wavelength must be positive")

    @property
    def omega0(self) -> float:
        from scipy.constants import c
        return 2.0 * math.pi * c / self.wavelength


@dataclass(frozen=True)
class RateBreakdown:
    """Generation rate, escape probability, and their product."""

    generation_rate: float          # pairs/s in the ring
    emission_probability: float     # per photon
    emitted_rate: float             # pairs/s in the bus waveguide
    phase_matching_factor: float    # sinc^2 term, in [0, 1]

    def __post_init__(self) -> None:
        if self.emitted_rate != self.generation_rate * self.emission_probability:
            raise DomainError("emitted_rate must equal generation_rate * emission_probability")


def _sinc(x: float) -> float:
    # sin(x)/x convention; numpy's sinc is sin(pi x)/(pi x)
    return float(np.sinc(x / math.pi))


def pair_generation_rate(mode: ModeProperties, geometry: RingGeometry,
                         q: QualityFactors, pump: PumpConfig,
                         phase_mismatch: float = 0.0) -> float:
    """SFWM pair generation rate inside the ring, in pairs/s.

    ``phase_mismatch`` is dk in 1/m; the rate carries the sinc^2(L dk / 2)
    phase-matching factor. Q factors are treated as wavelength-independent
    across the comb.
    """
    if not pump.on_resonance:
        raise DomainError("pump must be on resonance for the cavity-enhanced rate")
    vg = mode.group_velocity
    gamma = mode.gamma
    L = geometry.roundtrip_length
    omega0 = pump.omega0
    s = _sinc(L * phase_mismatch / 2.0)
    return (32.0 * vg**4 * gamma**2 * pump.power**2 * q.q_loaded**7
            / (omega0**3 * L**2 * q.q_external**4)) * s * s


def emission_probability_series(kappa_sq: float, roundtrip_survival: float,
                                terms: int | None = None) -> float:
    """Escape probability as the geometric roundtrip series.

    Sums kappa^2 + (1-kappa^2) a^2 kappa^2 + ... for ``terms`` roundtrips;
    with ``terms=None`` returns the closed form
    kappa^2 / (1 - a^2 + a^2 kappa^2). ``roundtrip_survival`` is a^2.
    """
    if not 0.0 < kappa_sq <= 1.0:
        raise DomainError(f"kappa^2 must be in (0, 1], got {kappa_sq}")
    if not 0.0 < roundtrip_survival <= 1.0:
        raise DomainError(f"a^2 must be in (0, 1], got {roundtrip_survival}")
    r = roundtrip_survival * (1.0 - kappa_sq)
    if terms is None:
        return kappa_sq / (1.0 - r)
    if terms < 1:
        raise DomainError("terms must be >= 1")
    # kappa^2 * (1 - r^N) / (1 - r), summed stably for r -> 1
    if r == 1.0:
        return kappa_sq * terms
    return kappa_sq * (1.0 - r**terms) / (1.0 - r)


def emission_probability(q: QualityFactors) -> float:
    """High-Q limit of the escape probability: p = Q/Q_e in (0, 1]."""
    return q.q_loaded / q.q_external


def emitted_pair_rate(mode: ModeProperties, geometry: RingGeometry,
                      q: QualityFactors, pump: PumpConfig,
                      phase_mismatch: float = 0.0) -> RateBreakdown:
    """Emitted pair rate N_cc = N_c * p with the full breakdown."""
    n_c = pair_generation_rate(mode, geometry, q, pump, phase_mismatch)
    p = emission_probability(q)
    s = _sinc(geometry.roundtrip_length * phase_mismatch / 2.0)
    return RateBreakdown(
        generation_rate=n_c,
        emission_probability=p,
        emitted_rate=n_c * p,
        phase_matching_factor=s * s,
    )


def _objective(name: str):
    if name == "max_generation":
        # N_c ~ Q^7 / Qe^4 at fixed everything else
        return lambda qi, qe: 7.0 * math.log(loaded_q(qi, qe)) - 4.0 * math.log(qe)
    if name == "max_emitted":
        # N_cc ~ Q^8 / Qe^5
        return lambda qi, qe: 8.0 * math.log(loaded_q(qi, qe)) - 5.0 * math.log(qe)
    raise DomainError(f"unknown objective {name!r}")


def optimize_external_q(q_intrinsic: float, objective: str = "max_emitted",
                        rel_tol: float = 1e-9) -> float:
    """External Q maximizing the chosen rate at fixed intrinsic Q.

    Golden-section search on log(Q_e) over [1e-3 Q_i, 1e3 Q_i]; the
    objective is unimodal there. Returns Q_e* to relative accuracy well
    below 1e-6.
    """
    if not q_intrinsic > 0 or math.isinf(q_intrinsic):
        raise DomainError("q_intrinsic must be positive and finite")
    f = _objective(objective)
    lo = math.log(1e-3 * q_intrinsic)
    hi = math.log(1e3 * q_intrinsic)

    m1 = hi - _INV_GOLDEN * (hi - lo)
    m2 = lo + _INV_GOLDEN * (hi - lo)
    f1 = f(q_intrinsic, math.exp(m1))
    f2 = f(q_intrinsic, math.exp(m2))
    while (hi - lo) > rel_tol:
        if f1 > f2:   # maximum lies in [lo, m2]
            hi, m2, f2 = m2, m1, f1
            m1 = hi - _INV_GOLDEN * (hi - lo)
            f1 = f(q_intrinsic, math.exp(m1))
        else:
            lo, m1, f1 = m1, m2, f2
            m2 = lo + _INV_GOLDEN * (hi - lo)
            f2 = f(q_intrinsic, math.exp(m2))
    return math.exp(0.5 * (lo + hi))


def phase_mismatch_model(mode_index: int, beta2: float, d1: float,
                         gamma: float, circulating_power: float) -> float:
    """Degenerate-FWM phase mismatch dk = beta2 (mu D1)^2 + 2 gamma P, in 1/m.

    A modeling convenience for feeding the sinc^2 factor; the dispersion
    term uses the comb detuning mu*D1 from the pump and the nonlinear term
    uses the circulating power directly (no cavity build-up model).
    """
    detune = mode_index * d1
    return beta2 * detune * detune + 2.0 * gamma * circulating_power


def sweep_rates(mode: ModeProperties, geometry: RingGeometry, pump: PumpConfig,
                qi_values, qe_values) -> list[dict]:
    """Rate grid over (Q_i, Q_e) for contour plots; one row per grid point."""
    rows = []
    for qi in qi_values:
        for qe in qe_values:
            q = QualityFactors.from_intrinsic_external(float(qi), float(qe))
            b = emitted_pair_rate(mode, geometry, q, pump)
            rows.append({
                "q_i": float(qi),
                "q_e": float(qe),
                "n_c": b.generation_rate,
                "p": b.emission_probability,
                "n_cc": b.emitted_rate,
            })
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["q_i", "q_e", "n_c", "p", "n_cc"])
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(row[k]) for k in w.fieldnames})

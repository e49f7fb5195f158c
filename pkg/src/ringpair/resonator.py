"""Ring-resonator Q-factor algebra, geometry relations, and spectral fits.

The loaded quality factor of an all-pass ring combines the intrinsic
(loss-limited) and external (coupling-limited) contributions harmonically:

    1/Q = 1/Q_i + 1/Q_e

with Q_i = omega0 / (alpha * v_g) set by the roundtrip propagation loss and
Q_e = (omega0 / kappa^2) * (L / v_g) set by the bus-ring power coupling.
On resonance the normalized transmission of the all-pass ring drops to

    T_min = ((1/Q_e - 1/Q_i) / (1/Q_e + 1/Q_i))^2

which is symmetric under Q_i <-> Q_e: an extinction ratio alone cannot
distinguish over- from under-coupling, so the dip fit takes the coupling
regime as an input.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as C_VACUUM
from scipy.optimize import curve_fit

from .errors import DomainError, FitDiverged, InsufficientData, NoResonance

# |Qe/Qi - 1| below this counts as critical coupling.
CRITICAL_COUPLING_TOL = 1e-3


class CouplingRegime(str, enum.Enum):
    OVER = "over"
    CRITICAL = "critical"
    UNDER = "under"


def loaded_q(q_intrinsic: float, q_external: float) -> float:
    """Loaded Q from the harmonic combination of Q_i and Q_e.

    ``q_intrinsic`` may be ``math.inf`` for a lossless ring, in which case
    the loaded Q equals the external Q.
    """
    if not q_intrinsic > 0 or not q_external > 0:
        raise DomainError(f"Q factors must be positive, got Qi={q_intrinsic}, Qe={q_external}")
    if math.isinf(q_intrinsic):
        return q_external
    return 1.0 / (1.0 / q_intrinsic + 1.0 / q_external)


def classify_regime(q_intrinsic: float, q_external: float,
                    critical_tol: float = CRITICAL_COUPLING_TOL) -> CouplingRegime:
    """Over if Q_e < Q_i, under if Q_e > Q_i, critical within tolerance."""
    if math.isinf(q_intrinsic):
        return CouplingRegime.OVER
    ratio = q_external / q_intrinsic
    if abs(ratio - 1.0) < critical_tol:
        return CouplingRegime.CRITICAL
    return CouplingRegime.OVER if ratio < 1.0 else CouplingRegime.UNDER


@dataclass(frozen=True)
class QualityFactors:
    """Intrinsic/external/loaded Q triple with its coupling regime."""

    q_intrinsic: float
    q_external: float
    q_loaded: float
    regime: CouplingRegime

    def __post_init__(self) -> None:
        if not self.q_external > 0 or not self.q_intrinsic > 0:
            raise DomainError("Q factors must be positive")
        expected = loaded_q(self.q_intrinsic, self.q_external)
        if abs(self.q_loaded - expected) > 1e-12 * expected:
            raise DomainError(
                f"inconsistent loaded Q: got {self.q_loaded}, expected {expected}")

    @classmethod
    def from_intrinsic_external(cls, q_intrinsic: float, q_external: float,
                                critical_tol: float = CRITICAL_COUPLING_TOL) -> "QualityFactors":
        return cls(
            q_intrinsic=q_intrinsic,
            q_external=q_external,
            q_loaded=loaded_q(q_intrinsic, q_external),
            regime=classify_regime(q_intrinsic, q_external, critical_tol),
        )


@dataclass(frozen=True)
class RingGeometry:
    """Ring radius and roundtrip length (L = 2*pi*R), both in meters."""

    radius: float
    roundtrip_length: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise DomainError(f"radius must be positive, got {self.radius}")
        expected = 2.0 * math.pi * self.radius
        if abs(self.roundtrip_length - expected) > 1e-12 * expected:
            raise DomainError("roundtrip_length must equal 2*pi*radius")

    @classmethod
    def from_radius(cls, radius: float) -> "RingGeometry":
        return cls(radius=radius, roundtrip_length=2.0 * math.pi * radius)


@dataclass(frozen=True)
class ModeProperties:
    """Waveguide mode parameters at a reference wavelength (all SI).

    ``group_velocity`` and ``gamma`` are redundant with (n_g, n2, a_eff,
    ref_wavelength); the constructor enforces both consistency relations
    so a hand-filled instance cannot silently disagree with itself.
    """

    n_eff: float
    n_g: float
    group_velocity: float      # m/s
    a_eff: float               # m^2
    n2: float                  # m^2/W
    gamma: float               # 1/(W m)
    beta2: float               # s^2/m
    ref_wavelength: float      # m

    def __post_init__(self) -> None:
        if self.n_g <= 0 or self.a_eff <= 0 or self.ref_wavelength <= 0:
            raise DomainError("n_g, a_eff and ref_wavelength must be positive")
        vg = C_VACUUM / self.n_g
        if abs(self.group_velocity - vg) > 1e-12 * vg:
            raise DomainError(f"group_velocity inconsistent with n_g: {self.group_velocity} vs {vg}")
        gam = 2.0 * math.pi * self.n2 / (self.ref_wavelength * self.a_eff)
        if abs(self.gamma - gam) > 1e-9 * abs(gam):
            raise DomainError(f"gamma inconsistent with n2/a_eff: {self.gamma} vs {gam}")

    @classmethod
    def from_waveguide(cls, n_eff: float, n_g: float, a_eff: float, n2: float,
                       beta2: float, ref_wavelength: float) -> "ModeProperties":
        """Derive group velocity and nonlinear coefficient from the indices."""
        return cls(
            n_eff=n_eff,
            n_g=n_g,
            group_velocity=C_VACUUM / n_g,
            a_eff=a_eff,
            n2=n2,
            gamma=2.0 * math.pi * n2 / (ref_wavelength * a_eff),
            beta2=beta2,
            ref_wavelength=ref_wavelength,
        )


def physical_to_q(alpha: float, kappa_sq: float, geometry: RingGeometry,
                  mode: ModeProperties, omega0: float,
                  critical_tol: float = CRITICAL_COUPLING_TOL) -> QualityFactors:
    """Q factors from roundtrip loss alpha (1/m) and power coupling kappa^2.

    Q_i = omega0/(alpha v_g); Q_e = (omega0/kappa^2)(L/v_g). alpha = 0 maps
    to an unbounded intrinsic Q.
    """
    if alpha < 0:
        raise DomainError(f"alpha must be >= 0, got {alpha}")
    if not 0.0 < kappa_sq <= 1.0:
        raise DomainError(f"kappa^2 must be in (0, 1], got {kappa_sq}")
    if omega0 <= 0:
        raise DomainError(f"omega0 must be positive, got {omega0}")
    vg = mode.group_velocity
    qi = math.inf if alpha == 0.0 else omega0 / (alpha * vg)
    qe = (omega0 / kappa_sq) * (geometry.roundtrip_length / vg)
    return QualityFactors.from_intrinsic_external(qi, qe, critical_tol)


def radius_from_fsr(fsr: float, n_g: float) -> float:
    """Ring radius R = c/(n_g * 2*pi * FSR)."""
    if fsr <= 0 or n_g <= 0:
        raise DomainError("fsr and n_g must be positive")
    return C_VACUUM / (n_g * 2.0 * math.pi * fsr)


def fsr_from_radius(radius: float, n_g: float) -> float:
    """Free spectral range c/(n_g * 2*pi * R); inverse of radius_from_fsr."""
    if radius <= 0 or n_g <= 0:
        raise DomainError("radius and n_g must be positive")
    return C_VACUUM / (n_g * 2.0 * math.pi * radius)


def transmission_extremum(q: QualityFactors) -> tuple[float, float]:
    """On-resonance transmission minimum and extinction ratio in dB.

    At critical coupling T_min = 0 and the extinction ratio is reported as
    ``math.inf``.
    """
    inv_e = 1.0 / q.q_external
    inv_i = 0.0 if math.isinf(q.q_intrinsic) else 1.0 / q.q_intrinsic
    ratio = (inv_e - inv_i) / (inv_e + inv_i)
    t_min = ratio * ratio
    if t_min == 0.0:
        return 0.0, math.inf
    return t_min, -10.0 * math.log10(t_min)


# ---------------------------------------------------------------------------
# Resonance-dip fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResonanceScan:
    """A normalized transmission spectrum: strictly increasing frequencies."""

    frequencies: np.ndarray      # Hz
    transmission: np.ndarray     # dimensionless, ~[0, 1]

    def __post_init__(self) -> None:
        f = np.asarray(self.frequencies, dtype=float)
        t = np.asarray(self.transmission, dtype=float)
        if f.ndim != 1 or f.shape != t.shape:
            raise DomainError("frequencies and transmission must be 1-D and equal length")
        if f.size >= 2 and not np.all(np.diff(f) > 0):
            raise DomainError("frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "transmission", t)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frequency_hz", "transmission"])
            for f, t in zip(self.frequencies, self.transmission):
                w.writerow([repr(float(f)), repr(float(t))])

    @classmethod
    def from_csv(cls, path) -> "ResonanceScan":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [s.strip() for s in rows[0]] != ["frequency_hz", "transmission"]:
            raise DomainError(f"{path}: expected header 'frequency_hz,transmission'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        return cls(frequencies=data[:, 0], transmission=data[:, 1])


def lorentzian_dip(frequencies, center, fwhm, t_min, baseline=1.0):
    """Symmetric Lorentzian dip reaching baseline*t_min at the center."""
    x = (np.asarray(frequencies, dtype=float) - center) / (fwhm / 2.0)
    return baseline * (1.0 - (1.0 - t_min) / (1.0 + x * x))


@dataclass(frozen=True)
class ResonanceFit:
    """Result of a Lorentzian dip fit plus the regime-resolved Q split."""

    center_frequency: float
    fwhm: float
    extinction_ratio: float      # dB
    q_loaded: float
    q_split: QualityFactors
    assumed_regime: CouplingRegime
    residual_norm: float


def split_loaded_q(q_loaded: float, t_min: float,
                   regime: CouplingRegime) -> QualityFactors:
    """Recover (Q_i, Q_e) from loaded Q and on-resonance transmission.

    sqrt(T_min) fixes |1/Q_e - 1/Q_i| relative to 1/Q; the regime flag
    resolves the sign ambiguity that the symmetric dip cannot.
    """
    if not 0.0 <= t_min < 1.0:
        raise DomainError(f"t_min must be in [0, 1), got {t_min}")
    if q_loaded <= 0:
        raise DomainError("q_loaded must be positive")
    s = math.sqrt(t_min)
    if regime == CouplingRegime.CRITICAL:
        qi = qe = 2.0 * q_loaded
    elif regime == CouplingRegime.OVER:
        qe = 2.0 * q_loaded / (1.0 + s)
        qi = 2.0 * q_loaded / (1.0 - s) if s < 1.0 else math.inf
    else:
        qi = 2.0 * q_loaded / (1.0 + s)
        qe = 2.0 * q_loaded / (1.0 - s)
    return QualityFactors(q_intrinsic=qi, q_external=qe,
                          q_loaded=loaded_q(qi, qe), regime=regime)


def fit_resonance(scan: ResonanceScan, assumed_regime: CouplingRegime | str) -> ResonanceFit:
    """Fit a Lorentzian dip and split the loaded Q under the given regime.

    Raises NoResonance when the scan has no dip deeper than 0.95, and
    FitDiverged when the optimizer fails.
    """
    regime = CouplingRegime(assumed_regime)
    f = scan.frequencies
    t = scan.transmission
    if f.size < 5:
        raise NoResonance("too few samples to contain a resonance dip")
    i_min = int(np.argmin(t))
    if t[i_min] > 0.95:
        raise NoResonance(f"minimum transmission {t[i_min]:.3f} > 0.95: no dip")

    baseline0 = float(np.median(t[t > np.percentile(t, 60)])) if np.any(t > np.percentile(t, 60)) else 1.0
    t_min0 = float(t[i_min] / baseline0)
    half = baseline0 * (1.0 + t_min0) / 2.0
    below = np.nonzero(t < half)[0]
    if below.size >= 2:
        fwhm0 = float(f[below[-1]] - f[below[0]])
    else:
        fwhm0 = float((f[-1] - f[0]) / 10.0)
    fwhm0 = max(fwhm0, float(np.min(np.diff(f))))

    p0 = [float(f[i_min]), fwhm0, min(max(t_min0, 0.0), 0.999), baseline0]
    try:
        popt, _ = curve_fit(
            lorentzian_dip, f, t, p0=p0,
            bounds=([f[0], 0.0, 0.0, 0.0], [f[-1], f[-1] - f[0], 1.0, 2.0]),
            maxfev=20000,
        )
    except (RuntimeError, ValueError) as exc:
        raise FitDiverged(f"Lorentzian fit failed: {exc}") from exc
    center, fwhm, t_min, baseline = (float(v) for v in popt)
    if fwhm <= 0 or not np.isfinite(popt).all():
        raise FitDiverged("Lorentzian fit returned a non-physical line width")

    resid = float(np.linalg.norm(t - lorentzian_dip(f, *popt)))
    q_l = center / fwhm
    er_db = math.inf if t_min == 0.0 else -10.0 * math.log10(t_min)
    return ResonanceFit(
        center_frequency=center,
        fwhm=fwhm,
        extinction_ratio=er_db,
        q_loaded=q_l,
        q_split=split_loaded_q(q_l, t_min, regime),
        assumed_regime=regime,
        residual_norm=resid,
    )


# ---------------------------------------------------------------------------
# Integrated dispersion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DispersionFit:
    """Polynomial expansion of resonance frequencies around the pump mode.

    omega_mu = omega0 + D1*mu + (D2/2)*mu^2 + sum_n>=3 (D_n/n!) mu^n, all in
    angular units (rad/s per mode power). d_int is the deviation from the
    uniform grid: omega_mu - omega0 - D1*mu.
    """

    omega0: float
    d1: float
    d2: float
    higher_orders: tuple = field(default_factory=tuple)
    residuals: np.ndarray = field(default_factory=lambda: np.empty(0))
    d_int: np.ndarray = field(default_factory=lambda: np.empty(0))
    mode_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def to_json(self) -> str:
        return json.dumps({
            "omega0_rad_s": self.omega0,
            "d1": self.d1,
            "d2": self.d2,
            "higher_orders": list(self.higher_orders),
            "residuals": [float(r) for r in self.residuals],
            "d_int": [float(d) for d in self.d_int],
        })


def fit_integrated_dispersion(resonance_frequencies, pump_index: int,
                              order: int = 2) -> DispersionFit:
    """Least-squares polynomial fit of angular resonance frequencies vs mode index.

    ``resonance_frequencies`` is the ordered list of angular frequencies
    (rad/s); mode index mu is zero at ``pump_index``. Returns D1, D2 (and
    factorial-scaled higher orders when ``order`` > 2) plus residuals and
    the integrated dispersion at every input mode.
    """
    omega = np.asarray(resonance_frequencies, dtype=float)
    if omega.ndim != 1:
        raise DomainError("resonance_frequencies must be 1-D")
    n = omega.size
    if not 0 <= pump_index < n:
        raise DomainError(f"pump_index {pump_index} outside 0..{n - 1}")
    if order < 1:
        raise DomainError("order must be >= 1")
    if n < max(order + 1, 5):
        raise InsufficientData(f"need >= {max(order + 1, 5)} resonances, got {n}")

    mu = np.arange(n, dtype=float) - pump_index
    coeffs = np.polynomial.polynomial.polyfit(mu, omega, deg=order)
    omega0, d1 = float(coeffs[0]), float(coeffs[1])
    d2 = float(2.0 * coeffs[2]) if order >= 2 else 0.0
    higher = tuple(float(math.factorial(k) * coeffs[k]) for k in range(3, order + 1))
    model = np.polynomial.polynomial.polyval(mu, coeffs)
    return DispersionFit(
        omega0=omega0,
        d1=d1,
        d2=d2,
        higher_orders=higher,
        residuals=omega - model,
        d_int=omega - omega0 - d1 * mu,
        mode_indices=(np.arange(n) - pump_index),
    )


def beta2_from_d2(n: float, d1: float, d2: float) -> float:
    """Group-velocity dispersion beta2 = -(n * D2) / (c * D1^2), in s^2/m.

    The index n entering the conversion is the effective index; D1 and D2
    are angular (rad/s per mode and per mode^2).
    """
    if d1 == 0:
        raise DomainError("d1 must be nonzero")
    return -(n * d2) / (C_VACUUM * d1 * d1)

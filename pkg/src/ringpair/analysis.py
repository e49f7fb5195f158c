"""Measurement estimators: histograms, CAR, power-law decomposition,
correlation functions, efficiency inversion, visibility, and CHSH.

All timing arithmetic is exact integer picoseconds. Delay d = t_b - t_a
falls in histogram bin k (center k * w) when (d + w//2) // w == k, and the
streaming kernel and the brute-force oracle share that rule so their
outputs agree bin for bin. Estimators consume streams in chunks through
sorted-array window searches, keeping memory bounded on large files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .errors import (DomainError, FitDegenerate, FitDiverged, InconsistentBudget,
                     InsufficientData, ModeNumberUndefined, NoTrueCoincidences,
                     UnstableEstimate)
from .tags import TimeTagStream

_CHUNK = 1 << 20   # events per merge chunk

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Coincidence histogram
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoincidenceHistogram:
    """Binned delay counts between two channels.

    ``delays`` holds the bin centers in seconds (bin k of width
    ``bin_width`` is centered at k * bin_width, k symmetric around zero).
    """

    bin_width: float
    delays: np.ndarray
    counts: np.ndarray
    total_a_counts: int
    total_b_counts: int
    duration: float

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        delays = np.asarray(self.delays, dtype=float)
        if counts.shape != delays.shape:
            raise DomainError("delays and counts must have the same shape")
        if counts.size and counts.min() < 0:
            raise DomainError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "delays", delays)


def _bin_geometry(bin_width: float, span: float) -> tuple[int, int]:
    if bin_width <= 0:
        raise DomainError("bin_width must be positive")
    w_ps = max(1, int(round(bin_width * 1e12)))
    n_half = max(1, int(round(span / (2.0 * bin_width))))
    return w_ps, n_half


def _windowed_delay_counts(a: np.ndarray, b: np.ndarray, d_lo: int, d_hi: int,
                           w_ps: int, n_half: int) -> np.ndarray:
    """Bin b-minus-a delays in [d_lo, d_hi] for sorted int64 arrays."""
    half = w_ps // 2
    counts = np.zeros(2 * n_half + 1, dtype=np.int64)
    for start in range(0, a.size, _CHUNK):
        chunk = a[start:start + _CHUNK]
        lo = np.searchsorted(b, chunk + d_lo, side="left")
        hi = np.searchsorted(b, chunk + d_hi + 1, side="left")
        m = hi - lo
        total = int(m.sum())
        if total == 0:
            continue
        offsets = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(m) - m, m)
        d = b[np.repeat(lo, m) + offsets] - np.repeat(chunk, m)
        k = (d + half) // w_ps + n_half
        counts += np.bincount(k, minlength=counts.size)
    return counts


def coincidence_histogram(stream: TimeTagStream, ch_a: int, ch_b: int,
                          bin_width: float, span: float) -> CoincidenceHistogram:
    """Histogram of (t_b - t_a) delays within +/- span/2.

    Runs a linear merge over the two time-sorted channels; an empty channel
    yields an all-zero histogram rather than an error.
    """
    w_ps, n_half = _bin_geometry(bin_width, span)
    a = stream.channel_timestamps(ch_a)
    b = stream.channel_timestamps(ch_b)
    half = w_ps // 2
    d_lo = -n_half * w_ps - half
    d_hi = n_half * w_ps + (w_ps - half - 1)
    counts = _windowed_delay_counts(a, b, d_lo, d_hi, w_ps, n_half)
    k = np.arange(-n_half, n_half + 1)
    return CoincidenceHistogram(
        bin_width=w_ps * 1e-12,
        delays=k * (w_ps * 1e-12),
        counts=counts,
        total_a_counts=a.size,
        total_b_counts=b.size,
        duration=stream.duration,
    )


def brute_force_histogram(stream: TimeTagStream, ch_a: int, ch_b: int,
                          bin_width: float, span: float) -> CoincidenceHistogram:
    """O(n^2) pair enumeration oracle; same bin rule as the merge kernel."""
    w_ps, n_half = _bin_geometry(bin_width, span)
    a = stream.channel_timestamps(ch_a)
    b = stream.channel_timestamps(ch_b)
    if a.size * b.size > 10**9:
        raise DomainError("brute-force histogram limited to 1e9 pair evaluations")
    half = w_ps // 2
    counts = np.zeros(2 * n_half + 1, dtype=np.int64)
    for start in range(0, a.size, 256):
        d = b[None, :] - a[start:start + 256, None]
        k = (d + half) // w_ps
        k = k[(k >= -n_half) & (k <= n_half)] + n_half
        counts += np.bincount(k.ravel(), minlength=counts.size)
    k = np.arange(-n_half, n_half + 1)
    return CoincidenceHistogram(
        bin_width=w_ps * 1e-12,
        delays=k * (w_ps * 1e-12),
        counts=counts,
        total_a_counts=a.size,
        total_b_counts=b.size,
        duration=stream.duration,
    )


# ---------------------------------------------------------------------------
# CAR
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CarResult:
    """Coincidence-to-accidental ratio and its windowed ingredients."""

    car: float
    true_cc: float             # counts/s, accidental-subtracted
    accidental_cc: float       # counts/s in the window
    coincidence_counts: int
    accidental_counts: float
    is_lower_bound: bool       # True when no accidentals were observed


def car(hist: CoincidenceHistogram, window: float,
        accidental_exclusion: float = 5.0) -> CarResult:
    """CAR from a histogram: peak-window counts over scaled off-peak level.

    The window (in seconds, >= one bin) is centered on the tallest bin;
    accidentals are the mean count of bins farther than
    ``accidental_exclusion`` windows from the peak, scaled to the window
    width. With zero observed accidentals the CAR is reported as the
    coincidence count itself (a lower bound) and flagged.
    """
    if window < hist.bin_width:
        raise DomainError("window must be at least one bin wide")
    if hist.counts.size == 0 or hist.counts.sum() == 0:
        return CarResult(car=math.nan, true_cc=0.0, accidental_cc=0.0,
                         coincidence_counts=0, accidental_counts=0.0,
                         is_lower_bound=False)
    n_w = max(1, int(round(window / hist.bin_width)))
    peak = int(np.argmax(hist.counts))
    lo = max(0, peak - (n_w - 1) // 2)
    hi = min(hist.counts.size, lo + n_w)
    coincidences = int(hist.counts[lo:hi].sum())

    offset = np.abs(np.arange(hist.counts.size) - peak)
    off_peak = offset > accidental_exclusion * n_w
    if not np.any(off_peak):
        raise DomainError(
            "histogram span too small: no off-peak region for the accidental estimate")
    acc_per_bin = float(hist.counts[off_peak].mean())
    accidentals = acc_per_bin * n_w

    if accidentals == 0.0:
        return CarResult(car=float(coincidences), true_cc=coincidences / hist.duration,
                         accidental_cc=0.0, coincidence_counts=coincidences,
                         accidental_counts=0.0, is_lower_bound=True)
    return CarResult(
        car=coincidences / accidentals,
        true_cc=(coincidences - accidentals) / hist.duration,
        accidental_cc=accidentals / hist.duration,
        coincidence_counts=coincidences,
        accidental_counts=accidentals,
        is_lower_bound=False,
    )


# ---------------------------------------------------------------------------
# Pump-power decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerFit:
    """rate = a P^2 + b P decomposition (a: pairs, b: noise)."""

    a: float                   # counts/s/mW^2
    b: float                   # counts/s/mW
    covariance: np.ndarray     # 2x2, order (a, b)
    residual_norm: float

    def noise_fraction(self, pump_mw: float) -> float:
        """Linear-noise share b P / (a P^2 + b P) of the singles at P."""
        total = self.a * pump_mw**2 + self.b * pump_mw
        return (self.b * pump_mw / total) if total > 0 else 0.0


def fit_power_quadratic(points) -> PowerFit:
    """Least squares of (pump_mw, rate) onto a P^2 + b P with no constant term."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("points must be (pump_mw, rate) pairs")
    p, y = pts[:, 0], pts[:, 1]
    if np.unique(p).size < 3:
        raise FitDegenerate("need at least 3 distinct pump powers")
    x = np.column_stack([p * p, p])
    if np.linalg.matrix_rank(x) < 2:
        raise FitDegenerate("design matrix is rank deficient")
    coef, res, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ coef
    dof = max(1, y.size - 2)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(x.T @ x)
    if not np.all(np.isfinite(coef)):
        raise FitDegenerate("non-finite fit coefficients")
    return PowerFit(a=float(coef[0]), b=float(coef[1]), covariance=cov,
                    residual_norm=float(np.linalg.norm(resid)))


# ---------------------------------------------------------------------------
# Correlation functions
# ---------------------------------------------------------------------------

def _window_counts_at(ref: np.ndarray, other: np.ndarray, tau_ps: int,
                      w_lo: int, w_hi: int) -> np.ndarray:
    """Per-ref-event counts of `other` in [ref + tau - w_lo, ref + tau + w_hi)."""
    lo = np.searchsorted(other, ref + (tau_ps - w_lo), side="left")
    hi = np.searchsorted(other, ref + (tau_ps + w_hi), side="left")
    return hi - lo


@dataclass(frozen=True)
class HeraldedG2:
    """g2_h(tau) curve with the raw coincidence counters behind it."""

    tau: np.ndarray            # s
    g2: np.ndarray             # NaN where undefined
    n1: int                    # herald singles
    n12: int                   # herald-signal1 pairs at zero delay
    n13: np.ndarray            # herald-signal2 pairs per tau
    n123: np.ndarray           # threefolds per tau

    @property
    def zero_delay(self) -> float:
        i = int(np.argmin(np.abs(self.tau)))
        return float(self.g2[i])


def heralded_g2(stream: TimeTagStream, coincidence_window: float, tau_grid,
                herald_ch: int = 0, s1_ch: int = 1, s2_ch: int = 2) -> HeraldedG2:
    """Heralded second-order autocorrelation from a three-channel stream.

    Implements g2_h(tau) = N123(tau) N1 / (N12 N13(tau)) with the
    herald-signal1 pair window fixed at zero delay while tau shifts the
    herald-signal2 window. Coincidences count multiplicities (products of
    window occupancies), so independent channels factorize to 1 exactly in
    expectation. Points with an empty denominator are NaN, never invented.
    """
    if coincidence_window <= 0:
        raise DomainError("coincidence_window must be positive")
    h = stream.channel_timestamps(herald_ch)
    s1 = stream.channel_timestamps(s1_ch)
    s2 = stream.channel_timestamps(s2_ch)
    w_ps = max(1, int(round(coincidence_window * 1e12)))
    w_lo, w_hi = w_ps // 2, w_ps - w_ps // 2
    tau = np.asarray(sorted(float(t) for t in tau_grid))
    tau_ps = np.rint(tau * 1e12).astype(np.int64)

    c12 = _window_counts_at(h, s1, 0, w_lo, w_hi)
    n12 = int(c12.sum())
    n13 = np.empty(tau.size, dtype=np.int64)
    n123 = np.empty(tau.size, dtype=np.int64)
    for i, t in enumerate(tau_ps):
        c13 = _window_counts_at(h, s2, int(t), w_lo, w_hi)
        n13[i] = int(c13.sum())
        n123[i] = int((c12 * c13).sum())
    g2 = np.full(tau.size, np.nan)
    ok = (n13 > 0) & (n12 > 0)
    g2[ok] = n123[ok] * h.size / (n12 * n13[ok].astype(float))
    return HeraldedG2(tau=tau, g2=g2, n1=h.size, n12=n12, n13=n13, n123=n123)


@dataclass(frozen=True)
class G2Curve:
    """Normalized cross-correlation of two channels on a delay grid."""

    tau: np.ndarray
    g2: np.ndarray
    pair_counts: np.ndarray
    bin_width: float

    @property
    def zero_delay(self) -> float:
        i = int(np.argmin(np.abs(self.tau)))
        return float(self.g2[i])


def unheralded_g2(stream: TimeTagStream, ch_a: int, ch_b: int, tau_grid,
                  bin_width: float | None = None) -> G2Curve:
    """Normalized cross-correlation g2(tau) of two split-arm streams.

    g2(tau) = C(tau) T / (N_a N_b w) where C(tau) counts pairs whose delay
    falls in a bin of width w centered at tau. ``bin_width`` defaults to
    the smallest tau-grid spacing.
    """
    tau = np.asarray(sorted(float(t) for t in tau_grid))
    if tau.size == 0:
        raise DomainError("tau_grid must not be empty")
    if bin_width is None:
        if tau.size < 2:
            raise DomainError("bin_width is required for a single-point tau_grid")
        bin_width = float(np.min(np.diff(tau)))
    if bin_width <= 0:
        raise DomainError("bin_width must be positive")
    a = stream.channel_timestamps(ch_a)
    b = stream.channel_timestamps(ch_b)
    w_ps = max(1, int(round(bin_width * 1e12)))
    w_lo, w_hi = w_ps // 2, w_ps - w_ps // 2
    tau_ps = np.rint(tau * 1e12).astype(np.int64)
    counts = np.empty(tau.size, dtype=np.int64)
    for i, t in enumerate(tau_ps):
        counts[i] = int(_window_counts_at(a, b, int(t), w_lo, w_hi).sum())
    norm = a.size * b.size * (w_ps * 1e-12) / stream.duration
    g2 = counts / norm if norm > 0 else np.full(tau.size, np.nan)
    return G2Curve(tau=tau, g2=g2, pair_counts=counts, bin_width=w_ps * 1e-12)


def effective_mode_number(g2_zero: float) -> float:
    """Effective mode count K = 1/(g2(0) - 1) for multi-mode thermal light."""
    if not g2_zero > 1.0:
        raise ModeNumberUndefined(f"g2(0) = {g2_zero} <= 1 has no thermal mode number")
    return 1.0 / (g2_zero - 1.0)


# ---------------------------------------------------------------------------
# Efficiency inversion and loss budget
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EfficiencyInversion:
    eta_s: float
    eta_i: float
    n_c: float                 # inferred pair generation rate


def collection_efficiency(singles_s: float, singles_i: float, coincidences: float,
                          accidentals: float, noise_fraction_s: float = 0.0,
                          noise_fraction_i: float = 0.0, dark_s: float = 0.0,
                          dark_i: float = 0.0) -> EfficiencyInversion:
    """Channel efficiencies and pair rate from singles/coincidence rates.

    Inverts the count-rate relations N_s = eta_s (N_c + R_s) + d_s,
    N_i = eta_i (N_c + R_i) + d_i, N_cc = N_c eta_s eta_i + N_ac: with the
    pair-attributed singles S_p = (N_s - d_s)(1 - f_s) and I_p likewise,
    eta_s = (C - A)/I_p, eta_i = (C - A)/S_p, N_c = S_p I_p / (C - A).
    """
    if not 0.0 <= noise_fraction_s < 1.0 or not 0.0 <= noise_fraction_i < 1.0:
        raise DomainError("noise fractions must be in [0, 1)")
    if coincidences <= accidentals:
        raise NoTrueCoincidences(
            f"coincidences {coincidences} do not exceed accidentals {accidentals}")
    s_p = (singles_s - dark_s) * (1.0 - noise_fraction_s)
    i_p = (singles_i - dark_i) * (1.0 - noise_fraction_i)
    if s_p <= 0 or i_p <= 0:
        raise DomainError("dark-subtracted pair-attributed singles must be positive")
    true_cc = coincidences - accidentals
    return EfficiencyInversion(eta_s=true_cc / i_p, eta_i=true_cc / s_p,
                               n_c=s_p * i_p / true_cc)


@dataclass(frozen=True)
class EfficiencyBudget:
    """Loss stack-up: total = emission probability through the dB losses."""

    coupling_db: float
    transmission_db: float
    detection_db: float
    emission_probability: float
    total_efficiency: float

    def __post_init__(self) -> None:
        expected = self.emission_probability * 10.0 ** (
            -(self.coupling_db + self.transmission_db + self.detection_db) / 10.0)
        if abs(self.total_efficiency - expected) > 1e-12 * max(expected, 1e-300):
            raise DomainError("total_efficiency inconsistent with its factors")


def loss_budget(coupling_db: float, transmission_db: float, detection_db: float,
                emission_probability: float) -> EfficiencyBudget:
    """Forward loss budget: emission probability through three dB losses."""
    if min(coupling_db, transmission_db, detection_db) < 0:
        raise DomainError("dB losses must be >= 0")
    if not 0.0 < emission_probability <= 1.0:
        raise DomainError("emission_probability must be in (0, 1]")
    total = emission_probability * 10.0 ** (-(coupling_db + transmission_db + detection_db) / 10.0)
    return EfficiencyBudget(coupling_db=coupling_db, transmission_db=transmission_db,
                            detection_db=detection_db,
                            emission_probability=emission_probability,
                            total_efficiency=total)


def infer_emission_probability(total_efficiency: float, coupling_db: float,
                               transmission_db: float, detection_db: float) -> float:
    """Back out the cavity emission probability from a measured total efficiency."""
    if min(coupling_db, transmission_db, detection_db) < 0:
        raise DomainError("dB losses must be >= 0")
    if not 0.0 < total_efficiency <= 1.0:
        raise DomainError("total_efficiency must be in (0, 1]")
    p = total_efficiency / 10.0 ** (-(coupling_db + transmission_db + detection_db) / 10.0)
    if not 0.0 < p <= 1.0:
        raise InconsistentBudget(
            f"inferred emission probability {p:.4f} outside (0, 1]")
    return p


# ---------------------------------------------------------------------------
# Two-photon interference visibility and CHSH
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VisibilityFit:
    """Sinusoidal fringe fit C(phi) = C0 (1 + V cos(phi - phi0))."""

    v_raw: float
    v_raw_sigma: float
    v_subtracted: float
    v_subtracted_sigma: float
    c0: float
    phi0: float


def _fringe(phi, c0, v, phi0):
    return c0 * (1.0 + v * np.cos(phi - phi0))


def _fit_fringe(phi: np.ndarray, y: np.ndarray, sigma: np.ndarray):
    c0 = max(float(np.mean(y)), 1e-9)
    spread = float(y.max() - y.min()) / max(float(y.max() + y.min()), 1e-9)
    p0 = [c0, min(max(spread, 0.05), 0.99), float(phi[int(np.argmax(y))])]
    try:
        popt, pcov = curve_fit(
            _fringe, phi, y, p0=p0, sigma=sigma, absolute_sigma=True,
            bounds=([0.0, 0.0, -2.0 * np.pi], [np.inf, 1.5, 2.0 * np.pi]),
            maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitDiverged(f"visibility fit failed: {exc}") from exc
    if not np.all(np.isfinite(popt)) or not np.all(np.isfinite(np.diag(pcov))):
        raise FitDiverged("visibility fit covariance is not finite")
    return popt, np.sqrt(np.diag(pcov))


def fit_visibility(phase_scan) -> VisibilityFit:
    """Raw and accidental-subtracted fringe visibility of a phase scan.

    ``phase_scan`` holds (phase_rad, coincidences, accidentals) rows; the
    fit is Poisson-weighted nonlinear least squares, and the subtracted
    variant fits coincidences minus accidentals with combined Poisson
    errors. Callers should span at least one full fringe with >= 5 points.
    """
    scan = np.asarray(phase_scan, dtype=float)
    if scan.ndim != 2 or scan.shape[1] != 3:
        raise DomainError("phase_scan must be (phase, coincidences, accidentals) rows")
    if scan.shape[0] < 5:
        raise InsufficientData("need at least 5 phase points")
    phi, c, acc = scan[:, 0], scan[:, 1], scan[:, 2]

    popt_raw, perr_raw = _fit_fringe(phi, c, np.sqrt(np.maximum(c, 1.0)))
    popt_sub, perr_sub = _fit_fringe(phi, c - acc, np.sqrt(np.maximum(c + acc, 1.0)))
    return VisibilityFit(
        v_raw=float(popt_raw[1]),
        v_raw_sigma=float(perr_raw[1]),
        v_subtracted=float(popt_sub[1]),
        v_subtracted_sigma=float(perr_sub[1]),
        c0=float(popt_raw[0]),
        phi0=float(popt_raw[2]),
    )


CLASSICAL_VISIBILITY_BOUND = 1.0 / SQRT2


@dataclass(frozen=True)
class BellResult:
    """CHSH parameter derived from a fringe visibility: S = 2 sqrt(2) V."""

    visibility: float
    visibility_sigma: float
    s_value: float
    s_sigma: float
    violation_sigmas: float
    classical_visibility_bound: float = CLASSICAL_VISIBILITY_BOUND

    def __post_init__(self) -> None:
        if abs(self.s_value - 2.0 * SQRT2 * self.visibility) > 1e-12:
            raise DomainError("s_value must equal 2*sqrt(2)*visibility")


def chsh_from_visibility(v: float, v_sigma: float) -> BellResult:
    """Bell parameter and violation significance from a visibility.

    S = 2 sqrt(2) V with sigma_S = 2 sqrt(2) sigma_V; the violation is
    (S - 2)/sigma_S standard deviations. V = 1/sqrt(2) sits exactly on the
    classical bound S = 2.
    """
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"visibility must be in [0, 1], got {v}")
    if v_sigma < 0:
        raise DomainError("visibility sigma must be >= 0")
    s = 2.0 * SQRT2 * v
    s_sigma = 2.0 * SQRT2 * v_sigma
    if s_sigma > 0:
        violation = (s - 2.0) / s_sigma
    else:
        violation = math.inf if s > 2.0 else (0.0 if s == 2.0 else -math.inf)
    return BellResult(visibility=v, visibility_sigma=v_sigma, s_value=s,
                      s_sigma=s_sigma, violation_sigmas=violation)


# ---------------------------------------------------------------------------
# Monte Carlo uncertainty
# ---------------------------------------------------------------------------

def monte_carlo_uncertainty(estimator, data, trials: int = 1000,
                            seed: int = 0) -> np.ndarray:
    """Per-parameter standard deviations by Poisson resampling of raw counts.

    ``data`` is an array of counts (or a dict of such arrays); each trial
    replaces every count with a Poisson draw of that mean and re-runs
    ``estimator``, which must return a parameter vector (or scalar).
    Raises UnstableEstimate when more than 10% of trials fail.
    """
    if trials < 2:
        raise DomainError("trials must be >= 2")
    rng = np.random.default_rng(seed)

    def resample(d):
        if isinstance(d, dict):
            return {k: rng.poisson(np.asarray(v, dtype=float)) for k, v in d.items()}
        return rng.poisson(np.asarray(d, dtype=float))

    results = []
    failures = 0
    for _ in range(trials):
        try:
            params = estimator(resample(data))
        except Exception:
            failures += 1
            continue
        results.append(np.atleast_1d(np.asarray(params, dtype=float)))
    if failures > 0.1 * trials:
        raise UnstableEstimate(f"{failures}/{trials} resampling trials failed")
    stacked = np.vstack(results)
    return stacked.std(axis=0, ddof=1)

"""Monte Carlo generation of detection time-tag streams.

Photon-number statistics use discrete coherence slots: the time axis is cut
into slots of width tau_c/ln 2 and the pair number in each slot is a sum of
K independent Bose-Einstein draws with mean mu_slot/K, which makes the
unheralded autocorrelation read 1 + 1/K at zero delay exactly in
expectation. Idler photons carry the slot-center timestamp; each signal
photon adds its own double-exponential delay of FWHM tau_c, so the
signal-idler coincidence peak reproduces the configured correlation width
while heralding on the idler conditions the split signal photons
independently (the anti-bunching floor of a heralded measurement is then
set by the pair statistics, not by herald timing).

All randomness flows from the single ``seed`` argument through
``numpy.random.SeedSequence(seed).spawn``: one child generator per purpose,
in the fixed order pairs, pair_timing, noise_signal, noise_idler,
detector_0, detector_1, detector_2, routing. Identical inputs therefore
give bit-identical streams regardless of which channels are later
inspected.

Channel layout: pair source and Franson streams use 0=signal, 1=idler;
the heralded-HBT stream uses 0=herald (idler), 1=signal1, 2=signal2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, DomainError, EventCapExceeded
from .tags import MAX_RECORDS, TimeTagStream

_RNG_PURPOSES = ("pairs", "pair_timing", "noise_signal", "noise_idler",
                 "detector_0", "detector_1", "detector_2", "routing")

# Slot width = tau_c / ln 2 so the double-exponential pair delay has FWHM tau_c.
SLOT_WIDTH_FACTOR = 1.0 / math.log(2.0)


def _spawn_rngs(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(len(_RNG_PURPOSES))
    return {name: np.random.default_rng(child)
            for name, child in zip(_RNG_PURPOSES, children)}


@dataclass(frozen=True)
class SourceModel:
    """Stochastic model of the pair source.

    ``pair_rate_quadratic_coeff`` (pairs/s/mW^2) gives the emitted pair
    rate a*P^2 at pump power P; when it is None the fixed
    ``emitted_pair_rate`` is used instead. ``noise_rate_linear_coeff``
    holds the per-channel linear noise coefficients (signal, idler) in
    counts/s/mW. ``correlation_fwhm`` is the signal-idler coincidence peak
    width tau_c and ``thermal_mode_count`` the effective mode number K.
    """

    emitted_pair_rate: float = 0.0
    pair_rate_quadratic_coeff: float | None = None
    noise_rate_linear_coeff: tuple[float, float] = (0.0, 0.0)
    correlation_fwhm: float = 1.64e-9
    thermal_mode_count: int = 1

    def __post_init__(self) -> None:
        if self.emitted_pair_rate < 0:
            raise DomainError("emitted_pair_rate must be >= 0")
        if self.pair_rate_quadratic_coeff is not None and self.pair_rate_quadratic_coeff < 0:
            raise DomainError("pair_rate_quadratic_coeff must be >= 0")
        if any(b < 0 for b in self.noise_rate_linear_coeff):
            raise DomainError("noise coefficients must be >= 0")
        if not self.correlation_fwhm > 0:
            raise DomainError("correlation_fwhm must be positive")
        if self.thermal_mode_count < 1:
            raise DomainError("thermal_mode_count must be >= 1")

    def pair_rate(self, pump_mw: float) -> float:
        if self.pair_rate_quadratic_coeff is not None:
            return self.pair_rate_quadratic_coeff * pump_mw * pump_mw
        return self.emitted_pair_rate

    def noise_rates(self, pump_mw: float) -> tuple[float, float]:
        bs, bi = self.noise_rate_linear_coeff
        return bs * pump_mw, bi * pump_mw


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector: efficiency, darks, timing jitter, dead time."""

    efficiency: float = 1.0
    dark_rate: float = 0.0        # counts/s
    jitter_sigma: float = 0.0     # s
    dead_time: float = 50e-9      # s, non-paralyzable

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if self.dark_rate < 0 or self.jitter_sigma < 0 or self.dead_time < 0:
            raise DomainError("dark_rate, jitter_sigma and dead_time must be >= 0")

    @classmethod
    def ideal(cls) -> "DetectorModel":
        return cls(efficiency=1.0, dark_rate=0.0, jitter_sigma=0.0, dead_time=0.0)


@dataclass(frozen=True)
class FransonConfig:
    """Unbalanced-interferometer settings for two-photon interference.

    ``umi_delay`` is the long-short path delay (must exceed the pair
    correlation width for valid post-selection), ``phase_alpha`` and
    ``phase_beta`` the interferometer phases, and ``intrinsic_visibility``
    the modeled interference contrast. Folded operation sends both photons
    through one interferometer, so the modulation phase is 2*alpha instead
    of alpha + beta.
    """

    umi_delay: float = 10e-9
    phase_alpha: float = 0.0
    phase_beta: float = 0.0
    folded: bool = False
    intrinsic_visibility: float = 1.0

    def __post_init__(self) -> None:
        if not self.umi_delay > 0:
            raise DomainError("umi_delay must be positive")
        if not 0.0 <= self.intrinsic_visibility <= 1.0:
            raise DomainError("intrinsic_visibility must be in [0, 1]")

    @property
    def total_phase(self) -> float:
        return 2.0 * self.phase_alpha if self.folded else self.phase_alpha + self.phase_beta


def coincidence_fwhm_from_linewidth(linewidth_hz: float) -> float:
    """Empirical helper tau_c = 1/(pi * linewidth) relating the coincidence
    peak width to the cavity linewidth; a convenience, not asserted physics."""
    if linewidth_hz <= 0:
        raise DomainError("linewidth must be positive")
    return 1.0 / (math.pi * linewidth_hz)


@njit(cache=True)
def _dead_time_prune(ts: np.ndarray, dead_ps: np.int64) -> np.ndarray:
    out = np.empty_like(ts)
    k = 0
    last = np.int64(-1) - dead_ps
    for i in range(ts.size):
        if ts[i] - last >= dead_ps:
            out[k] = ts[i]
            k += 1
            last = ts[i]
    return out[:k]


def _pair_slots(n_slots: int, mu_slot: float, mode_count: int,
                rng: np.random.Generator) -> np.ndarray:
    """Slot index of every generated pair (sorted, one entry per pair).

    Sampled sparsely: per thermal mode, occupied slots come from geometric
    gaps with P(occupied) = mu'/(1+mu') and the pair count of an occupied
    slot is geometric on {1, 2, ...}, which reproduces a Bose-Einstein slot
    occupation of mean mu' = mu_slot/K per mode.
    """
    if n_slots <= 0 or mu_slot <= 0:
        return np.empty(0, dtype=np.int64)
    mu = mu_slot / mode_count
    p_occ = mu / (1.0 + mu)
    parts = []
    for _ in range(mode_count):
        est = int(n_slots * p_occ * 1.2) + 128
        gaps = rng.geometric(p_occ, size=est)
        idx = np.cumsum(gaps) - 1
        while idx[-1] < n_slots:
            more = rng.geometric(p_occ, size=est // 4 + 64)
            idx = np.concatenate([idx, idx[-1] + np.cumsum(more)])
        idx = idx[idx < n_slots]
        counts = rng.geometric(1.0 - p_occ, size=idx.size)
        parts.append(np.repeat(idx, counts))
    slots = np.concatenate(parts)
    slots.sort(kind="stable")
    return slots.astype(np.int64)


def _laplace_delay_ps(fwhm_s: float, size: int, rng: np.random.Generator) -> np.ndarray:
    scale_ps = fwhm_s * 1e12 / (2.0 * math.log(2.0))
    return np.rint(rng.laplace(0.0, scale_ps, size=size)).astype(np.int64)


def _uniform_events_ps(rate: float, duration_s: float, duration_ps: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Poisson process of the given rate as sorted integer-ps timestamps."""
    if rate <= 0:
        return np.empty(0, dtype=np.int64)
    n = rng.poisson(rate * duration_s)
    ts = rng.integers(0, duration_ps + 1, size=n, dtype=np.int64)
    ts.sort()
    return ts


def _detect(photon_ts: np.ndarray, det: DetectorModel, duration_s: float,
            duration_ps: int, rng: np.random.Generator) -> np.ndarray:
    """Apply one detector chain: thinning, jitter, darks, dead time."""
    ts = photon_ts
    if det.efficiency < 1.0:
        ts = ts[rng.random(ts.size) < det.efficiency]
    if det.jitter_sigma > 0.0 and ts.size:
        ts = ts + np.rint(rng.normal(0.0, det.jitter_sigma * 1e12, size=ts.size)).astype(np.int64)
    ts = ts[(ts >= 0) & (ts <= duration_ps)]
    darks = _uniform_events_ps(det.dark_rate, duration_s, duration_ps, rng)
    if darks.size:
        ts = np.concatenate([ts, darks])
    ts = np.sort(ts)
    if det.dead_time > 0.0 and ts.size:
        ts = _dead_time_prune(ts, np.int64(round(det.dead_time * 1e12)))
    return ts


def _check_cap(*arrays) -> None:
    total = sum(a.size for a in arrays)
    if total > MAX_RECORDS:
        raise EventCapExceeded(f"simulation would emit {total} records (cap {MAX_RECORDS})")


def _pair_times(source: SourceModel, pump_mw: float, duration: float,
                rngs) -> tuple[np.ndarray, np.ndarray, int]:
    """Raw (signal, idler) pair emission times in ps, plus duration_ps."""
    if duration <= 0:
        raise DomainError("duration must be positive")
    slot_ps = max(1, int(round(source.correlation_fwhm * SLOT_WIDTH_FACTOR * 1e12)))
    duration_ps = int(round(duration * 1e12))
    n_slots = duration_ps // slot_ps
    mu_slot = source.pair_rate(pump_mw) * slot_ps * 1e-12
    if 2.0 * mu_slot * n_slots > MAX_RECORDS:
        raise EventCapExceeded(
            f"expected ~{2 * mu_slot * n_slots:.2e} pair tags exceed the cap of {MAX_RECORDS}")
    slots = _pair_slots(n_slots, mu_slot, source.thermal_mode_count, rngs["pairs"])
    idler = slots * slot_ps + slot_ps // 2
    signal = idler + _laplace_delay_ps(source.correlation_fwhm, slots.size, rngs["pair_timing"])
    return signal, idler, duration_ps


def simulate_pair_source(source: SourceModel, det_signal: DetectorModel,
                         det_idler: DetectorModel, pump_mw: float,
                         duration: float, seed: int) -> TimeTagStream:
    """Two-channel pair-source stream: channel 0 = signal, 1 = idler.

    Pairs are emitted with the thermal slot statistics of ``source``;
    independent Poisson noise photons at the linear-in-pump channel rates
    and detector darks are superimposed, and each channel passes through
    its detector model. Deterministic for fixed inputs and seed.
    """
    rngs = _spawn_rngs(seed)
    sig, idl, duration_ps = _pair_times(source, pump_mw, duration, rngs)
    rate_s, rate_i = source.noise_rates(pump_mw)
    noise_s = _uniform_events_ps(rate_s, duration, duration_ps, rngs["noise_signal"])
    noise_i = _uniform_events_ps(rate_i, duration, duration_ps, rngs["noise_idler"])
    _check_cap(sig, idl, noise_s, noise_i)

    ch_signal = _detect(np.concatenate([sig, noise_s]), det_signal,
                        duration, duration_ps, rngs["detector_0"])
    ch_idler = _detect(np.concatenate([idl, noise_i]), det_idler,
                       duration, duration_ps, rngs["detector_1"])
    return TimeTagStream.from_channel_arrays(
        {0: ch_signal, 1: ch_idler}, duration=duration, seed=seed)


def split_channel(stream: TimeTagStream, channel: int, splitter_ratio: float = 0.5,
                  seed: int = 0) -> TimeTagStream:
    """Send one channel of a stream through a passive beam splitter.

    Models the plain (non-heralded) HBT arrangement used for spectral-purity
    measurements: every tag of ``channel`` is routed to output 0 with
    probability ``splitter_ratio``, otherwise to output 1. Detector effects
    are assumed to have been applied already.
    """
    if not 0.0 < splitter_ratio <= 1.0:
        raise DomainError(f"splitter_ratio must be in (0, 1], got {splitter_ratio}")
    ts = stream.channel_timestamps(channel)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    to_first = rng.random(ts.size) < splitter_ratio
    return TimeTagStream.from_channel_arrays(
        {0: ts[to_first], 1: ts[~to_first]}, duration=stream.duration, seed=seed)


def simulate_hbt(source: SourceModel, det_idler: DetectorModel,
                 det_s1: DetectorModel, det_s2: DetectorModel,
                 splitter_ratio: float = 0.5, pump_mw: float = 1.0,
                 duration: float = 1.0, seed: int = 0) -> TimeTagStream:
    """Heralded HBT stream: channel 0 = herald (idler), 1 and 2 = split signal.

    Every surviving signal photon is routed to signal1 with probability
    ``splitter_ratio``, otherwise to signal2; signal-channel noise photons
    take the same splitter.
    """
    if not 0.0 < splitter_ratio <= 1.0:
        raise DomainError(f"splitter_ratio must be in (0, 1], got {splitter_ratio}")
    rngs = _spawn_rngs(seed)
    sig, idl, duration_ps = _pair_times(source, pump_mw, duration, rngs)
    rate_s, rate_i = source.noise_rates(pump_mw)
    noise_s = _uniform_events_ps(rate_s, duration, duration_ps, rngs["noise_signal"])
    noise_i = _uniform_events_ps(rate_i, duration, duration_ps, rngs["noise_idler"])
    _check_cap(sig, idl, noise_s, noise_i)

    before_bs = np.concatenate([sig, noise_s])
    to_s1 = rngs["routing"].random(before_bs.size) < splitter_ratio
    ch1 = _detect(before_bs[to_s1], det_s1, duration, duration_ps, rngs["detector_1"])
    ch2 = _detect(before_bs[~to_s1], det_s2, duration, duration_ps, rngs["detector_2"])
    ch0 = _detect(np.concatenate([idl, noise_i]), det_idler,
                  duration, duration_ps, rngs["detector_0"])
    return TimeTagStream.from_channel_arrays(
        {0: ch0, 1: ch1, 2: ch2}, duration=duration, seed=seed)


def simulate_franson(source: SourceModel, config: FransonConfig,
                     det_signal: DetectorModel, det_idler: DetectorModel,
                     pump_mw: float, duration: float, seed: int) -> TimeTagStream:
    """Two-photon interference stream behind unbalanced interferometers.

    Each photon independently takes the short or long arm (probability 1/2,
    long adds the UMI delay). Same-arm pairs form the central coincidence
    peak and are kept with probability (1 + V cos(phase))/2 where the phase
    is alpha + beta (unfolded) or 2*alpha (folded); a rejected pair's
    photons are re-emitted at independent uniform times, which removes the
    correlation while leaving both singles rates exactly phase-independent.
    Mixed-arm pairs form the unmodulated side peaks at +/- the UMI delay.
    """
    if config.umi_delay <= source.correlation_fwhm:
        raise ConfigError(
            f"umi_delay {config.umi_delay} must exceed correlation_fwhm "
            f"{source.correlation_fwhm} for valid post-selection")
    rngs = _spawn_rngs(seed)
    sig, idl, duration_ps = _pair_times(source, pump_mw, duration, rngs)
    dt_ps = np.int64(round(config.umi_delay * 1e12))

    route = rngs["routing"]
    arm_s = route.random(sig.size) < 0.5
    arm_i = route.random(sig.size) < 0.5
    same = arm_s == arm_i
    accept_p = 0.5 * (1.0 + config.intrinsic_visibility * math.cos(config.total_phase))
    rejected = same & (route.random(sig.size) >= accept_p)

    sig = sig + arm_s * dt_ps
    idl = idl + arm_i * dt_ps
    n_rej = int(np.count_nonzero(rejected))
    if n_rej:
        sig[rejected] = route.integers(0, duration_ps + 1, size=n_rej, dtype=np.int64)
        idl[rejected] = route.integers(0, duration_ps + 1, size=n_rej, dtype=np.int64)

    rate_s, rate_i = source.noise_rates(pump_mw)
    noise_s = _uniform_events_ps(rate_s, duration, duration_ps, rngs["noise_signal"])
    noise_i = _uniform_events_ps(rate_i, duration, duration_ps, rngs["noise_idler"])
    _check_cap(sig, idl, noise_s, noise_i)

    ch_signal = _detect(np.concatenate([sig, noise_s]), det_signal,
                        duration, duration_ps, rngs["detector_0"])
    ch_idler = _detect(np.concatenate([idl, noise_i]), det_idler,
                       duration, duration_ps, rngs["detector_1"])
    return TimeTagStream.from_channel_arrays(
        {0: ch_signal, 1: ch_idler}, duration=duration, seed=seed)

"""ITU-grid channel arithmetic, energy-conserving channel pairing, and comb
synthesis from dispersion parameters.

Channels live on the standard 100 GHz grid anchored at 190.0 THz, so channel
n sits at 190.0 THz + n * 100 GHz. A device with a 200 GHz free spectral
range occupies every second channel, which is expressed as a grid step of 2
channels rather than a separate grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as C_VACUUM

from .errors import DomainError

ITU_ANCHOR_HZ = 190.0e12
ITU_STEP_HZ = 100.0e9
DEFAULT_CHANNEL_BOUNDS = (1, 72)


@dataclass(frozen=True)
class ItuChannel:
    """One C-band grid channel: index, center frequency, center wavelength."""

    index: int
    center_frequency: float
    center_wavelength: float

    def __post_init__(self) -> None:
        f = ITU_ANCHOR_HZ + self.index * ITU_STEP_HZ
        if abs(self.center_frequency - f) > 1e-6:
            raise DomainError(f"channel C{self.index} frequency must be {f}")
        lam = C_VACUUM / f
        if abs(self.center_wavelength - lam) > 1e-12 * lam:
            raise DomainError("center_wavelength must equal c / center_frequency")

    @classmethod
    def from_index(cls, index: int,
                   bounds: tuple[int, int] = DEFAULT_CHANNEL_BOUNDS) -> "ItuChannel":
        lo, hi = bounds
        if not lo <= index <= hi:
            raise DomainError(f"channel C{index} outside band C{lo}..C{hi}")
        f = ITU_ANCHOR_HZ + index * ITU_STEP_HZ
        return cls(index=index, center_frequency=f, center_wavelength=C_VACUUM / f)


def channel_to_wavelength(index: int,
                          bounds: tuple[int, int] = DEFAULT_CHANNEL_BOUNDS) -> float:
    """Center wavelength in meters of grid channel ``index``."""
    return ItuChannel.from_index(index, bounds).center_wavelength


def wavelength_to_channel(wavelength: float,
                          bounds: tuple[int, int] = DEFAULT_CHANNEL_BOUNDS
                          ) -> tuple[int, float]:
    """Nearest grid channel to a wavelength, plus the frequency offset.

    Returns (channel index, offset in Hz) where offset is the input's
    frequency minus the channel center (zero when exactly on grid).
    """
    if wavelength <= 0:
        raise DomainError("wavelength must be positive")
    f = C_VACUUM / wavelength
    index = round((f - ITU_ANCHOR_HZ) / ITU_STEP_HZ)
    lo, hi = bounds
    if not lo <= index <= hi:
        raise DomainError(
            f"wavelength {wavelength * 1e9:.2f} nm maps to C{index}, outside C{lo}..C{hi}")
    return index, f - (ITU_ANCHOR_HZ + index * ITU_STEP_HZ)


def pair_channels(pump_index: int, order: int, grid_step_channels: int = 2,
                  bounds: tuple[int, int] = DEFAULT_CHANNEL_BOUNDS
                  ) -> tuple[ItuChannel, ItuChannel]:
    """Signal/idler channel pair of a given comb order around the pump.

    Energy conservation on a uniform grid puts the pair symmetrically at
    pump -/+ order * step, so signal + idler indices always sum to twice
    the pump index.
    """
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    if grid_step_channels < 1:
        raise DomainError("grid_step_channels must be >= 1")
    signal = ItuChannel.from_index(pump_index - grid_step_channels * order, bounds)
    idler = ItuChannel.from_index(pump_index + grid_step_channels * order, bounds)
    return signal, idler


@dataclass(frozen=True)
class CombLine:
    """One cavity resonance of the synthesized comb."""

    mode_index: int
    frequency: float
    itu_channel: ItuChannel | None = None
    correlated: bool = False

    @property
    def wavelength(self) -> float:
        return C_VACUUM / self.frequency


def synthesize_comb(omega0: float, d1: float, d2: float, half_count: int,
                    correlated_orders: tuple[int, ...] = (),
                    bounds: tuple[int, int] = DEFAULT_CHANNEL_BOUNDS) -> list[CombLine]:
    """Comb lines omega_mu = omega0 + D1 mu + (D2/2) mu^2 for |mu| <= half_count.

    Inputs are angular (rad/s); line frequencies are returned in Hz. Lines
    that land within a quarter grid step of an in-band ITU channel get that
    channel attached. ``correlated_orders`` marks which |mu| carry
    correlated pairs (data-driven, never assumed).
    """
    if half_count < 1:
        raise DomainError("half_count must be >= 1")
    if omega0 <= 0:
        raise DomainError("omega0 must be positive")
    lines = []
    marked = {abs(int(o)) for o in correlated_orders}
    for mu in range(-half_count, half_count + 1):
        omega = omega0 + d1 * mu + 0.5 * d2 * mu * mu
        f = omega / (2.0 * math.pi)
        chan = None
        idx = round((f - ITU_ANCHOR_HZ) / ITU_STEP_HZ)
        if bounds[0] <= idx <= bounds[1]:
            center = ITU_ANCHOR_HZ + idx * ITU_STEP_HZ
            if abs(f - center) <= ITU_STEP_HZ / 4.0:
                chan = ItuChannel.from_index(idx, bounds)
        lines.append(CombLine(
            mode_index=mu,
            frequency=f,
            itu_channel=chan,
            correlated=(mu != 0 and abs(mu) in marked),
        ))
    return lines


def predicted_jsi(pairs, weights=None) -> np.ndarray:
    """Joint spectral intensity over energy-matched channel pairs.

    ``pairs`` is a list of (signal, idler) lines; the JSI of a single-pump
    cavity source is diagonal, so entry (i, j) is nonzero only for i == j.
    ``weights`` optionally scales each diagonal cell (e.g. by a sinc^2
    brightness factor); the default is binary presence.
    """
    n = len(pairs)
    jsi = np.zeros((n, n))
    if weights is None:
        np.fill_diagonal(jsi, 1.0)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,):
            raise DomainError(f"weights must have shape ({n},)")
        np.fill_diagonal(jsi, w)
    return jsi


def write_comb_csv(lines: list[CombLine], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode_index", "frequency_hz", "wavelength_nm", "itu_channel", "correlated"])
        for ln in lines:
            w.writerow([
                ln.mode_index,
                repr(ln.frequency),
                repr(ln.wavelength * 1e9),
                "" if ln.itu_channel is None else ln.itu_channel.index,
                int(ln.correlated),
            ])


def write_jsi_csv(jsi: np.ndarray, pairs, path) -> None:
    """JSI matrix as CSV with channel-pair headers on both axes."""
    labels = [f"C{s.index}&C{i.index}" for s, i in pairs]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["signal\\idler"] + labels)
        for lab, row in zip(labels, jsi):
            w.writerow([lab] + [repr(float(v)) for v in row])

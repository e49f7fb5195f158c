"""Shared fixtures: the reference device from the measured over-coupled ring."""

import math

import pytest
from scipy.constants import c

from ringpair import ModeProperties, PumpConfig, QualityFactors, RingGeometry

# Reference device: 113 um radius Si3N4 ring, TE00 at 1540.5 nm.
PUMP_WAVELENGTH = 1540.5e-9
GROUP_VELOCITY = 1.42e8
RADIUS = 113e-6
GAMMA = 0.88                  # 1/(W m)
A_EFF = 1.16e-12              # m^2
N_EFF = 1.85
BETA2 = -0.88e-25             # s^2/m
Q_INTRINSIC = 3.5e6
Q_EXTERNAL = 1.4e6


def make_mode(gamma: float = GAMMA) -> ModeProperties:
    """Mode with an exact nonlinear coefficient (n2 back-solved from gamma)."""
    n_g = c / GROUP_VELOCITY
    n2 = gamma * PUMP_WAVELENGTH * A_EFF / (2.0 * math.pi)
    return ModeProperties.from_waveguide(
        n_eff=N_EFF, n_g=n_g, a_eff=A_EFF, n2=n2, beta2=BETA2,
        ref_wavelength=PUMP_WAVELENGTH)


@pytest.fixture
def device_mode() -> ModeProperties:
    return make_mode()


@pytest.fixture
def device_geometry() -> RingGeometry:
    return RingGeometry.from_radius(RADIUS)


@pytest.fixture
def device_q() -> QualityFactors:
    return QualityFactors.from_intrinsic_external(Q_INTRINSIC, Q_EXTERNAL)


@pytest.fixture
def device_pump() -> PumpConfig:
    return PumpConfig(power=1e-3, wavelength=PUMP_WAVELENGTH)

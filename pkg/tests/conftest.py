"""Shared fixtures.

The coefficient tables dominate suite runtime, so every spec/table pair
used by more than one module is built once per session here.
"""
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qbmsim import build_coefficient_table
from qbmsim.spectral import ReservoirSpec

settings.register_profile(
    "suite", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")

TWO_PERIODS = 4.0 * np.pi


@pytest.fixture(scope="session")
def spec_scaled():
    # working units omega0 = 1 rad/s; strong enough coupling for visible
    # structure, flat cutoff, k_B T = 10 hbar omega0
    return ReservoirSpec.from_kt(omega0=1.0, alpha=0.1, omega_c=10.0,
                                 kt=10.0)


@pytest.fixture(scope="session")
def table_scaled(spec_scaled):
    return build_coefficient_table(spec_scaled, 4.0, 512)


@pytest.fixture(scope="session")
def spec_lindblad():
    return ReservoirSpec.from_kt(omega0=1.0, alpha=0.05, omega_c=10.0,
                                 kt=10.0)


@pytest.fixture(scope="session")
def table_lindblad(spec_lindblad):
    # two periods plus slack so interpolation never hits the table edge
    return build_coefficient_table(spec_lindblad, TWO_PERIODS + 0.1, 1024)


@pytest.fixture(scope="session")
def spec_nonlindblad():
    return ReservoirSpec.from_kt(omega0=1.0, alpha=0.05, omega_c=0.1,
                                 kt=10.0)


@pytest.fixture(scope="session")
def table_nonlindblad(spec_nonlindblad):
    return build_coefficient_table(spec_nonlindblad, TWO_PERIODS + 0.1,
                                   1024)

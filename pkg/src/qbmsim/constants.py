"""Physical constants (SI) and unit conversions.

Internally everything runs in angular-frequency units with hbar = 1: energies,
temperatures and rates are all rad/s.  Only the conversion from laboratory
units (kelvin, Hz) happens here.
"""

# 2019 SI exact value
BOLTZMANN_J_PER_K = 1.380649e-23
# CODATA 2018
HBAR_J_S = 1.054571817e-34

# k_B/hbar in rad/(s K)
KB_OVER_HBAR = BOLTZMANN_J_PER_K / HBAR_J_S

TWO_PI = 6.283185307179586


def kelvin_to_angular(temperature_k: float) -> float:
    """k_B T / hbar in rad/s for a temperature in kelvin."""
    if temperature_k < 0.0:
        raise ValueError("temperature must be >= 0 K")
    return KB_OVER_HBAR * temperature_k


def angular_to_kelvin(kt_rad_per_s: float) -> float:
    """Inverse of kelvin_to_angular."""
    return kt_rad_per_s / KB_OVER_HBAR


def hertz_to_angular(f_hz: float) -> float:
    return TWO_PI * f_hz

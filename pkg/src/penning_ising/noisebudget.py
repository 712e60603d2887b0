"""Detection-noise and dephasing error budgets.

All ratios are relative to the projection-noise angle variance 1/N.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .counting import dephasing_variance
from .errors import ConfigError
from .model import BE9_MASS, HBAR


@dataclass(frozen=True)
class DetectionConfig:
    k_photons: float  # photons collected per bright ion
    classical_noise_fraction: float = 0.0  # reported only, never subtracted

    def __post_init__(self):
        if not self.k_photons > 0:
            raise ConfigError("k_photons must be > 0")
        if self.classical_noise_fraction < 0:
            raise ConfigError("classical_noise_fraction must be >= 0")


def shot_noise_variance(n, detection: DetectionConfig) -> float:
    """Photon shot-noise variance m/K^2 with m = N K / 2 (equatorial state)."""
    return 0.5 * n / detection.k_photons


def shot_to_projection_ratio(detection: DetectionConfig) -> float:
    """Shot noise N/(2K) over projection noise N/4."""
    return 2.0 / detection.k_photons


def to_db(ratio):
    return 10.0 * np.log10(ratio)


def total_variance_model(spin_variance, n, detection: DetectionConfig) -> float:
    """Measured transverse variance: spin variance plus photon shot noise."""
    if math.isinf(detection.k_photons):
        return float(spin_variance)
    return float(spin_variance) + shot_noise_variance(n, detection)


def bfield_variance(n, tau, psi, a=2.4e-3, b=1.7e-4):
    """Field-noise contribution (N^2/4) dphi^2(tau) sin^2(psi) to Var(S_psi)."""
    return 0.25 * n ** 2 * dephasing_variance(tau, a, b) * np.sin(psi) ** 2


def zero_point_extent(omega_z, ion_mass=BE9_MASS) -> float:
    """z0 = sqrt(hbar / (2 M omega_z))."""
    if omega_z <= 0:
        raise ConfigError("omega_z must be > 0")
    return math.sqrt(HBAR / (2.0 * ion_mass * omega_z))


def displacement_parameter(f0, delta, omega_z, ion_mass=BE9_MASS) -> float:
    """F0 z0 / (hbar delta)."""
    if delta == 0:
        raise ConfigError("detuning must be nonzero")
    return f0 * zero_point_extent(omega_z, ion_mass) / (HBAR * abs(delta))


def heating_dephasing_ratio(delta_n, f0, delta, omega_z, ion_mass=BE9_MASS) -> float:
    """Echo dephasing from COM heating by ``delta_n`` quanta: dn 8 F0^2 z0^2 / (hbar delta)^2."""
    if delta_n < 0:
        raise ConfigError("delta_n must be >= 0")
    return 8.0 * delta_n * displacement_parameter(f0, delta, omega_z, ion_mass) ** 2


def freq_error_dephasing_ratio(epsilon, f0, delta, t_pi, nbar, omega_z,
                               ion_mass=BE9_MASS) -> float:
    """Residual spin-motion dephasing for a loop closing at delta tau_s = 2 pi + epsilon."""
    if nbar < 0 or t_pi < 0:
        raise ConfigError("nbar and t_pi must be >= 0")
    x2 = displacement_parameter(f0, delta, omega_z, ion_mass) ** 2
    return x2 * epsilon ** 2 * (abs(epsilon) + abs(delta) * t_pi) ** 2 * (2.0 * nbar + 1.0)


def epsilon_threshold(f0, delta, t_pi, nbar, omega_z, ion_mass=BE9_MASS, ratio=1.0) -> float:
    """Largest epsilon >= 0 keeping the frequency-error ratio below ``ratio``."""
    def f(eps):
        return freq_error_dephasing_ratio(eps, f0, delta, t_pi, nbar, omega_z, ion_mass) - ratio

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-14))


def epsilon_to_frequency_error(epsilon, delta) -> float:
    """COM frequency error (rad/s) giving phase error ``epsilon`` over tau_s = 2 pi / delta."""
    return abs(epsilon) * abs(delta) / (2.0 * math.pi)


def lattice_phase_spread(radius, misalignment_angle, delta_k=2.0 * math.pi / 0.90e-6) -> float:
    """Centre-to-edge optical-lattice phase difference delta_k R tan(dtheta)."""
    return delta_k * radius * math.tan(misalignment_angle)


def budget_table(n=100, tau=1e-3, psi=math.pi / 2, detection=DetectionConfig(15.0),
                 f0=30e-24, delta=2.0 * math.pi * 1e3, omega_z=2.0 * math.pi * 1.6e6,
                 delta_n=0.1, epsilon=0.5, t_pi=60e-6, nbar=12.0, radius=125e-6,
                 misalignment=math.radians(0.01), ion_mass=BE9_MASS):
    """Labeled rows (name, value, unit) of every budget entry at one point."""
    eps_max = epsilon_threshold(f0, delta, t_pi, nbar, omega_z, ion_mass)
    ratio = shot_to_projection_ratio(detection)
    return [
        ("shot_noise_variance", shot_noise_variance(n, detection), "spin^2"),
        ("shot_to_projection", ratio, "1"),
        ("shot_to_projection_db", float(to_db(ratio)), "dB"),
        ("classical_noise_fraction", detection.classical_noise_fraction, "1"),
        ("bfield_variance", float(bfield_variance(n, tau, psi)), "spin^2"),
        ("displacement_2f0z0_over_hbar_delta",
         2.0 * displacement_parameter(f0, delta, omega_z, ion_mass), "1"),
        ("heating_ratio", heating_dephasing_ratio(delta_n, f0, delta, omega_z, ion_mass), "1"),
        ("freq_error_ratio",
         freq_error_dephasing_ratio(epsilon, f0, delta, t_pi, nbar, omega_z, ion_mass), "1"),
        ("epsilon_threshold", eps_max, "rad"),
        ("freq_error_limit_hz", epsilon_to_frequency_error(epsilon, delta) / (2.0 * math.pi), "Hz"),
        ("lattice_phase_spread", lattice_phase_spread(radius, misalignment), "rad"),
    ]

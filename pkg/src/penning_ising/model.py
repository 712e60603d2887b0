"""Parameter records and unit conventions.

All couplings and frequencies are stored as angular frequencies (rad/s) with
hbar absorbed, times in seconds. Conversion from the Hz values used in
configuration files happens at the boundary via :func:`convert_coupling`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

import scipy.constants as const

from .errors import ConfigError, InstabilityError

HBAR = const.hbar
K_B = const.k
K_E = 1.0 / (4.0 * math.pi * const.epsilon_0)
E_CHARGE = const.elementary_charge
BE9_MASS = 9.012182 * const.atomic_mass


def _finite(name, value):
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class SpinEnsembleParams:
    """Physics input for the dissipative Ising dynamics.

    Attributes
    ----------
    n_ions : int
        Number of spins N.
    j_bar : float
        Uniform coupling in rad/s.
    gamma_el, gamma_ud, gamma_du : float
        Elastic, up->down and down->up scattering rates in 1/s.
    tau : float
        Interaction time in s.
    """

    n_ions: int
    j_bar: float = 0.0
    gamma_el: float = 0.0
    gamma_ud: float = 0.0
    gamma_du: float = 0.0
    tau: float = 0.0

    @property
    def gamma(self) -> float:
        """Total single-spin coherence decay rate."""
        return 0.5 * (self.gamma_el + self.gamma_ud + self.gamma_du)

    @property
    def gamma_asym(self) -> float:
        """Raman asymmetry (Gamma_ud - Gamma_du) / 4."""
        return 0.25 * (self.gamma_ud - self.gamma_du)

    @property
    def gamma_raman(self) -> float:
        return self.gamma_ud + self.gamma_du

    def replace(self, **changes) -> "SpinEnsembleParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return validate(SpinEnsembleParams(**values))

    def coherent(self) -> "SpinEnsembleParams":
        """Same N, coupling and time with every decoherence rate switched off."""
        return self.replace(gamma_el=0.0, gamma_ud=0.0, gamma_du=0.0)


def validate(params: SpinEnsembleParams) -> SpinEnsembleParams:
    """Return ``params`` unchanged if every invariant holds, else raise ConfigError."""
    n = params.n_ions
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ConfigError(f"n_ions must be a positive integer, got {n!r}")
    for name in ("j_bar", "gamma_el", "gamma_ud", "gamma_du", "tau"):
        _finite(name, getattr(params, name))
    for name in ("gamma_el", "gamma_ud", "gamma_du"):
        if getattr(params, name) < 0:
            raise ConfigError(f"{name} must be >= 0")
    if params.tau < 0:
        raise ConfigError("tau must be >= 0")
    return params


@dataclass(frozen=True)
class TrapConfig:
    """Penning trap in the frame rotating with the crystal (all rad/s)."""

    omega_z: float
    omega_r: float
    omega_c: float
    omega_q: float = 0.0
    ion_mass: float = BE9_MASS
    ion_charge: float = E_CHARGE

    def __post_init__(self):
        for f in fields(self):
            _finite(f.name, getattr(self, f.name))
        if self.omega_z <= 0 or self.ion_mass <= 0 or self.ion_charge == 0:
            raise ConfigError("omega_z, ion_mass must be positive and ion_charge nonzero")
        if self.omega_q < 0:
            raise ConfigError("omega_q must be >= 0")

    @classmethod
    def from_magnetic_field(cls, omega_z, omega_r, b_field, omega_q=0.0,
                            ion_mass=BE9_MASS, ion_charge=E_CHARGE):
        return cls(omega_z, omega_r, ion_charge * b_field / ion_mass, omega_q,
                   ion_mass, ion_charge)

    @property
    def beta(self) -> float:
        """Effective radial stiffness in rad^2/s^2."""
        return self.omega_r * (self.omega_c - self.omega_r) - 0.5 * self.omega_z ** 2

    def check_planar(self):
        if self.beta <= 0:
            raise InstabilityError(
                f"no radial confinement: beta = {self.beta:.4g} rad^2/s^2")
        if self.omega_q ** 2 >= self.beta:
            raise InstabilityError("rotating wall stronger than radial confinement")

    @property
    def length_scale(self) -> float:
        """(k_e q^2 / (M beta))^(1/3), the natural crystal length."""
        self.check_planar()
        return (K_E * self.ion_charge ** 2 / (self.ion_mass * self.beta)) ** (1.0 / 3.0)


@dataclass(frozen=True)
class DriveConfig:
    f0: float
    mu: float
    delta_k: float = 2.0 * math.pi / 0.90e-6

    def __post_init__(self):
        for f in fields(self):
            _finite(f.name, getattr(self, f.name))
        if self.f0 <= 0 or self.mu <= 0:
            raise ConfigError("f0 and mu must be positive")


@dataclass(frozen=True)
class MeasurementDirection:
    """Unit vector (c_x, c_y, c_z) selecting the measured spin component."""

    c_x: float
    c_y: float
    c_z: float

    def __post_init__(self):
        norm = self.c_x ** 2 + self.c_y ** 2 + self.c_z ** 2
        if not math.isfinite(norm) or abs(norm - 1.0) > 1e-12:
            raise ConfigError(f"direction must be a unit vector, |c|^2 = {norm!r}")

    @classmethod
    def tomography(cls, psi: float) -> "MeasurementDirection":
        """cos(psi) sigma^z + sin(psi) sigma^y."""
        return cls(0.0, math.sin(psi), math.cos(psi))

    @classmethod
    def rotated_tomography(cls, psi: float, theta: float) -> "MeasurementDirection":
        """Tomography direction rotated about y by ``theta``."""
        c = math.cos(psi)
        return cls(math.sin(theta) * c, math.sin(psi), math.cos(theta) * c)

    @property
    def a_plus(self) -> complex:
        """Coefficient of sigma^+ in the expansion of sigma^dir."""
        return complex(self.c_x, -self.c_y)

    @property
    def a_minus(self) -> complex:
        return complex(self.c_x, self.c_y)


def convert_coupling(j_over_h_hz: float) -> float:
    """Hz -> rad/s."""
    _finite("frequency", j_over_h_hz)
    return 2.0 * math.pi * j_over_h_hz


def to_hz(omega: float) -> float:
    """rad/s -> Hz, the inverse of :func:`convert_coupling`."""
    _finite("angular frequency", omega)
    return omega / (2.0 * math.pi)

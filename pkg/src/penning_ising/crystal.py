"""Planar Penning-trap crystals: equilibrium, axial modes and spin couplings.

Positions are solved in the rotating frame in units of
l0 = (k_e q^2 / (M beta))^(1/3), where the dimensionless potential reads

    V / (M beta l0^2) = sum_i [rho_i^2 + w (x_i^2 - y_i^2)] / 2 + sum_{i<j} 1/d_ij

with w = omega_q^2 / beta. Planar crystals have many near-degenerate minima,
so only mode statistics (not individual positions) are stable against the
seed layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ConfigError, ConvergenceError, InstabilityError, ResonanceError
from .model import HBAR, K_B, K_E, DriveConfig, TrapConfig

GRAD_TOL = 1e-9
RESONANCE_GUARD = 1e-6
ENERGY_RTOL = 1e-13  # roundoff allowance on accepted polish steps
SADDLE_TOL = 1e-6  # relative; flatter modes count as soft, not as saddles
SADDLE_KICK = 0.1
SOFT_RTOL = 1e-6  # curvature below which a mode is relaxed by slope root-finding
MAX_RESTARTS = 8


@dataclass(frozen=True)
class CrystalState:
    positions: np.ndarray  # (N, 2), metres
    potential_energy: float  # J
    trap: TrapConfig
    energy_trace: tuple = ()  # dimensionless energy per accepted step
    gradient_norm: float = 0.0  # dimensionless max-norm at the solution

    @property
    def n_ions(self) -> int:
        return len(self.positions)

    @property
    def radius(self) -> float:
        return float(np.hypot(*self.positions.T).max()) if self.n_ions else 0.0

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=-1))


@dataclass(frozen=True)
class ModeSpectrum:
    frequencies: np.ndarray  # rad/s, descending
    eigenvectors: np.ndarray  # column m is b_m
    stiffness: np.ndarray  # A in rad^2/s^2

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)


@dataclass(frozen=True)
class CouplingMatrix:
    j: np.ndarray  # rad/s, zero diagonal

    @property
    def n_ions(self) -> int:
        return self.j.shape[0]

    @property
    def j_bar_effective(self) -> float:
        n = self.n_ions
        if n < 2:
            return 0.0
        return float(self.j.sum() / (n * (n - 1)))


# --- equilibrium -------------------------------------------------------------

def _split(u):
    n = u.size // 2
    return u[:n], u[n:]


def _pair_terms(x, y):
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    r = np.hypot(dx, dy)
    np.fill_diagonal(r, np.inf)
    return dx, dy, r


def energy(u, w):
    x, y = _split(u)
    _, _, r = _pair_terms(x, y)
    return (0.5 * np.sum(x * x + y * y) + 0.5 * w * np.sum(x * x - y * y)
            + 0.5 * np.sum(1.0 / r))


def gradient(u, w):
    x, y = _split(u)
    dx, dy, r = _pair_terms(x, y)
    r3 = r ** -3
    gx = (1.0 + w) * x - np.sum(dx * r3, axis=1)
    gy = (1.0 - w) * y - np.sum(dy * r3, axis=1)
    return np.concatenate([gx, gy])


def hessian(u, w):
    x, y = _split(u)
    n = x.size
    dx, dy, r = _pair_terms(x, y)
    r3, r5 = r ** -3, r ** -5
    # off-diagonal blocks: d^2 (1/r) / d a_i d b_j = r^-3 delta_ab - 3 da db r^-5
    hxx = r3 - 3 * dx * dx * r5
    hyy = r3 - 3 * dy * dy * r5
    hxy = -3 * dx * dy * r5
    for h in (hxx, hyy, hxy):
        np.fill_diagonal(h, 0.0)
    out = np.empty((2 * n, 2 * n))
    out[:n, :n] = hxx + np.diag(1.0 + w - hxx.sum(axis=1))
    out[n:, n:] = hyy + np.diag(1.0 - w - hyy.sum(axis=1))
    out[:n, n:] = hxy - np.diag(hxy.sum(axis=1))
    out[n:, :n] = out[:n, n:].T
    return out


def triangular_seed(n, jitter=1e-3, seed=0):
    """Hexagonal-lattice patch of ``n`` sites at the expected planar density."""
    radius = (3.0 * math.pi * n / 4.0) ** (1.0 / 3.0)  # uniform-charge-disk radius
    spacing = radius * math.sqrt(2.0 * math.pi / (math.sqrt(3.0) * n)) if n > 1 else 1.0
    k = int(math.ceil(math.sqrt(n))) + 3
    i, j = np.meshgrid(np.arange(-k, k + 1), np.arange(-k, k + 1))
    pts = np.column_stack([(i + 0.5 * j).ravel(), (math.sqrt(3.0) / 2.0 * j).ravel()])
    order = np.lexsort((np.arctan2(pts[:, 1], pts[:, 0]), np.hypot(*pts.T)))
    pts = pts[order[:n]] * spacing
    pts = pts - pts.mean(axis=0)
    rng = np.random.default_rng(seed)
    return pts + jitter * spacing * rng.standard_normal(pts.shape)


def _relax_across(u, w, v, iters=6):
    """Newton-relax every direction orthogonal to ``v`` (the soft mode)."""
    proj = np.eye(u.size) - np.outer(v, v)
    for _ in range(iters):
        g = proj @ gradient(u, w)
        if np.abs(g).max() < 0.01 * GRAD_TOL:
            break
        h = proj @ hessian(u, w) @ proj
        evals, evecs = np.linalg.eigh(h)
        keep = evals > SOFT_RTOL * np.abs(evals).max()
        u = u - evecs[:, keep] @ ((evecs[:, keep].T @ g) / evals[keep])
    return u


def _soft_line_search(u, w, v):
    """Follow the soft mode ``v`` to where the relaxed slope vanishes.

    The remaining coordinates are re-minimized at every trial point, so the
    search tracks the valley floor. Energy changes along nearly free modes
    (wall orientation of a symmetric crystal) are below roundoff, but the
    slope is not, so the root is found on the slope.
    """
    def slope(s):
        return float(gradient(_relax_across(u + s * v, w, v), w) @ v)

    d0 = slope(0.0)
    if d0 == 0.0:
        return u
    direction = -math.copysign(1.0, d0)
    step = 1e-2
    for _ in range(16):
        if slope(direction * step) * d0 <= 0:
            lo, hi = sorted((0.0, direction * step))
            root = optimize.brentq(slope, lo, hi, xtol=1e-12)
            return _relax_across(u + root * v, w, v)
        step *= 2.0
    return _relax_across(u + direction * step / 2.0 * v, w, v)


def _newton_polish(u, w, trace, max_iter=200):
    """Newton iterations on the gradient from a BFGS endpoint.

    Soft modes (curvature below SOFT_RTOL of the largest) are relaxed by a
    slope root-find; the rest take a damped Newton step. Near the minimum
    energy changes fall below roundoff, so a step is also accepted when the
    energy is flat to ENERGY_RTOL and the gradient shrinks.
    """
    for _ in range(max_iter):
        g = gradient(u, w)
        g0 = np.abs(g).max()
        if g0 < 0.1 * GRAD_TOL:
            break
        evals, evecs = np.linalg.eigh(hessian(u, w))
        scale = np.abs(evals).max()
        zero = np.abs(evals) <= 1e-12 * scale  # exact rotation mode when w = 0
        soft = (np.abs(evals) <= SOFT_RTOL * scale) & ~zero
        for k in np.flatnonzero(soft):
            trial = _soft_line_search(u, w, evecs[:, k])
            e1 = energy(trial, w)
            if e1 <= trace[-1] + ENERGY_RTOL * abs(trace[-1]):
                u = trial
                trace.append(e1)
        g = gradient(u, w)
        g0 = np.abs(g).max()
        stiff = ~(zero | soft)
        coef = -(evecs[:, stiff].T @ g) / evals[stiff]
        if np.any(evals[stiff] < 0):
            return u  # saddle: handled by the caller
        step = evecs[:, stiff] @ coef
        e0 = trace[-1]
        alpha = 1.0
        while alpha > 1e-4:
            trial = u + alpha * step
            e1 = energy(trial, w)
            if e1 < e0 or (e1 <= e0 + ENERGY_RTOL * abs(e0)
                           and np.abs(gradient(trial, w)).max() < g0):
                break
            alpha *= 0.5
        else:
            break
        u = trial
        trace.append(e1)
    return u


def _negative_mode(u, w):
    """Most negative Hessian direction, or None at a local minimum."""
    evals, evecs = np.linalg.eigh(hessian(u, w))
    if evals[0] < -SADDLE_TOL * np.abs(evals).max():
        return evecs[:, 0]
    return None


def equilibrium_positions(trap: TrapConfig, n: int, seed_layout=None, seed=0,
                          max_iter=20000) -> CrystalState:
    """Minimize the rotating-frame planar potential for ``n`` ions.

    ``seed_layout`` (N x 2, metres) overrides the jittered triangular seed.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    trap.check_planar()
    l0 = trap.length_scale
    w = trap.omega_q ** 2 / trap.beta
    e_scale = trap.ion_mass * trap.beta * l0 ** 2
    if n == 1:
        return CrystalState(np.zeros((1, 2)), 0.0, trap, (0.0,), 0.0)
    if seed_layout is None:
        pts = triangular_seed(n, seed=seed)
    else:
        pts = np.asarray(seed_layout, dtype=float) / l0
        if pts.shape != (n, 2):
            raise ConfigError(f"seed layout must have shape ({n}, 2)")
    u = np.concatenate([pts[:, 0], pts[:, 1]])
    trace = [energy(u, w)]

    def record(xk):
        trace.append(energy(xk, w))

    for _ in range(MAX_RESTARTS):
        res = optimize.minimize(energy, u, args=(w,), jac=gradient, method="BFGS",
                                callback=record, options={"gtol": 1e-7, "maxiter": max_iter})
        u = _newton_polish(res.x, w, trace)
        mode = _negative_mode(u, w)
        if mode is None:
            break
        # saddle: step along negative curvature, shrinking until the energy drops
        kick = SADDLE_KICK
        while kick > 1e-6:
            best = min((u + sgn * kick * mode for sgn in (1.0, -1.0)),
                       key=lambda k: energy(k, w))
            if energy(best, w) < trace[-1]:
                break
            kick *= 0.5
        u = best
        trace.append(energy(u, w))
    else:
        raise ConvergenceError("equilibrium search kept landing on saddle points")
    if np.abs(gradient(u, w)).max() >= GRAD_TOL:
        raise ConvergenceError("equilibrium search did not reach the gradient tolerance "
                               f"({np.abs(gradient(u, w)).max():.2e})")
    x, y = _split(u)
    gnorm = float(np.abs(gradient(u, w)).max())
    return CrystalState(np.column_stack([x, y]) * l0, energy(u, w) * e_scale, trap,
                        tuple(trace), gnorm)


# --- modes and couplings -----------------------------------------------------

def axial_stiffness(crystal: CrystalState) -> np.ndarray:
    """Mass-scaled axial stiffness matrix A (rad^2/s^2)."""
    trap = crystal.trap
    n = crystal.n_ions
    a = np.zeros((n, n))
    if n > 1:
        d = crystal.distances()
        np.fill_diagonal(d, np.inf)
        c = (K_E * trap.ion_charge ** 2 / trap.ion_mass) / d ** 3
        a = c - np.diag(c.sum(axis=1))
    return a + trap.omega_z ** 2 * np.eye(n)


def axial_modes(crystal: CrystalState) -> ModeSpectrum:
    """Axial (drumhead) modes, highest frequency first."""
    a = axial_stiffness(crystal)
    evals, evecs = np.linalg.eigh(a)
    if evals.min() <= 0:
        raise InstabilityError(f"axial mode with omega^2 = {evals.min():.4g} <= 0")
    order = np.argsort(evals)[::-1]
    evecs = evecs[:, order]
    # fix the sign convention: largest-magnitude component positive
    flip = np.sign(evecs[np.abs(evecs).argmax(axis=0), np.arange(evecs.shape[1])])
    return ModeSpectrum(np.sqrt(evals[order]), evecs * flip, a)


def coupling_matrix(modes: ModeSpectrum, drive: DriveConfig, ion_mass: float) -> CouplingMatrix:
    """J_ij = F0^2 N / (2 hbar M) sum_m b_im b_jm / (mu^2 - omega_m^2), in rad/s."""
    wm = modes.frequencies
    gap = np.abs(drive.mu - wm) / wm
    if gap.min() <= RESONANCE_GUARD:
        m = int(gap.argmin())
        raise ResonanceError(f"mu is within {gap.min():.2e} (relative) of mode {m}")
    n = modes.n_modes
    b = modes.eigenvectors
    j = (drive.f0 ** 2 * n / (2.0 * HBAR * ion_mass)) * (b / (drive.mu ** 2 - wm ** 2)) @ b.T
    np.fill_diagonal(j, 0.0)
    return CouplingMatrix(0.5 * (j + j.T))


def force_for_mean_coupling(modes: ModeSpectrum, mu: float, j_bar: float, ion_mass: float,
                            delta_k: float = 2.0 * math.pi / 0.90e-6) -> DriveConfig:
    """Drive whose mode-derived couplings average to ``j_bar`` (rad/s); J scales as F0^2."""
    unit = coupling_matrix(modes, DriveConfig(1e-24, mu, delta_k), ion_mass)
    if unit.j_bar_effective == 0 or j_bar / unit.j_bar_effective <= 0:
        raise ConfigError("target coupling sign is incompatible with this detuning")
    return DriveConfig(1e-24 * math.sqrt(j_bar / unit.j_bar_effective), mu, delta_k)


def com_coupling(f0, omega_z, delta, ion_mass):
    """COM-only coupling F0^2 / (4 hbar M omega_z delta) in rad/s."""
    return f0 ** 2 / (4.0 * HBAR * ion_mass * omega_z * delta)


def power_law_fit(coupling: CouplingMatrix, crystal: CrystalState):
    """Fit J_ij = prefactor / d_ij^alpha over all pairs; returns (prefactor, alpha)."""
    n = crystal.n_ions
    if n < 3:
        raise ConfigError("power-law fit needs N >= 3")
    iu = np.triu_indices(n, 1)
    d = crystal.distances()[iu]
    jv = coupling.j[iu]
    if np.any(d <= 0):
        raise ConfigError("duplicate ion positions")
    if np.any(jv <= 0):
        raise ConfigError("power-law fit needs positive couplings")
    slope, intercept = np.polyfit(np.log(d), np.log(jv), 1)
    return float(math.exp(intercept)), float(-slope)


def thermal_extent(modes: ModeSpectrum, temperature: float, delta_k: float, ion_mass: float,
                   include_thermal: bool = True):
    """Per-ion rms axial extent (m) and Debye-Waller factor exp(-dk^2 z_rms^2 / 2).

    Occupations follow the classical n_m = k_B T / (hbar omega_m); with
    ``include_thermal=False`` only zero-point motion is kept.
    """
    if temperature <= 0:
        raise ConfigError("temperature must be positive")
    wm = modes.frequencies
    if np.any(wm <= 0):
        raise InstabilityError("unstable spectrum")
    nbar = K_B * temperature / (HBAR * wm) if include_thermal else np.zeros_like(wm)
    per_mode = HBAR / (2.0 * ion_mass * wm) * (2.0 * nbar + 1.0)
    z_rms = np.sqrt((modes.eigenvectors ** 2) @ per_mode)
    return z_rms, np.exp(-0.5 * delta_k ** 2 * z_rms ** 2)

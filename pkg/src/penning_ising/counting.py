"""Full counting statistics of the collective spin for uniform coupling.

Outcome ``n`` counts spins found along +direction, so the collective spin
projection is S = n - N/2 and sum_i sigma^dir_i = 2n - N.

The characteristic function C(q) = <exp(i q sum_i sigma^dir_i)> is assembled
from the permutation-symmetric correlators of :mod:`dynamics`. Grouping the
multinomial expansion by d = n_plus - n_minus, the sum over sigma^z factors
collapses by the binomial theorem::

    C(q) = sum_d B_d [z^d] (w_d + u_+ z + u_- / z)^N

    u_pm = i sin(q) a_pm exp(-Gamma t) / 2
    w_d  = cos(q) Phi(d J, t) + i sin(q) c_z Psi(d J, t)
    B_d  = exp(-d^2 dphi^2 / 2)          (homogeneous field noise)

The Laurent coefficient is read off on the unit circle, where the integrand
stays bounded, so no large alternating sums appear even at N ~ 200. The
literal triple sum is kept in :func:`characteristic_function_series` for
small-N cross checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .dynamics import phi, psi, uniform_moments
from .errors import ConfigError, InvariantViolation
from .model import MeasurementDirection, SpinEnsembleParams

NORM_TOL = 1e-10
NEG_TOL = 1e-10
MOMENT_TOL = 1e-8


@dataclass(frozen=True)
class CountingDistribution:
    n_ions: int
    direction: MeasurementDirection
    probabilities: np.ndarray
    continuous: tuple | None = field(default=None, compare=False)

    @property
    def s_values(self):
        return np.arange(self.n_ions + 1) - 0.5 * self.n_ions

    def mean(self) -> float:
        return float(self.probabilities @ self.s_values)

    def variance(self) -> float:
        s = self.s_values - self.mean()
        return float(self.probabilities @ (s * s))


def dephasing_variance(tau, a=2.4e-3, b=1.7e-4):
    """Empirical field-noise phase variance a tau^2 + b tau^4 (rad^2), tau in s.

    The coefficients are per ms^2 and ms^4.
    """
    if np.any(np.asarray(tau) < 0):
        raise ConfigError("tau must be >= 0")
    t_ms = np.asarray(tau, dtype=float) * 1e3
    return a * t_ms ** 2 + b * t_ms ** 4


def _laurent_setup(direction, params, t):
    n = params.n_ions
    d = np.arange(-n, n + 1)
    jd = d * params.j_bar
    return n, d, phi(jd, t, params), psi(jd, t, params)


def characteristic_function(direction: MeasurementDirection, q, params: SpinEnsembleParams,
                            bfield_var=0.0, t=None):
    """C(q) for scalar or array ``q``; ``bfield_var`` = 0 disables field noise."""
    t = params.tau if t is None else t
    n, d, phi_d, psi_d = _laurent_setup(direction, params, t)
    m = 2 * n + 1
    theta = 2.0 * np.pi * np.arange(m) / m
    transverse = direction.c_x * np.cos(theta) + direction.c_y * np.sin(theta)
    phase = np.exp(-1j * np.outer(d, theta)) / m
    weight = np.exp(-0.5 * d.astype(float) ** 2 * bfield_var)
    decay = math.exp(-params.gamma * t)

    qs = np.atleast_1d(np.asarray(q, dtype=float))
    out = np.empty(qs.shape, dtype=complex)
    for k, qk in enumerate(qs):
        cq, sq = math.cos(qk), math.sin(qk)
        w = cq * phi_d + 1j * sq * direction.c_z * psi_d
        g = 1j * sq * decay * transverse
        base = w[:, None] + g[None, :]
        # polar form of base**n: cheaper than complex pow, same accuracy
        powered = np.abs(base) ** n * np.exp(1j * n * np.angle(base))
        coeff = np.sum(powered * phase, axis=1)
        out[k] = np.sum(weight * coeff)
    return out[0] if np.ndim(q) == 0 else out


def series_log_terms(direction: MeasurementDirection, q, params: SpinEnsembleParams,
                     bfield_var=0.0, t=None):
    """Complex logarithms of every (n_plus, n_minus, n_z) term of the literal sum.

    Returns (log_terms, n_plus, n_minus, n_z) as flat arrays. Coefficients are
    kept in log form so nothing overflows for N in the hundreds.
    """
    t = params.tau if t is None else t
    n = params.n_ions
    npl, nmi, nz = np.meshgrid(np.arange(n + 1), np.arange(n + 1), np.arange(n + 1),
                               indexing="ij")
    keep = npl + nmi + nz <= n
    npl, nmi, nz = npl[keep], nmi[keep], nz[keep]
    with np.errstate(invalid="ignore"):
        return _series_logs(direction, q, params, bfield_var, t, npl, nmi, nz)


def _series_logs(direction, q, params, bfield_var, t, npl, nmi, nz):
    n = params.n_ions
    tot = npl + nmi + nz
    dd = npl - nmi
    jd = dd * params.j_bar

    def clog(x):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(x, dtype=complex))

    def times(k, logx):
        # k * log(x) with 0 * log(0) = 0
        return np.where(k == 0, 0.0, k * logx)

    lg = (gammaln(n + 1) - gammaln(npl + 1) - gammaln(nmi + 1) - gammaln(nz + 1)
          - gammaln(n - tot + 1))
    cq, sq = math.cos(q), math.sin(q)
    logs = (lg + times(n - tot, clog(cq)) + times(tot, clog(1j * sq))
            + times(npl, clog(direction.a_plus)) + times(nmi, clog(direction.a_minus))
            + times(nz, clog(direction.c_z))
            - (npl + nmi) * (params.gamma * t + math.log(2.0))
            + times(nz, clog(psi(jd, t, params)))
            + times(n - tot, clog(phi(jd, t, params)))
            - 0.5 * dd ** 2 * bfield_var)
    return logs, npl, nmi, nz


def characteristic_function_series(direction, q, params, bfield_var=0.0, t=None):
    """Literal multinomial triple sum; loses precision for large N (use for N <~ 20)."""
    logs, *_ = series_log_terms(direction, q, params, bfield_var, t)
    return complex(np.sum(np.exp(logs)))


def probabilities_from_characteristic(cvals, n):
    """Invert C(q_k), q_k = pi k / (N+1), k = 0..N, to P(n) for n = 0..N."""
    k = np.arange(n + 1)
    shifted = np.asarray(cvals) * np.exp(1j * np.pi * k * n / (n + 1))
    return np.fft.fft(shifted) / (n + 1)


def _check_and_clamp(p_complex, label=""):
    p_complex = np.asarray(p_complex)
    if np.abs(p_complex.imag).max() > NEG_TOL:
        raise InvariantViolation(f"{label}probabilities have imaginary part "
                                 f"{np.abs(p_complex.imag).max():.3e}")
    p = p_complex.real
    total = p.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise InvariantViolation(f"{label}normalization {total!r} != 1")
    if p.min() < -NEG_TOL:
        raise InvariantViolation(f"{label}negative probability {p.min():.3e}")
    return np.clip(p, 0.0, None)


def counting_distribution(direction: MeasurementDirection, params: SpinEnsembleParams,
                          bfield_var=0.0, t=None, check_moments=True) -> CountingDistribution:
    """P(n) by inverse DFT of the characteristic function on N+1 points."""
    n = params.n_ions
    # C(pi - q) = (-1)^N conj C(q) for a real distribution: evaluate half the grid
    half = (n + 1) // 2 + 1
    qs = np.pi * np.arange(half) / (n + 1)
    cvals = np.empty(n + 1, dtype=complex)
    cvals[:half] = characteristic_function(direction, qs, params, bfield_var, t)
    k = np.arange(half, n + 1)
    cvals[k] = (-1) ** n * np.conj(cvals[n + 1 - k])
    p = _check_and_clamp(probabilities_from_characteristic(cvals, n))
    dist = CountingDistribution(n, direction, p)
    if check_moments:
        mean, var = uniform_moments(direction, params, t, bfield_var=bfield_var)
        if abs(dist.mean() - mean) > MOMENT_TOL * max(abs(mean), 0.5 * n):
            raise InvariantViolation(f"mean {dist.mean()} disagrees with dynamics {mean}")
        if abs(dist.variance() - var) > MOMENT_TOL * max(abs(var), 0.25 * n):
            raise InvariantViolation(f"variance {dist.variance()} disagrees with dynamics {var}")
    return dist


def convolve_shot_noise(dist: CountingDistribution, sigma: float,
                        density_points: int = 0) -> CountingDistribution:
    """Convolve with Gaussian detection noise of width ``sigma`` in units of S/(N/2).

    The smoothed density is sampled on the support of ``dist`` and renormalized
    to unit sum. With ``density_points`` > 0 the (unit-area) density on a fine
    grid spanning the support is attached as ``continuous = (s_grid, density)``.
    """
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    if sigma == 0:
        return dist
    n = dist.n_ions
    width = sigma * 0.5 * n
    s = dist.s_values

    def density(points):
        z = (points[:, None] - s[None, :]) / width
        kern = np.exp(-0.5 * z * z) / (width * math.sqrt(2.0 * math.pi))
        return kern @ dist.probabilities

    sampled = density(s)
    p = sampled / sampled.sum()
    continuous = None
    if density_points > 0:
        grid = np.linspace(s[0], s[-1], density_points)
        continuous = (grid, density(grid))
    return CountingDistribution(n, dist.direction, p, continuous)

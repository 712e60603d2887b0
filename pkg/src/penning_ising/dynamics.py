"""Exact dissipative Ising dynamics from the x-polarized product state.

Conventions: H = (1/N) sum_{i<j} J_ij sz_i sz_j (hbar = 1), sigma^+ = |up><down|,
and every correlator is a Heisenberg-picture expectation value. Raman
scattering flips up->down at ``gamma_ud`` and down->up at ``gamma_du``;
elastic scattering dephases so that a single spin's coherence decays at
``params.gamma``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ConfigError, InvariantViolation, PhysicsDomainError
from .model import MeasurementDirection, SpinEnsembleParams

IMAG_TOL = 1e-10
ZERO_CONTRAST = 1e-12  # relative to N; below this xi_R^2 is undefined

# (n_plus, n_minus, n_z) labels of one- and two-body operators
_ONE_BODY = {"+": (1, 0, 0), "-": (0, 1, 0), "z": (0, 0, 1)}


def _sinc(x):
    """sin(x)/x for complex x, exact at the origin."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(safe) / safe)


def _rate_terms(J, params):
    arg = 2j * params.gamma_asym + 2.0 * np.asarray(J, dtype=float) / params.n_ions
    root = np.sqrt(arg * arg - params.gamma_ud * params.gamma_du + 0j)
    return arg, root


def phi(J, t, params: SpinEnsembleParams):
    """Spectator factor Phi(J, t); broadcasts over ``J`` and ``t``."""
    t = np.asarray(t, dtype=float)
    _, root = _rate_terms(J, params)
    g_ram = params.gamma_raman
    x = t * root
    out = np.exp(-0.5 * g_ram * t) * (np.cos(x) + 0.5 * g_ram * t * _sinc(x))
    return out[()] if out.ndim == 0 else out


def psi(J, t, params: SpinEnsembleParams):
    """sigma^z factor Psi(J, t); broadcasts like :func:`phi`."""
    t = np.asarray(t, dtype=float)
    arg, root = _rate_terms(J, params)
    g_ram = params.gamma_raman
    out = (np.exp(-0.5 * g_ram * t) * (1j * arg - 2.0 * params.gamma_asym)
           * t * _sinc(t * root))
    return out[()] if out.ndim == 0 else out


def cpow(base, exponent):
    """base**exponent for complex base and integer exponent >= 0, via logs.

    0**0 is 1 and 0**k is 0 for k > 0.
    """
    base = np.asarray(base, dtype=complex)
    exponent = np.asarray(exponent, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(exponent * np.log(base))
    out = np.where(exponent == 0, 1.0 + 0j, out)
    out = np.where((base == 0) & (exponent > 0), 0j, out)
    return out[()] if out.ndim == 0 else out


def correlators_uniform(n_plus, n_minus, n_z, params: SpinEnsembleParams, t=None):
    """<sigma^+_(n+) sigma^-_(n-) sigma^z_(nz)> for uniform coupling on distinct spins."""
    n = params.n_ions
    total = np.asarray(n_plus) + np.asarray(n_minus) + np.asarray(n_z)
    if np.any(total > n) or np.any(np.asarray([n_plus, n_minus, n_z]) < 0):
        raise ConfigError(f"operator counts exceed N = {n}")
    t = params.tau if t is None else t
    d = np.asarray(n_plus) - np.asarray(n_minus)
    jd = d * params.j_bar
    n_pm = np.asarray(n_plus) + np.asarray(n_minus)
    pref = np.exp(-n_pm * params.gamma * t) / 2.0 ** n_pm
    out = pref * cpow(psi(jd, t, params), n_z) * cpow(phi(jd, t, params), n - total)
    return out[()] if np.ndim(out) == 0 else out


def _real(value, what):
    value = complex(value)
    if abs(value.imag) > IMAG_TOL * max(1.0, abs(value.real)):
        raise InvariantViolation(f"{what} has imaginary residue {value.imag:.3e}")
    return value.real


def uniform_moments(direction: MeasurementDirection, params: SpinEnsembleParams, t=None,
                    bfield_var=0.0):
    """Mean and variance of S_dir = (1/2) sum_i sigma^dir_i for uniform coupling.

    ``bfield_var`` is the phase variance of homogeneous field noise; it damps
    every correlator by exp(-(n_plus - n_minus)^2 bfield_var / 2).
    """
    n = params.n_ions
    coeff = {"+": direction.a_plus, "-": direction.a_minus, "z": direction.c_z}

    def corr(n_plus, n_minus, n_z):
        damp = math.exp(-0.5 * (n_plus - n_minus) ** 2 * bfield_var)
        return damp * correlators_uniform(n_plus, n_minus, n_z, params, t)

    one = {k: corr(*idx) for k, idx in _ONE_BODY.items()}
    mean = 0.5 * n * _real(sum(coeff[k] * one[k] for k in coeff), "<S>")
    if n == 1:
        return mean, 0.25 - mean ** 2
    pair = 0j
    for a, ia in _ONE_BODY.items():
        for b, ib in _ONE_BODY.items():
            idx = tuple(x + y for x, y in zip(ia, ib))
            pair += coeff[a] * coeff[b] * corr(*idx)
    second = 0.25 * (n + n * (n - 1) * _real(pair, "<S^2>"))
    return mean, second - mean ** 2


def transverse_variance(params: SpinEnsembleParams, psi_angle: float, t=None) -> float:
    """(Delta S_psi)^2 for S_psi = (1/2) sum_i (cos psi sz_i + sin psi sy_i)."""
    return uniform_moments(MeasurementDirection.tomography(psi_angle), params, t)[1]


def variance_quadratic_form(params: SpinEnsembleParams, t=None):
    """(V_zz, V_yy, C_yz) with Var(S_psi) = c^2 V_zz + s^2 V_yy + 2 c s C_yz."""
    vzz = uniform_moments(MeasurementDirection(0.0, 0.0, 1.0), params, t)[1]
    vyy = uniform_moments(MeasurementDirection(0.0, 1.0, 0.0), params, t)[1]
    v45 = transverse_variance(params, math.pi / 4, t)
    return vzz, vyy, v45 - 0.5 * (vzz + vyy)


def s_plus(params: SpinEnsembleParams, t=None) -> complex:
    return complex(correlators_uniform(1, 0, 0, params, t))


def contrast(params: SpinEnsembleParams, t=None) -> float:
    """Transverse Bloch-vector length N |<sigma^+>|."""
    return params.n_ions * abs(s_plus(params, t))


def contrast_closed_form(params: SpinEnsembleParams, t=None) -> float:
    """e^{-Gamma t} (N/2) |cos(2 J t / N)|^(N-1); exact only without Raman flips."""
    t = params.tau if t is None else t
    n = params.n_ions
    c = abs(math.cos(2.0 * params.j_bar * t / n))
    return math.exp(-params.gamma * t) * 0.5 * n * (c ** (n - 1) if n > 1 else 1.0)


def squeezing_parameter(params: SpinEnsembleParams, t=None, xtol=1e-4):
    """Ramsey squeezing xi_R^2 and the minimizing tomography angle in [0, pi).

    The angle is located on a 1 degree grid, then refined by golden-section
    search down to ``xtol`` rad.
    """
    c = contrast(params, t)
    if not c > ZERO_CONTRAST * params.n_ions:
        raise PhysicsDomainError("contrast vanishes; squeezing parameter undefined")
    # the variance is quadratic in (cos psi, sin psi); evaluate it cheaply
    vzz, vyy, cyz = variance_quadratic_form(params, t)

    def var(p):
        cp, sp = math.cos(p), math.sin(p)
        return cp * cp * vzz + sp * sp * vyy + 2.0 * cp * sp * cyz

    step = math.radians(1.0)
    grid = np.arange(180) * step
    values = [var(p) for p in grid]
    k = int(np.argmin(values))
    lo, mid, hi = grid[k] - step, grid[k], grid[k] + step
    if values[k] == values[(k + 1) % 180] == values[k - 1]:
        best = mid  # flat: nothing to refine
    else:
        best = optimize.golden(var, brack=(lo, mid, hi), tol=xtol / max(abs(mid), step))
    vmin = min(var(best), values[k])
    if vmin == values[k] and vmin < var(best):
        best = mid
    return params.n_ions * vmin / c ** 2, float(best % math.pi)


def optimal_squeezing(params: SpinEnsembleParams, n_grid=160):
    """Minimum of xi_R^2 over the interaction time; returns (xi2, tau, psi).

    ``params.tau`` is ignored; the search spans J tau from 1e-3 to 3 N^(1/3).
    """
    if params.j_bar <= 0:
        raise PhysicsDomainError("optimal squeezing needs a positive coupling")
    n = params.n_ions
    scale = n ** (1.0 / 3.0) / params.j_bar
    taus = np.geomspace(1e-3, 3.0, n_grid) * scale

    def xi2(tau):
        try:
            return squeezing_parameter(params, t=tau)[0]
        except PhysicsDomainError:
            return math.inf

    values = np.array([xi2(tau) for tau in taus])
    k = int(np.argmin(values))
    lo, hi = taus[max(k - 1, 0)], taus[min(k + 1, n_grid - 1)]
    res = optimize.minimize_scalar(xi2, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-9 * hi})
    tau = res.x if res.fun < values[k] else taus[k]
    x2, psi_min = squeezing_parameter(params, t=tau)
    return x2, float(tau), psi_min


def mean_field_field(j, sz_expectations):
    """Effective precession field B_j = (2/N) sum_{i != j} J_ij <sz_i>."""
    j = np.asarray(getattr(j, "j", j), dtype=float)
    sz = np.asarray(sz_expectations, dtype=float)
    n = j.shape[0]
    if sz.shape != (n,):
        raise ConfigError(f"expected {n} <sigma^z> values, got shape {sz.shape}")
    off = j - np.diag(np.diag(j))
    return 2.0 / n * off @ sz


# --- general (inhomogeneous) couplings ---------------------------------------

@dataclass(frozen=True)
class CorrelatorSet:
    """One- and two-spin correlators at one time.

    ``s_plus[j]`` is <sigma^+_j>; ``pair[(a, b)][j, k]`` is <sigma^a_j sigma^b_k>
    for a, b in {"+", "-", "z"} (diagonal entries are meaningless and zeroed).
    For uniform coupling the arrays hold a single representative value.
    """

    s_plus: np.ndarray
    s_z: np.ndarray
    pair: dict
    time: float

    @property
    def s_minus(self):
        return np.conj(self.s_plus)


def _coupling_array(j, n):
    j = np.asarray(getattr(j, "j", j), dtype=float)
    if j.shape != (n, n):
        raise ConfigError(f"coupling matrix shape {j.shape} does not match N = {n}")
    if not np.allclose(j, j.T, rtol=0, atol=1e-12 * max(1.0, np.abs(j).max())):
        raise ConfigError("coupling matrix must be symmetric")
    return j - np.diag(np.diag(j))


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=complex))


def correlators_general(j, t, params: SpinEnsembleParams) -> CorrelatorSet:
    """All one- and two-spin correlators for an arbitrary coupling matrix.

    The <sz sz> correlator needs no coupling input: sigma^z commutes with the
    Ising Hamiltonian and relaxes site by site, so it is <sz>^2 exactly.
    """
    n = params.n_ions
    jm = _coupling_array(j, n)
    eye = np.eye(n, dtype=bool)
    decay = math.exp(-params.gamma * t)
    sz = complex(psi(0.0, t, params))
    sign = {"+": 1.0, "-": -1.0}

    log_phi = {}
    for a, s in sign.items():
        lp = _log(phi(s * jm, t, params))
        lp[eye] = 0.0
        log_phi[a] = lp
    row = {a: lp.sum(axis=1) for a, lp in log_phi.items()}

    s_plus = 0.5 * decay * np.exp(row["+"])
    pair = {}
    for a, s in sign.items():
        # <sigma^a_j sigma^z_k>
        v = 0.5 * decay * psi(s * jm, t, params) * np.exp(row[a][:, None] - log_phi[a])
        v[eye] = 0.0
        pair[(a, "z")] = v
        pair[("z", a)] = v.T.copy()
    idx = np.arange(n)
    for b, sb in sign.items():
        # Phi(J_jl +/- J_kl) over l not in {j, k}: build the full j,k,l cube
        arg = jm[:, None, :] + sb * jm[None, :, :]
        lp = _log(phi(arg, t, params))
        lp[idx, :, idx] = 0.0
        lp[:, idx, idx] = 0.0
        v = 0.25 * decay ** 2 * np.exp(lp.sum(axis=2))
        v[eye] = 0.0
        pair[("+", b)] = v
        # Phi(-J) = conj Phi(J) for real couplings and rates
        pair[("-", "-" if b == "+" else "+")] = np.conj(v)
    zz = np.full((n, n), sz * sz)
    zz[eye] = 0.0
    pair[("z", "z")] = zz
    return CorrelatorSet(s_plus=s_plus, s_z=np.full(n, sz), pair=pair, time=float(t))


def general_moments(j, direction: MeasurementDirection, params: SpinEnsembleParams, t=None,
                    correlators: CorrelatorSet | None = None):
    """Mean and variance of S_dir for an arbitrary coupling matrix.

    Pass precomputed ``correlators`` to evaluate several directions at one time.
    """
    t = params.tau if t is None else t
    cs = correlators_general(j, t, params) if correlators is None else correlators
    coeff = {"+": direction.a_plus, "-": direction.a_minus, "z": direction.c_z}
    one = {"+": cs.s_plus, "-": cs.s_minus, "z": cs.s_z}
    n = params.n_ions
    mean = 0.5 * _real(sum(coeff[k] * one[k].sum() for k in coeff), "<S>")
    pair = sum(coeff[a] * coeff[b] * cs.pair[(a, b)].sum()
               for a in coeff for b in coeff)
    second = 0.25 * (n + _real(pair, "<S^2>"))
    return mean, second - mean ** 2


def contrast_general(j, params: SpinEnsembleParams, t=None) -> float:
    """|sum_j <sigma^+_j>|, the transverse Bloch-vector length."""
    t = params.tau if t is None else t
    cs = correlators_general(j, t, params)
    return float(abs(cs.s_plus.sum()))

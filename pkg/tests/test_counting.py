import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from penning_ising import counting, dynamics, oracle
from penning_ising.errors import ConfigError
from penning_ising.model import MeasurementDirection, SpinEnsembleParams

from conftest import REF_DPHI2, PSI_ANTI, ref_params

Z = MeasurementDirection(0.0, 0.0, 1.0)
SMALL = SpinEnsembleParams(5, 1.9, 0.35, 0.22, 0.08, 1.2)


def test_characteristic_trivial():
    assert counting.characteristic_function(Z, 0.0, ref_params()) == pytest.approx(1.0)
    q = np.linspace(-3, 3, 13)
    c = counting.characteristic_function(Z, q, ref_params(n_ions=30), t=0.0)
    np.testing.assert_allclose(c, np.cos(q) ** 30, atol=1e-13)


def test_characteristic_matches_oracle():
    rho = oracle.lindblad_propagate(5, SMALL, SMALL.tau)
    q = np.linspace(0.0, math.pi, 9)
    for d in (MeasurementDirection.tomography(0.8), MeasurementDirection(0.48, 0.6, 0.64)):
        np.testing.assert_allclose(counting.characteristic_function(d, q, SMALL),
                                   oracle.characteristic_function(rho, d, q), atol=1e-8)


def _mp_triple_sum(direction, q, params, bfield_var):
    """Literal multinomial sum in 40-digit arithmetic."""
    mpmath.mp.dps = 40
    n, t = params.n_ions, params.tau
    ap, am, cz = (mpmath.mpc(direction.a_plus), mpmath.mpc(direction.a_minus),
                  mpmath.mpf(direction.c_z))
    total = mpmath.mpc(0)
    for k in range(n + 1):
        outer = mpmath.binomial(n, k) * mpmath.cos(q) ** (n - k) * (1j * mpmath.sin(q)) ** k
        for npl in range(k + 1):
            for nmi in range(k - npl + 1):
                nz = k - npl - nmi
                d = npl - nmi
                ph = mpmath.mpc(dynamics.phi(d * params.j_bar, t, params))
                ps = mpmath.mpc(dynamics.psi(d * params.j_bar, t, params))
                corr = (mpmath.exp(-(npl + nmi) * params.gamma * t) / 2 ** (npl + nmi)
                        * ps ** nz * ph ** (n - k) * mpmath.exp(-d * d * bfield_var / 2))
                multi = mpmath.factorial(k) / (mpmath.factorial(npl) * mpmath.factorial(nmi)
                                               * mpmath.factorial(nz))
                total += outer * multi * ap ** npl * am ** nmi * cz ** nz * corr
    return complex(total)


@pytest.mark.parametrize("q", [0.3, 1.2, 2.9])
def test_characteristic_matches_high_precision_sum(q):
    p = ref_params(n_ions=12, j_bar=9000.0)
    d = MeasurementDirection.tomography(1.3)
    exact = _mp_triple_sum(d, q, p, 0.02)
    assert counting.characteristic_function(d, q, p, bfield_var=0.02) == pytest.approx(exact, abs=1e-12)
    assert counting.characteristic_function_series(d, q, p, bfield_var=0.02) == pytest.approx(
        exact, abs=1e-12)


def test_log_terms_finite_at_219():
    logs, *_ = counting.series_log_terms(MeasurementDirection.tomography(1.0), 0.7,
                                         ref_params(n_ions=219))
    finite = np.isfinite(logs.real) | (logs.real == -np.inf)
    assert finite.all()
    assert np.isfinite(logs.real).any()


def test_distribution_binomial_at_zero_time():
    p = ref_params(n_ions=40, tau=0.0)
    dist = counting.counting_distribution(Z, p)
    np.testing.assert_allclose(dist.probabilities, binom.pmf(np.arange(41), 40, 0.5), atol=1e-12)


@pytest.mark.parametrize("n", [2, 6, 8])
def test_distribution_matches_oracle(n):
    params = SMALL.replace(n_ions=n)
    rho = oracle.lindblad_propagate(n, params, params.tau)
    for psi in (0.2, 1.4, 2.8):
        d = MeasurementDirection.tomography(psi)
        np.testing.assert_allclose(counting.counting_distribution(d, params).probabilities,
                                   oracle.oracle_counting(rho, d), atol=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 200), st.floats(0, math.pi), st.floats(0, 4e-3))
def test_moments_and_normalization(n, psi, tau):
    # counting_distribution asserts normalization and moment agreement itself
    dist = counting.counting_distribution(MeasurementDirection.tomography(psi),
                                          ref_params(n_ions=n, tau=tau), bfield_var=0.01)
    assert dist.probabilities.sum() == pytest.approx(1.0, abs=1e-10)
    assert dist.probabilities.min() >= 0.0


def test_anti_squeezed_bimodal_with_raman_asymmetry():
    d = MeasurementDirection.tomography(PSI_ANTI)
    p = counting.counting_distribution(d, ref_params()).probabilities
    lo, hi = int(np.argmax(p[:64])), 64 + int(np.argmax(p[64:]))
    assert p[lo] > 2 * p[63] and p[hi] > 2 * p[63]
    assert abs(p[lo] - p[hi]) / max(p[lo], p[hi]) > 0.02
    sym = counting.counting_distribution(d, ref_params(gamma_ud=7.85, gamma_du=7.85))
    np.testing.assert_allclose(sym.probabilities, sym.probabilities[::-1], atol=1e-12)


def test_bfield_noise_suppressed_at_anti_squeezed_angle():
    d = MeasurementDirection.tomography(PSI_ANTI)
    p0 = counting.counting_distribution(d, ref_params()).probabilities
    p1 = counting.counting_distribution(d, ref_params(), bfield_var=REF_DPHI2).probabilities
    assert 0.5 * np.abs(p1 - p0).sum() < 0.01


def test_repeat_runs_bit_identical():
    d = MeasurementDirection.tomography(1.0)
    a = counting.counting_distribution(d, ref_params(n_ions=50)).probabilities
    b = counting.counting_distribution(d, ref_params(n_ions=50)).probabilities
    assert a.tobytes() == b.tobytes()


def test_shot_noise_convolution():
    dist = counting.counting_distribution(MeasurementDirection.tomography(PSI_ANTI), ref_params())
    assert counting.convolve_shot_noise(dist, 0.0) is dist
    sm = counting.convolve_shot_noise(dist, 0.03, density_points=500)
    assert sm.probabilities.sum() == pytest.approx(1.0)
    assert sm.mean() == pytest.approx(dist.mean(), abs=1e-6 * 127)
    added = sm.variance() - dist.variance()
    assert added == pytest.approx((0.03 * 127 / 2) ** 2, rel=0.01)
    grid, dens = sm.continuous
    assert grid.shape == dens.shape == (500,)
    with pytest.raises(ConfigError):
        counting.convolve_shot_noise(dist, -0.1)


def test_dephasing_variance():
    assert counting.dephasing_variance(0.0) == 0.0
    assert counting.dephasing_variance(3e-3) == pytest.approx(0.0354, abs=5e-5)
    assert counting.dephasing_variance(3e-3) == pytest.approx(0.035, rel=0.02)
    assert counting.dephasing_variance(6e-3) == pytest.approx(0.307, abs=5e-4)
    with pytest.raises(ConfigError):
        counting.dephasing_variance(-1e-3)

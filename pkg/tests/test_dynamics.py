import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from penning_ising import dynamics, oracle
from penning_ising.errors import ConfigError, PhysicsDomainError
from penning_ising.model import MeasurementDirection, SpinEnsembleParams

from conftest import REF_J, REF_RATES, ref_params

rates = st.floats(0.0, 300.0)


@given(st.floats(-1e5, 1e5), rates, rates)
def test_phi_psi_at_zero_time(j, gud, gdu):
    p = SpinEnsembleParams(10, 0.0, 50.0, gud, gdu, 0.0)
    assert dynamics.phi(j, 0.0, p) == pytest.approx(1.0, abs=1e-15)
    assert dynamics.psi(j, 0.0, p) == 0.0


def test_coherent_limits():
    p = SpinEnsembleParams(20)
    t = np.linspace(0, 5e-3, 11)
    for j in (-3e3, 0.0, 2e4):
        np.testing.assert_allclose(dynamics.phi(j, t, p), np.cos(2 * j * t / 20), atol=1e-14)
        np.testing.assert_allclose(dynamics.psi(j, t, p), 1j * np.sin(2 * j * t / 20), atol=1e-14)


@pytest.mark.parametrize("gr", [1.0, 15.7, 400.0])
def test_phi_equal_raman_rates_at_zero_coupling(gr):
    p = SpinEnsembleParams(5, 0.0, 0.0, gr, gr, 0.0)
    t = np.linspace(0, 0.02, 9)
    np.testing.assert_allclose(dynamics.phi(0.0, t, p), 1.0, atol=1e-13)


@settings(max_examples=50)
@given(st.floats(-5e4, 5e4), st.floats(0, 1e-2), rates, rates)
def test_branch_evenness_and_conjugation(j, t, gud, gdu):
    p = SpinEnsembleParams(7, 0.0, 0.0, gud, gdu, 0.0)
    # cos and sinc are even in R, so Phi(-J) = conj Phi(J) for real inputs
    assert dynamics.phi(-j, t, p) == pytest.approx(np.conj(dynamics.phi(j, t, p)), abs=1e-12)
    assert dynamics.psi(-j, t, p) == pytest.approx(np.conj(dynamics.psi(j, t, p)), abs=1e-12)


def test_phi_psi_match_two_spin_oracle():
    p = ref_params(n_ions=2, tau=1e-3)
    rho = oracle.lindblad_propagate(2, p, 1e-3)
    sp = oracle.local_op(oracle.SIGMA_PLUS, 0, 2)
    sz = oracle.local_op(oracle.SIGMA_Z, 1, 2)
    decay = math.exp(-p.gamma * 1e-3) / 2
    # at N = 2 the spectator product is a single Phi, and the sz correlator a single Psi
    assert rho.expect(sp) == pytest.approx(decay * dynamics.phi(REF_J, 1e-3, p), abs=1e-9)
    assert rho.expect(sp @ sz) == pytest.approx(decay * dynamics.psi(REF_J, 1e-3, p), abs=1e-9)


def test_correlators_uniform_trivial():
    p = ref_params()
    assert dynamics.correlators_uniform(0, 0, 0, p) == pytest.approx(1.0)
    assert dynamics.correlators_uniform(1, 0, 0, p, t=0.0) == pytest.approx(0.5)
    assert dynamics.correlators_uniform(1, 1, 0, p, t=0.0) == pytest.approx(0.25)
    assert dynamics.correlators_uniform(1, 0, 1, p, t=0.0) == 0.0
    with pytest.raises(ConfigError):
        dynamics.correlators_uniform(100, 28, 0, p)


def test_correlator_plus_z_matches_oracle():
    p = SpinEnsembleParams(4, 2.3, 0.4, 0.25, 0.05, 1.3)
    rho = oracle.lindblad_propagate(4, p, p.tau)
    op = oracle.local_op(oracle.SIGMA_PLUS, 0, 4) @ oracle.local_op(oracle.SIGMA_Z, 1, 4)
    assert dynamics.correlators_uniform(1, 0, 1, p) == pytest.approx(rho.expect(op), abs=1e-6)


def test_general_reduces_to_uniform():
    p = ref_params(n_ions=9, tau=2e-3)
    j = np.full((9, 9), REF_J) - REF_J * np.eye(9)
    cs = dynamics.correlators_general(j, p.tau, p)
    np.testing.assert_allclose(cs.s_plus, dynamics.correlators_uniform(1, 0, 0, p), atol=1e-12)
    off = ~np.eye(9, dtype=bool)
    labels = {"+": (1, 0, 0), "-": (0, 1, 0), "z": (0, 0, 1)}
    for (a, b), v in cs.pair.items():
        idx = tuple(x + y for x, y in zip(labels[a], labels[b]))
        np.testing.assert_allclose(v[off], dynamics.correlators_uniform(*idx, p), atol=1e-12)
    for d in (MeasurementDirection.tomography(0.7), MeasurementDirection(0.6, 0.0, 0.8)):
        mg = dynamics.general_moments(j, d, p, correlators=cs)
        mu = dynamics.uniform_moments(d, p)
        np.testing.assert_allclose(mg, mu, rtol=1e-10, atol=1e-12)


def test_general_correlator_invariants_at_zero_time():
    j = np.array([[0, 1.0, 2.0], [1.0, 0, 3.0], [2.0, 3.0, 0]])
    cs = dynamics.correlators_general(j, 0.0, SpinEnsembleParams(3, 0.0, 1.0, 1.0, 1.0))
    off = ~np.eye(3, dtype=bool)
    np.testing.assert_allclose(cs.s_plus, 0.5)
    np.testing.assert_allclose(cs.pair[("+", "-")][off], 0.25)
    np.testing.assert_allclose(cs.pair[("+", "z")][off], 0.0)
    np.testing.assert_allclose(cs.pair[("-", "-")], np.conj(cs.pair[("+", "+")]))


def test_general_matches_oracle_random_couplings():
    rng = np.random.default_rng(7)
    n = 4
    a = rng.uniform(0.5, 3.0, (n, n))
    j = np.triu(a, 1) + np.triu(a, 1).T
    p = SpinEnsembleParams(n, 0.0, 0.3, 0.2, 0.1, 1.1)
    rho = oracle.lindblad_propagate(n, p, p.tau, j=j)
    cs = dynamics.correlators_general(j, p.tau, p)
    ops = {"+": oracle.SIGMA_PLUS, "-": oracle.SIGMA_MINUS, "z": oracle.SIGMA_Z}
    for k in range(n):
        assert cs.s_plus[k] == pytest.approx(rho.expect(oracle.local_op(ops["+"], k, n)), abs=1e-6)
    for (a_, b_), v in cs.pair.items():
        for x in range(n):
            for y in range(n):
                if x != y:
                    exact = rho.expect(oracle.local_op(ops[a_], x, n) @ oracle.local_op(ops[b_], y, n))
                    assert v[x, y] == pytest.approx(exact, abs=1e-6)


def test_general_rejects_bad_matrix():
    p = SpinEnsembleParams(3)
    with pytest.raises(ConfigError):
        dynamics.correlators_general(np.zeros((2, 2)), 0.0, p)
    with pytest.raises(ConfigError):
        dynamics.correlators_general(np.triu(np.ones((3, 3)), 1), 0.0, p)


def test_contrast_examples():
    p = ref_params()
    assert dynamics.contrast(p, t=0.0) == pytest.approx(63.5)
    g = SpinEnsembleParams(50, 0.0, 120.0, 0.0, 0.0, 4e-3)
    assert dynamics.contrast(g) == pytest.approx(25 * math.exp(-60 * 4e-3), rel=1e-14)
    coh = SpinEnsembleParams(50, 800.0, 70.0, 0.0, 0.0, 3e-3)
    assert dynamics.contrast(coh) == pytest.approx(dynamics.contrast_closed_form(coh), rel=1e-12)
    # Raman flips only perturb the closed form slightly
    assert dynamics.contrast(p) == pytest.approx(dynamics.contrast_closed_form(p), rel=0.05)


def test_contrast_periodic_without_decoherence():
    p = SpinEnsembleParams(12, 900.0)
    period = math.pi * 12 / 900.0
    for t in (1e-3, 7e-3, 0.02):
        assert dynamics.contrast(p, t) == pytest.approx(dynamics.contrast(p, t + period), abs=1e-10)


def test_contrast_collapse():
    x = np.linspace(0.0, 1.5, 16)
    curves = []
    for n in (100, 200):
        p = SpinEnsembleParams(n, 1000.0)
        t = x * math.sqrt(n) / (2 * 1000.0)
        curves.append(np.array([dynamics.contrast(p, tt) / (n / 2) for tt in t]))
    assert np.abs(curves[0] - curves[1]).max() < 0.02


def test_variance_examples():
    p = ref_params()
    for psi in (0.0, 0.4, 1.9):
        assert dynamics.transverse_variance(p, psi, t=0.0) == pytest.approx(127 / 4)
    q = SpinEnsembleParams(4, 1.7, 0.2, 0.15, 0.3, 0.9)
    rho = oracle.lindblad_propagate(4, q, q.tau)
    s = 0.5 * oracle.collective(MeasurementDirection.tomography(1.1), 4)
    var = rho.expect(s @ s).real - rho.expect(s).real ** 2
    assert dynamics.transverse_variance(q, 1.1) == pytest.approx(var, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, math.pi), st.floats(0, 6e-3))
def test_variance_bounds(psi, tau):
    v = dynamics.transverse_variance(ref_params(n_ions=40, tau=tau), psi)
    assert 0.0 <= v <= 40 ** 2 / 4


def test_squeezing_parameter():
    p = ref_params()
    xi2, _ = dynamics.squeezing_parameter(p, t=0.0)
    assert xi2 == pytest.approx(1.0, abs=1e-12)
    # over-twisted non-Gaussian state at the reference point
    xi2, psi = dynamics.squeezing_parameter(p)
    assert xi2 == pytest.approx(26, rel=0.05)
    assert math.degrees(psi) == pytest.approx(174.6, abs=1.0)
    xi2, _ = dynamics.squeezing_parameter(p.coherent(), t=2e-4)
    assert xi2 < 1
    with pytest.raises(PhysicsDomainError):
        dynamics.squeezing_parameter(SpinEnsembleParams(4, 1.0, tau=math.pi * 4 / 4))


def test_optimal_squeezing_scaling():
    ns = np.array([32, 64, 128, 256, 512, 1024])
    xi = [dynamics.optimal_squeezing(SpinEnsembleParams(int(n), 1000.0))[0] for n in ns]
    slope = np.polyfit(np.log(ns), np.log(xi), 1)[0]
    assert -2 / 3 - 0.1 <= slope <= -2 / 3 + 0.1


def test_mean_field_field():
    j = np.array([[0, 5.0], [5.0, 0]])
    np.testing.assert_allclose(dynamics.mean_field_field(j, [0.0, 0.0]), 0.0)
    assert dynamics.mean_field_field(j, [1.0, 0.0])[1] == pytest.approx(5.0)
    n, jb, s = 6, 3.0, 0.4
    ju = jb * (np.ones((n, n)) - np.eye(n))
    np.testing.assert_allclose(dynamics.mean_field_field(ju, np.full(n, s)), 2 * jb * s * (n - 1) / n)
    with pytest.raises(ConfigError):
        dynamics.mean_field_field(j, [1.0])


def test_rates_symmetric_under_coupling_sign():
    p = ref_params(n_ions=30)
    m = p.replace(j_bar=-REF_J)
    assert dynamics.contrast(p) == pytest.approx(dynamics.contrast(m), rel=1e-12)
    assert REF_RATES["gamma_el"] == p.gamma_el

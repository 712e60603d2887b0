import dataclasses
import math

import pytest
from hypothesis import given, strategies as st

from penning_ising.errors import ConfigError, InstabilityError
from penning_ising.model import (MeasurementDirection, SpinEnsembleParams, TrapConfig,
                                 convert_coupling, to_hz, validate)

from conftest import ref_params, ref_trap


def test_trivial_params_valid():
    p = SpinEnsembleParams(1, 0.0, 0.0, 0.0, 0.0, 0.0)
    assert validate(p) is p


def test_ref_params_valid():
    p = SpinEnsembleParams(127, convert_coupling(3300.0), 171.6, 9.2, 6.5, 3e-3)
    assert validate(p).n_ions == 127


@pytest.mark.parametrize("bad", [dict(n_ions=0), dict(n_ions=-3), dict(gamma_el=-1.0),
                                 dict(tau=-1e-3), dict(j_bar=math.nan), dict(gamma_ud=math.inf)])
def test_invalid_params_rejected(bad):
    with pytest.raises(ConfigError):
        validate(ref_params(**bad))


def test_derived_rates():
    p = ref_params()
    assert p.gamma == pytest.approx(93.65, rel=1e-15)
    assert p.gamma_asym == pytest.approx((9.2 - 6.5) / 4)
    assert p.gamma_raman == pytest.approx(15.7)


def test_params_immutable_and_fieldwise_equal():
    p = ref_params()
    with pytest.raises(dataclasses.FrozenInstanceError):
        p.n_ions = 3
    assert p == ref_params()
    assert p.replace(tau=1e-3) != p
    assert p.coherent().gamma == 0.0


def test_convert_coupling():
    assert convert_coupling(3300.0) == pytest.approx(2.0735e4, rel=1e-4)
    assert convert_coupling(0.0) == 0.0
    assert to_hz(convert_coupling(1234.5)) == pytest.approx(1234.5, rel=1e-15)


@given(st.floats(-1e7, 1e7, allow_nan=False))
def test_coupling_round_trip(hz):
    assert to_hz(convert_coupling(hz)) == pytest.approx(hz, rel=1e-14, abs=1e-300)


def test_trap_beta_and_planarity():
    trap = ref_trap()
    assert trap.omega_c / (2 * math.pi) == pytest.approx(7.5975e6, rel=1e-4)
    assert trap.beta > 0
    trap.check_planar()
    loose = TrapConfig(trap.omega_z, 1e3, trap.omega_c)
    with pytest.raises(InstabilityError):
        loose.check_planar()


def test_measurement_direction():
    d = MeasurementDirection.tomography(0.3)
    assert (d.c_x, d.c_y, d.c_z) == (0.0, math.sin(0.3), math.cos(0.3))
    assert d.a_plus == complex(0, -math.sin(0.3))
    r = MeasurementDirection.rotated_tomography(0.3, 0.2)
    assert r.c_x == pytest.approx(math.sin(0.2) * math.cos(0.3))
    with pytest.raises(ConfigError):
        MeasurementDirection(1.0, 1.0, 0.0)

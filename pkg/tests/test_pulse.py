import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from pspace.errors import InvalidArgument
from pspace.pulse import (
    SIN2_FWHM_FRACTION, PulseConfig, convert_units, electric_field, fwhm_to_duration,
    pulse_table, vector_potential,
)


def test_convert_units():
    E, w = convert_units(3.50944506e16, 45.5633526)
    assert E == pytest.approx(1.0, rel=1e-15)
    assert w == pytest.approx(1.0, rel=1e-15)
    E, w = convert_units(1e14, 800.0)
    assert w == pytest.approx(0.056954, abs=1e-6)
    assert E == pytest.approx(0.053380, abs=1e-6)
    with pytest.raises(InvalidArgument):
        convert_units(-1.0, 800.0)


def test_from_parameters_alternatives():
    a = PulseConfig.from_parameters(peak_intensity=1e14, wavelength_nm=800.0, cycles=5)
    b = PulseConfig.from_parameters(peak_field=a.peak_field, omega=a.omega, duration=a.duration)
    assert a == b
    assert a.cycles == pytest.approx(5.0)
    assert a.peak_intensity == pytest.approx(1e14)
    with pytest.raises(InvalidArgument):
        PulseConfig.from_parameters(peak_field=0.05, peak_intensity=1e14, omega=0.05, cycles=2)
    with pytest.raises(InvalidArgument):
        PulseConfig.from_parameters(peak_field=0.05, omega=0.05)
    with pytest.raises(InvalidArgument):
        PulseConfig(0.05, 0.05, 100.0, envelope="gaussian")
    with pytest.raises(InvalidArgument):
        PulseConfig(0.05, -0.05, 100.0)


def test_fwhm_fraction():
    # sin^4 reaches one half at pi t / T = asin(2^-1/4)
    t = np.linspace(0, 1, 2_000_001)
    above = np.sin(np.pi * t) ** 4 >= 0.5
    assert above.mean() == pytest.approx(SIN2_FWHM_FRACTION, abs=1e-6)
    assert fwhm_to_duration(10.0) * 2.4188843265857e-2 == pytest.approx(27.468, abs=1e-3)


def _cfg(envelope, cycles=3.0, cep=0.0):
    return PulseConfig.from_parameters(peak_intensity=1e14, wavelength_nm=800.0, cycles=cycles,
                                       cep=cep, envelope=envelope)


def test_field_endpoints_and_peak():
    cfg = _cfg("electric-field", cycles=4.0)
    assert electric_field(cfg, 0.0) == 0.0
    assert abs(electric_field(cfg, cfg.duration)) < 1e-18
    assert electric_field(cfg, 0.5 * cfg.duration) == pytest.approx(cfg.peak_field, rel=1e-14)
    assert electric_field(cfg, -1.0) == 0.0 and electric_field(cfg, cfg.duration + 1) == 0.0


def test_vector_potential_envelope_on_a():
    cfg = _cfg("vector-potential", cycles=4.0)
    assert vector_potential(cfg, 0.0) == 0.0
    assert abs(vector_potential(cfg, cfg.duration)) < 1e-17


@pytest.mark.parametrize("envelope", ["electric-field", "vector-potential"])
@pytest.mark.parametrize("cep", [0.0, 0.7])
def test_field_is_minus_dA_dt(envelope, cep):
    cfg = _cfg(envelope, cycles=2.5, cep=cep)
    t = np.linspace(0.01, cfg.duration - 0.01, 301)
    h = 1e-4
    fd = -(vector_potential(cfg, t + h) - vector_potential(cfg, t - h)) / (2 * h)
    assert np.max(np.abs(fd - electric_field(cfg, t))) < 1e-8 * cfg.peak_field / cfg.omega


@pytest.mark.parametrize("cep", [0.0, 1.3])
def test_closed_form_A_matches_cumulative_quadrature(cep):
    cfg = _cfg("electric-field", cycles=3.3, cep=cep)
    for t in np.linspace(0, cfg.duration, 9):
        ref = -quad(lambda s: float(electric_field(cfg, s)), 0, t, limit=400,
                    epsabs=1e-13, epsrel=1e-12)[0]
        assert abs(vector_potential(cfg, t) - ref) <= 1e-10


def test_constant_outside_support():
    cfg = _cfg("electric-field", cycles=3.3)
    assert vector_potential(cfg, -5.0) == vector_potential(cfg, 0.0)
    assert vector_potential(cfg, cfg.duration + 50) == vector_potential(cfg, cfg.duration)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 12.0), st.floats(0.0, 2 * math.pi), st.sampled_from(["electric-field", "vector-potential"]))
def test_potential_continuous(cycles, cep, envelope):
    cfg = _cfg(envelope, cycles=cycles, cep=cep)
    T = cfg.duration
    for t in (0.0, T):
        assert abs(vector_potential(cfg, t + 1e-9) - vector_potential(cfg, t - 1e-9)) < 1e-9


def test_pulse_table():
    cfg = _cfg("vector-potential")
    t, E, A = pulse_table(cfg, 0.5)
    assert t[0] == 0 and t[-1] == pytest.approx(cfg.duration)
    assert E.shape == A.shape == t.shape

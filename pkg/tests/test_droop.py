"""Droop law tests: trivial identities, published gain magnitudes, linearity."""

from __future__ import annotations

import math

import pytest

from gfmsim.droop import (
    DroopParams,
    NominalSetpoints,
    droop_frequency,
    droop_voltage,
    freq_coeff_from_hz_per_kw,
    steady_state_frequency,
    volt_coeff_from_v_per_kvar,
)

NOMINAL = NominalSetpoints(omega=2 * math.pi * 60.0, voltage=240.0)


def params(n_hz_per_kw=0.004, m_v_per_kvar=0.003):
    return DroopParams(
        freq_coeff=freq_coeff_from_hz_per_kw(n_hz_per_kw),
        volt_coeff=volt_coeff_from_v_per_kvar(m_v_per_kvar),
    )


class TestDroopFrequency:
    def test_no_load_gives_nominal(self):
        assert droop_frequency(params(), NOMINAL, 0.0) == NOMINAL.omega

    def test_nameplate_gain_magnitude(self):
        # 0.32 Hz/kW at 100 kW pulls the frequency down by exactly 32 Hz.
        p = params(n_hz_per_kw=0.32)
        out = droop_frequency(p, NOMINAL, 100e3)
        assert out == pytest.approx(NOMINAL.omega - 2 * math.pi * 32.0, rel=1e-12)

    def test_doubling_gain_doubles_deviation(self):
        p1, p2 = params(0.01), params(0.02)
        dev1 = NOMINAL.omega - droop_frequency(p1, NOMINAL, 50e3)
        dev2 = NOMINAL.omega - droop_frequency(p2, NOMINAL, 50e3)
        assert dev2 == pytest.approx(2 * dev1, rel=1e-12)

    def test_affine_superposition(self):
        p = params()
        f = lambda x: droop_frequency(p, NOMINAL, x)
        assert f(3e3) + f(5e3) - f(0.0) == pytest.approx(f(8e3), rel=1e-12)


class TestDroopVoltage:
    def test_no_load_no_correction(self):
        assert droop_voltage(params(), NOMINAL, 0.0, 0.0) == NOMINAL.voltage

    def test_nameplate_gain_magnitude(self):
        # 40 V/kVAr at 75 kVAr sags the set-point by exactly 3000 V.
        p = params(m_v_per_kvar=40.0)
        assert droop_voltage(p, NOMINAL, 75e3, 0.0) == pytest.approx(NOMINAL.voltage - 3000.0)

    def test_correction_cancels_droop(self):
        p = params()
        q = 50e3
        assert droop_voltage(p, NOMINAL, q, p.volt_coeff * q) == pytest.approx(NOMINAL.voltage)

    def test_affine_superposition(self):
        p = params()
        g = lambda q: droop_voltage(p, NOMINAL, q, 0.0)
        assert g(10e3) + g(20e3) - g(0.0) == pytest.approx(g(30e3), rel=1e-12)


class TestSteadyStateFrequency:
    def test_zero_load(self):
        assert steady_state_frequency([1e-5, 2e-5], NOMINAL, 0.0) == NOMINAL.omega

    def test_two_equal_units(self):
        n = 2.5e-5
        load = 400e3
        out = steady_state_frequency([n, n], NOMINAL, load)
        assert out == pytest.approx(NOMINAL.omega - n * load / 2, rel=1e-12)

    def test_consistent_with_per_unit_droop(self):
        # Ten equal units: the shared level equals each unit's own droop law
        # evaluated at a tenth of the load.
        n = 2.5e-5
        load = 1e6
        shared = steady_state_frequency([n] * 10, NOMINAL, load)
        single = droop_frequency(
            DroopParams(freq_coeff=n, volt_coeff=1e-3), NOMINAL, load / 10
        )
        assert shared == pytest.approx(single, rel=1e-12)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            steady_state_frequency([], NOMINAL, 1.0)


class TestValidation:
    def test_nonpositive_gains_rejected(self):
        with pytest.raises(ValueError):
            DroopParams(freq_coeff=0.0, volt_coeff=1e-3)
        with pytest.raises(ValueError):
            DroopParams(freq_coeff=1e-5, volt_coeff=-1e-3)
        with pytest.raises(ValueError):
            DroopParams(freq_coeff=1e-5, volt_coeff=1e-3, filter_tau=0.0)

    def test_nonpositive_nominals_rejected(self):
        with pytest.raises(ValueError):
            NominalSetpoints(omega=0.0, voltage=240.0)
        with pytest.raises(ValueError):
            NominalSetpoints(omega=377.0, voltage=-1.0)

    def test_unit_conversions(self):
        assert freq_coeff_from_hz_per_kw(1.0) == pytest.approx(2 * math.pi / 1e3)
        assert volt_coeff_from_v_per_kvar(40.0) == pytest.approx(0.04)

"""Frequency and voltage droop laws for grid-forming inverters."""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DroopParams:
    """Per-inverter droop gains, SI units.

    ``freq_coeff`` drops angular frequency per watt of active power,
    ``volt_coeff`` drops voltage per var of reactive power, and
    ``filter_tau`` is the time constant of the power measurement filter.
    """

    freq_coeff: float
    volt_coeff: float
    filter_tau: float = 0.1

    def __post_init__(self):
        for name in ("freq_coeff", "volt_coeff", "filter_tau"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {value}")


@dataclass(frozen=True)
class NominalSetpoints:
    """No-load operating point: angular frequency (rad/s) and voltage (V)."""

    omega: float
    voltage: float

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0.0):
            raise ValueError(f"nominal frequency must be finite and > 0, got {self.omega}")
        if not (math.isfinite(self.voltage) and self.voltage > 0.0):
            raise ValueError(f"nominal voltage must be finite and > 0, got {self.voltage}")


def freq_coeff_from_hz_per_kw(value: float) -> float:
    """Convert a frequency droop gain from Hz/kW to rad/s per watt."""
    return value * TWO_PI / 1e3


def volt_coeff_from_v_per_kvar(value: float) -> float:
    """Convert a voltage droop gain from V/kVAr to volts per var."""
    return value / 1e3


def droop_frequency(params: DroopParams, nominal: NominalSetpoints, p_filtered: float) -> float:
    """Inverter angular frequency under the active-power droop law."""
    return nominal.omega - params.freq_coeff * p_filtered


def droop_voltage(
    params: DroopParams,
    nominal: NominalSetpoints,
    q_filtered: float,
    adjustment: float = 0.0,
) -> float:
    """Inverter voltage set-point: reactive-power droop plus a correction term."""
    return nominal.voltage - params.volt_coeff * q_filtered + adjustment


def steady_state_frequency(freq_coeffs, nominal: NominalSetpoints, total_load: float) -> float:
    """System frequency once the load splits in proportion to the droop gains."""
    coeffs = list(freq_coeffs)
    if not coeffs:
        raise ValueError("at least one inverter is required")
    return nominal.omega - total_load / sum(1.0 / n for n in coeffs)

"""Quasi-static phasor model of N grid-forming inverters feeding a common bus.

Every inverter is a voltage source behind a series line impedance; all lines
meet at the point of common coupling (PCC), which carries one constant-power
load. Electrical transients are assumed settled within each control tick, so
each tick reduces to an algebraic network solve. Everything here is a pure
function over value types: no shared state, safe to call from any thread.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class PlantNonConvergence(RuntimeError):
    """The network solve did not reach the requested residual."""


class VoltageCollapse(PlantNonConvergence):
    """The bus voltage iterate collapsed toward zero (load not deliverable)."""


def wrap_angle(angle: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = angle - TWO_PI * math.ceil((angle - math.pi) / TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    elif wrapped > math.pi:
        wrapped -= TWO_PI
    return wrapped


@dataclass(frozen=True)
class Phasor:
    """Voltage phasor: magnitude in volts, angle in radians within (-pi, pi]."""

    magnitude: float
    angle: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.magnitude) and self.magnitude >= 0.0):
            raise ValueError(f"phasor magnitude must be finite and >= 0, got {self.magnitude}")
        if not math.isfinite(self.angle):
            raise ValueError(f"phasor angle must be finite, got {self.angle}")
        object.__setattr__(self, "angle", wrap_angle(self.angle))

    @classmethod
    def from_complex(cls, value: complex) -> "Phasor":
        return cls(abs(value), cmath.phase(value))

    def to_complex(self) -> complex:
        return cmath.rect(self.magnitude, self.angle)


@dataclass(frozen=True)
class Impedance:
    """Series line impedance in ohms; |Z| must be nonzero."""

    resistance: float
    reactance: float

    def __post_init__(self):
        if not (math.isfinite(self.resistance) and self.resistance >= 0.0):
            raise ValueError(f"line resistance must be finite and >= 0, got {self.resistance}")
        if not math.isfinite(self.reactance):
            raise ValueError(f"line reactance must be finite, got {self.reactance}")
        if abs(self.to_complex()) == 0.0:
            raise ValueError("line impedance magnitude must be nonzero")

    def to_complex(self) -> complex:
        return complex(self.resistance, self.reactance)


@dataclass(frozen=True)
class LoadDemand:
    """Constant-power demand at the common bus: watts and vars."""

    active: float
    reactive: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.active) and self.active >= 0.0):
            raise ValueError(f"load active power must be finite and >= 0, got {self.active}")
        if not math.isfinite(self.reactive):
            raise ValueError(f"load reactive power must be finite, got {self.reactive}")

    def to_complex(self) -> complex:
        return complex(self.active, self.reactive)


@dataclass(frozen=True)
class NetworkSolution:
    """Bus voltage plus per-inverter injections for one network solve.

    Injections are measured at the inverter terminal, so their sum covers the
    load and the series line losses. ``residual`` is the leftover apparent
    power of the bus current balance, in VA.
    """

    pcc_voltage: Phasor
    p_injected: tuple[float, ...]
    q_injected: tuple[float, ...]
    residual: float
    iterations: int


def _power_scale(load: complex) -> float:
    # Natural VA base of the instance; keeps tolerances meaningful at any size.
    return max(abs(load), 1.0)


def solve_network(
    ibr_voltages,
    lines,
    load: LoadDemand,
    *,
    tol: float = 1e-9,
    max_iter: int = 200,
    s_base: float | None = None,
) -> NetworkSolution:
    """Solve the common-bus voltage for fixed inverter phasors.

    Fixed-point iteration in current-balance form: the bus voltage that makes
    the line currents sum to the constant-power load current. Falls back to a
    damped 2x2 Newton solve if the fixed point stalls. ``tol`` is relative to
    ``s_base`` (default: the load apparent power, floored at 1 VA).
    """
    n = len(ibr_voltages)
    if n < 1:
        raise ValueError("at least one inverter is required")
    if len(lines) != n:
        raise ValueError(f"expected {n} lines, got {len(lines)}")

    e = np.array([v.to_complex() for v in ibr_voltages], dtype=complex)
    y = 1.0 / np.array([ln.to_complex() for ln in lines], dtype=complex)
    s_load = load.to_complex()
    if s_base is None:
        s_base = _power_scale(s_load)

    v_nom = float(np.mean(np.abs(e)))
    if v_nom == 0.0:
        v_nom = 1.0
    collapse_floor = 0.05 * v_nom

    y_sum = np.sum(y)
    source_current = np.sum(e * y)

    def mismatch(u: complex) -> complex:
        # Net current into the bus minus the load current drawn from it.
        return np.sum((e - u) * y) - np.conj(s_load / u)

    u = complex(v_nom, 0.0)
    fixed_point_budget = min(60, max_iter)
    iterations = 0
    converged = False
    while iterations < fixed_point_budget:
        iterations += 1
        if abs(u) < collapse_floor:
            raise VoltageCollapse(
                f"bus voltage iterate fell to {abs(u):.3g} V after {iterations} iterations"
            )
        res = abs(mismatch(u)) * abs(u)
        if res <= tol * s_base:
            converged = True
            break
        u = (source_current - np.conj(s_load / u)) / y_sum

    if not converged:
        u, newton_iters = _newton_bus(mismatch, u, s_base, tol, max_iter - iterations, collapse_floor)
        iterations += newton_iters
        res = abs(mismatch(u)) * abs(u)
        if res > tol * s_base:
            raise PlantNonConvergence(
                f"bus solve residual {res / s_base:.3g} pu after {iterations} iterations"
            )

    line_currents = (e - u) * y
    s_injected = e * np.conj(line_currents)
    return NetworkSolution(
        pcc_voltage=Phasor.from_complex(u),
        p_injected=tuple(float(p) for p in s_injected.real),
        q_injected=tuple(float(q) for q in s_injected.imag),
        residual=float(abs(mismatch(u)) * abs(u)),
        iterations=iterations,
    )


def _newton_bus(mismatch, u0: complex, s_base: float, tol: float, budget: int, collapse_floor: float):
    """Damped Newton on the 2-real-unknown bus mismatch, FD Jacobian."""
    x = np.array([u0.real, u0.imag])

    def f(vec):
        m = mismatch(complex(vec[0], vec[1]))
        return np.array([m.real, m.imag])

    r = f(x)
    iterations = 0
    for _ in range(max(budget, 1)):
        iterations += 1
        u_mag = math.hypot(x[0], x[1])
        if abs(complex(*x)) >= collapse_floor and np.linalg.norm(r) * u_mag <= tol * s_base:
            break
        jac = np.empty((2, 2))
        for k in range(2):
            h = 1e-7 * max(1.0, abs(x[k]))
            xh = x.copy()
            xh[k] += h
            jac[:, k] = (f(xh) - r) / h
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise PlantNonConvergence("singular Jacobian in bus Newton solve") from exc
        step = 1.0
        for _ in range(10):
            x_new = x + step * dx
            if abs(complex(*x_new)) < collapse_floor:
                step *= 0.5
                continue
            r_new = f(x_new)
            if np.linalg.norm(r_new) < np.linalg.norm(r) or step < 1e-4:
                break
            step *= 0.5
        else:
            raise VoltageCollapse("bus Newton solve could not keep the voltage away from zero")
        x, r = x_new, r_new
    return complex(x[0], x[1]), iterations


def lowpass_step(prev_filtered: float, instantaneous: float, tau: float, dt: float) -> float:
    """One backward-Euler step of a first-order low-pass filter."""
    if tau <= 0.0:
        raise ValueError(f"filter time constant must be > 0, got {tau}")
    if dt <= 0.0:
        raise ValueError(f"time step must be > 0, got {dt}")
    a = dt / tau
    return (prev_filtered + a * instantaneous) / (1.0 + a)


@dataclass(frozen=True)
class Equilibrium:
    """Operating point where active power splits per the frequency-droop gains.

    ``freq_drop`` is the common value of droop-gain-times-active-power across
    inverters, i.e. the angular-frequency drop below nominal.
    """

    ibr_voltages: tuple[Phasor, ...]
    pcc_voltage: Phasor
    p_injected: tuple[float, ...]
    q_injected: tuple[float, ...]
    freq_drop: float
    residual: float
    iterations: int


def solve_equilibrium(
    v_setpoints,
    lines,
    load: LoadDemand,
    freq_coeffs,
    *,
    v_nominal: float,
    tol: float = 1e-11,
    max_iter: int = 80,
    initial: Equilibrium | None = None,
) -> Equilibrium:
    """Solve inverter angles and the bus voltage for one control tick.

    The bus angle is the reference (fixed at zero). Unknowns are the inverter
    angles, the bus magnitude, and the common droop drop; equations are the
    complex current balance at the bus plus one proportional-sharing equation
    per inverter. Damped Newton with a finite-difference Jacobian.
    """
    n = len(v_setpoints)
    if n < 1:
        raise ValueError("at least one inverter is required")
    if len(lines) != n or len(freq_coeffs) != n:
        raise ValueError("mismatched inverter, line, and droop coefficient counts")

    v = np.asarray(v_setpoints, dtype=float)
    z = np.array([ln.to_complex() for ln in lines], dtype=complex)
    n_coeff = np.asarray(freq_coeffs, dtype=float)
    if np.any(v <= 0.0):
        raise ValueError("voltage set-points must be > 0")
    if np.any(n_coeff <= 0.0):
        raise ValueError("frequency droop coefficients must be > 0")

    s_load = load.to_complex()
    s_base = _power_scale(s_load)
    inv_coeff_sum = float(np.sum(1.0 / n_coeff))
    drop0 = load.active / inv_coeff_sum
    drop_scale = max(abs(drop0), 1.0)
    collapse_floor = 0.05 * v_nominal

    def residuals(x: np.ndarray) -> np.ndarray:
        theta = x[:n]
        u = x[n]
        drop = x[n + 1]
        e = v * np.exp(1j * theta)
        line_currents = (e - u) / z
        load_current = np.conj(s_load) / u  # bus angle is zero, so conj(u) == u
        s_mismatch = u * np.conj(np.sum(line_currents) - load_current)
        p = (e * np.conj(line_currents)).real
        out = np.empty(n + 2)
        out[0] = s_mismatch.real / s_base
        out[1] = s_mismatch.imag / s_base
        out[2:] = (n_coeff * p - drop) / drop_scale
        return out

    if initial is not None and len(initial.ibr_voltages) == n:
        x = np.empty(n + 2)
        x[:n] = [ph.angle for ph in initial.ibr_voltages]
        x[n] = initial.pcc_voltage.magnitude
        x[n + 1] = initial.freq_drop
    else:
        # Small-angle start from the lossless per-inverter power targets.
        p_targets = drop0 / n_coeff
        x = np.empty(n + 2)
        x[:n] = np.clip(p_targets * np.abs(z) / (v * v_nominal), -0.5, 0.5)
        x[n] = v_nominal
        x[n + 1] = drop0

    r = residuals(x)
    iterations = 0
    while np.max(np.abs(r)) > tol:
        iterations += 1
        if iterations > max_iter:
            raise PlantNonConvergence(
                f"equilibrium residual {np.max(np.abs(r)):.3g} after {max_iter} iterations"
            )
        jac = np.empty((n + 2, n + 2))
        for k in range(n + 2):
            h = 1e-7 * max(1.0, abs(x[k]))
            xh = x.copy()
            xh[k] += h
            jac[:, k] = (residuals(xh) - r) / h
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise PlantNonConvergence("singular Jacobian in equilibrium solve") from exc
        step = 1.0
        r_norm = np.linalg.norm(r)
        for _ in range(12):
            x_new = x + step * dx
            if x_new[n] < collapse_floor:
                step *= 0.5
                continue
            r_new = residuals(x_new)
            if np.linalg.norm(r_new) < r_norm or step < 1e-4:
                break
            step *= 0.5
        else:
            raise VoltageCollapse("equilibrium solve could not keep the bus voltage positive")
        x, r = x_new, r_new

    theta = x[:n]
    u = x[n]
    e = v * np.exp(1j * theta)
    line_currents = (e - u) / z
    s_injected = e * np.conj(line_currents)
    return Equilibrium(
        ibr_voltages=tuple(Phasor(float(m), float(a)) for m, a in zip(v, theta)),
        pcc_voltage=Phasor(float(u), 0.0),
        p_injected=tuple(float(p) for p in s_injected.real),
        q_injected=tuple(float(q) for q in s_injected.imag),
        freq_drop=float(x[n + 1]),
        residual=float(np.max(np.abs(r))),
        iterations=iterations,
    )

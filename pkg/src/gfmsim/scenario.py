"""Scenario configuration, the outer simulation loop, and log persistence.

A scenario couples the network model, the droop layer, and the distributed
secondary controller into a fixed-step run driven by a load-step schedule.
Per tick: apply due load events, solve the network equilibrium for the
current voltage set-points, advance the measurement filters, run the
secondary controller if enabled, then apply the voltage droop law for the
next tick. Runs are deterministic for a fixed configuration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .comm import CommGraph
from .consensus import ConsensusConfig
from .droop import (
    DroopParams,
    NominalSetpoints,
    TWO_PI,
    droop_frequency,
    droop_voltage,
    freq_coeff_from_hz_per_kw,
    volt_coeff_from_v_per_kvar,
)
from .network import (
    Equilibrium,
    Impedance,
    LoadDemand,
    PlantNonConvergence,
    lowpass_step,
    solve_equilibrium,
)
from .secondary import (
    CtrlParams,
    Objective,
    SecondaryState,
    adjustment,
    check_steady_state,
    local_target,
    mode_gains,
    secondary_tick,
)

EPSILON_FLOOR = 1e-12

CSV_COLUMNS = (
    "t",
    "ibr_id",
    "P_w",
    "Q_var",
    "V_volt",
    "omega_rad_s",
    "v_adj_volt",
    "x_est_volt",
    "pcc_v_volt",
    "load_p_w",
    "load_q_var",
    "consensus_rounds",
    "mode",
)


class ScenarioError(ValueError):
    """Configuration rejected at validation, with a field-level message."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class LoadEvent:
    """One step of the constant-power demand at the common bus (SI units)."""

    time: float
    active: float
    reactive: float


@dataclass(frozen=True)
class IbrSpec:
    """One inverter: droop gains, its line to the bus, and controller gains."""

    ibr_id: int
    droop: DroopParams
    line: Impedance
    objective: Objective
    ctrl: CtrlParams


@dataclass(frozen=True)
class Scenario:
    name: str
    nominal: NominalSetpoints
    ibrs: tuple[IbrSpec, ...]
    graph: CommGraph
    load_events: tuple[LoadEvent, ...]
    tick: float
    duration: float
    enable_time: float | None
    consensus: ConsensusConfig
    seed: int
    source: dict = field(repr=False)

    @property
    def n_ibrs(self) -> int:
        return len(self.ibrs)


def _require(config: dict, key: str, kind, where: str):
    if key not in config:
        raise ScenarioError(f"{where}{key}", "missing required field")
    value = config[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"{where}{key}", f"expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, kind):
        raise ScenarioError(f"{where}{key}", f"expected {kind.__name__}, got {value!r}")
    return value


def _positive(value: float, name: str) -> float:
    if not (math.isfinite(value) and value > 0.0):
        raise ScenarioError(name, f"must be finite and > 0, got {value}")
    return value


def scenario_from_config(config: dict) -> Scenario:
    """Validate a configuration mapping and build a runnable scenario.

    All boundary units are converted here: kW/kVAr loads, Hz frequencies,
    Hz/kW and V/kVAr droop gains become W, var, rad/s, and SI gains.
    """
    name = config.get("name", "scenario")
    nominal_cfg = _require(config, "nominal", dict, "")
    v_star = _positive(_require(nominal_cfg, "voltage_v", float, "nominal."), "nominal.voltage_v")
    f_star = _positive(_require(nominal_cfg, "frequency_hz", float, "nominal."), "nominal.frequency_hz")
    nominal = NominalSetpoints(omega=TWO_PI * f_star, voltage=v_star)

    ibr_cfgs = _require(config, "ibrs", list, "")
    if not ibr_cfgs:
        raise ScenarioError("ibrs", "at least one inverter is required")

    secondary_cfg = config.get("secondary")
    enable_time = None
    gamma = 0.01
    rho = None
    eps_target = 1e-4
    reset_period = None
    max_rounds = 20_000
    if secondary_cfg is not None:
        if not isinstance(secondary_cfg, dict):
            raise ScenarioError("secondary", f"expected an object, got {secondary_cfg!r}")
        enable_time = secondary_cfg.get("enable_time_s")
        if enable_time is not None:
            enable_time = float(enable_time)
            if not (math.isfinite(enable_time) and enable_time >= 0.0):
                raise ScenarioError("secondary.enable_time_s", f"must be >= 0, got {enable_time}")
        gamma = float(secondary_cfg.get("gamma", gamma))
        if not (math.isfinite(gamma) and gamma > 0.0):
            raise ScenarioError("secondary.gamma", f"must be finite and > 0, got {gamma}")
        rho = secondary_cfg.get("rho")
        eps_target = float(secondary_cfg.get("epsilon_target_v", eps_target))
        if not (math.isfinite(eps_target) and eps_target / 2.0 >= EPSILON_FLOOR):
            raise ScenarioError(
                "secondary.epsilon_target_v",
                f"must be >= {2 * EPSILON_FLOOR} so the per-tick tolerance stays above the numeric floor",
            )
        reset_period = secondary_cfg.get("reset_period")
        max_rounds = int(secondary_cfg.get("max_rounds", max_rounds))
        if max_rounds < 1:
            raise ScenarioError("secondary.max_rounds", f"must be >= 1, got {max_rounds}")
    if rho is None:
        rho = 1.0 / (1.0 + gamma)
    else:
        rho = float(rho)
        if not (0.0 < rho < 2.0 / (1.0 + gamma)):
            raise ScenarioError(
                "secondary.rho",
                f"must lie in (0, {2.0 / (1.0 + gamma):.6g}) for gamma={gamma}, got {rho}",
            )

    eps_tick = eps_target / 2.0

    ibrs = []
    seen_ids = set()
    for idx, ibr_cfg in enumerate(ibr_cfgs):
        where = f"ibrs[{idx}]."
        if not isinstance(ibr_cfg, dict):
            raise ScenarioError(f"ibrs[{idx}]", f"expected an object, got {ibr_cfg!r}")
        ibr_id = _require(ibr_cfg, "id", int, where)
        if ibr_id in seen_ids:
            raise ScenarioError(f"{where}id", f"duplicate inverter id {ibr_id}")
        seen_ids.add(ibr_id)
        n_hzkw = _positive(_require(ibr_cfg, "droop_n_hz_per_kw", float, where), f"{where}droop_n_hz_per_kw")
        m_vkvar = _positive(_require(ibr_cfg, "droop_m_v_per_kvar", float, where), f"{where}droop_m_v_per_kvar")
        tau = _positive(float(ibr_cfg.get("filter_tau_s", 0.1)), f"{where}filter_tau_s")
        r_ohm = float(ibr_cfg.get("line_r_ohm", 0.0))
        x_ohm = _require(ibr_cfg, "line_x_ohm", float, where)
        try:
            line = Impedance(r_ohm, x_ohm)
        except ValueError as exc:
            raise ScenarioError(f"{where}line_x_ohm", str(exc)) from None
        objective_raw = ibr_cfg.get("objective", "share_q")
        try:
            objective = Objective(objective_raw)
        except ValueError:
            raise ScenarioError(
                f"{where}objective", f"expected 'share_q' or 'regulate_v', got {objective_raw!r}"
            ) from None
        feedback_v, feedback_q = mode_gains(objective)
        if objective is Objective.REGULATE_V:
            for key in ("a_v", "a_q"):
                if float(ibr_cfg.get(key, 0.0)) != 0.0:
                    raise ScenarioError(f"{where}{key}", "must be 0 for a voltage-regulating inverter")
            a_v = a_q = 0.0
        else:
            a_v = float(ibr_cfg.get("a_v", 1.0))
            a_q = float(ibr_cfg.get("a_q", 1.0))
        ctrl = CtrlParams(
            target_v_gain=a_v,
            target_q_gain=a_q,
            feedback_v_gain=feedback_v,
            feedback_q_gain=feedback_q,
            step_size=rho,
            regularization=gamma,
            consensus_tol=eps_tick,
        )
        ibrs.append(
            IbrSpec(
                ibr_id=ibr_id,
                droop=DroopParams(
                    freq_coeff=freq_coeff_from_hz_per_kw(n_hzkw),
                    volt_coeff=volt_coeff_from_v_per_kvar(m_vkvar),
                    filter_tau=tau,
                ),
                line=line,
                objective=objective,
                ctrl=ctrl,
            )
        )

    id_to_node = {spec.ibr_id: node for node, spec in enumerate(ibrs, start=1)}
    edges_cfg = _require(config, "comm_edges", list, "")
    edges = []
    for idx, pair in enumerate(edges_cfg):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise ScenarioError(f"comm_edges[{idx}]", f"expected a [receiver, sender] pair, got {pair!r}")
        rcv, snd = pair
        for endpoint in (rcv, snd):
            if endpoint not in id_to_node:
                raise ScenarioError(f"comm_edges[{idx}]", f"unknown inverter id {endpoint}")
        if rcv == snd:
            raise ScenarioError(f"comm_edges[{idx}]", "self-loops are not allowed")
        edges.append((id_to_node[rcv], id_to_node[snd]))
    graph = CommGraph(len(ibrs), edges)
    if not graph.strongly_connected:
        raise ScenarioError("comm_edges", "communication graph must be strongly connected")

    if reset_period is None:
        reset_period = graph.diameter_hops
    else:
        reset_period = int(reset_period)
        if reset_period < graph.diameter_hops:
            raise ScenarioError(
                "secondary.reset_period",
                f"must be >= graph diameter {graph.diameter_hops}, got {reset_period}",
            )
    consensus_cfg = ConsensusConfig(epsilon=eps_tick, reset_period=reset_period, max_rounds=max_rounds)

    tick = _positive(_require(config, "tick_s", float, ""), "tick_s")
    duration = _positive(_require(config, "duration_s", float, ""), "duration_s")

    events_cfg = _require(config, "load_events", list, "")
    events = []
    prev_time = -math.inf
    for idx, ev in enumerate(events_cfg):
        where = f"load_events[{idx}]."
        if not isinstance(ev, dict):
            raise ScenarioError(f"load_events[{idx}]", f"expected an object, got {ev!r}")
        t_ev = _require(ev, "time_s", float, where)
        if not (math.isfinite(t_ev) and t_ev >= 0.0):
            raise ScenarioError(f"{where}time_s", f"must be >= 0, got {t_ev}")
        if t_ev <= prev_time:
            raise ScenarioError(f"{where}time_s", "event times must be strictly increasing")
        prev_time = t_ev
        p_kw = _require(ev, "active_kw", float, where)
        q_kvar = _require(ev, "reactive_kvar", float, where)
        if p_kw < 0.0:
            raise ScenarioError(f"{where}active_kw", f"must be >= 0, got {p_kw}")
        events.append(LoadEvent(time=t_ev, active=p_kw * 1e3, reactive=q_kvar * 1e3))
    if events and duration < events[-1].time:
        raise ScenarioError("duration_s", "duration must cover the last load event")
    if enable_time is not None and enable_time > duration:
        raise ScenarioError("secondary.enable_time_s", "must not exceed the run duration")

    return Scenario(
        name=str(name),
        nominal=nominal,
        ibrs=tuple(ibrs),
        graph=graph,
        load_events=tuple(events),
        tick=tick,
        duration=duration,
        enable_time=enable_time,
        consensus=consensus_cfg,
        seed=int(config.get("seed", 0)),
        source=config,
    )


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file (JSON)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("<file>", f"invalid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise ScenarioError("<file>", "top-level value must be an object")
    return scenario_from_config(config)


@dataclass(frozen=True)
class TickRow:
    """One logged (tick, inverter) sample; fields mirror the CSV columns."""

    t: float
    ibr_id: int
    p_w: float
    q_var: float
    v_volt: float
    omega_rad_s: float
    v_adj_volt: float
    x_est_volt: float
    pcc_v_volt: float
    load_p_w: float
    load_q_var: float
    consensus_rounds: int
    mode: str


@dataclass(frozen=True)
class TimeSeriesLog:
    scenario: Scenario
    rows: tuple[TickRow, ...]

    def times(self) -> np.ndarray:
        n = self.scenario.n_ibrs
        return np.array([row.t for row in self.rows[::n]])

    def series(self, column: str) -> np.ndarray:
        """Column values as an array of shape (n_ticks, n_ibrs)."""
        n = self.scenario.n_ibrs
        flat = np.array([getattr(row, column) for row in self.rows], dtype=float)
        return flat.reshape(-1, n)


@dataclass(frozen=True)
class TickSnapshot:
    """Full per-tick plant state handed to the optional run callback."""

    index: int
    t: float
    equilibrium: Equilibrium
    load: LoadDemand
    v_setpoints: tuple[float, ...]
    p_filtered: tuple[float, ...]
    q_filtered: tuple[float, ...]
    consensus_rounds: int


class RunAborted(RuntimeError):
    """A run stopped early; carries the partial log and the failing tick."""

    def __init__(self, message: str, partial: TimeSeriesLog, tick_index: int):
        super().__init__(message)
        self.partial = partial
        self.tick_index = tick_index


def run(scenario: Scenario, on_tick=None) -> TimeSeriesLog:
    """Execute a scenario and return the full log.

    Raises :class:`RunAborted` (wrapping the underlying plant or consensus
    failure) with the partial log attached if a tick cannot be solved.
    """
    n = scenario.n_ibrs
    nominal = scenario.nominal
    droops = [spec.droop for spec in scenario.ibrs]
    ctrls = [spec.ctrl for spec in scenario.ibrs]
    lines = [spec.line for spec in scenario.ibrs]
    freq_coeffs = [spec.droop.freq_coeff for spec in scenario.ibrs]
    modes = [spec.objective.value for spec in scenario.ibrs]

    v_set = [nominal.voltage] * n
    p_filt: list[float] | None = None
    q_filt: list[float] | None = None
    ctrl_states = [SecondaryState() for _ in range(n)]
    ctrl_ready = False

    load = LoadDemand(0.0, 0.0)
    pending = list(scenario.load_events)
    equilibrium: Equilibrium | None = None
    rows: list[TickRow] = []
    n_ticks = int(round(scenario.duration / scenario.tick)) + 1
    time_slack = 1e-9 * max(1.0, scenario.duration)

    for k in range(n_ticks):
        t = k * scenario.tick
        while pending and pending[0].time <= t + time_slack:
            ev = pending.pop(0)
            load = LoadDemand(ev.active, ev.reactive)

        try:
            equilibrium = solve_equilibrium(
                v_set, lines, load, freq_coeffs, v_nominal=nominal.voltage, initial=equilibrium
            )
        except PlantNonConvergence as exc:
            partial = TimeSeriesLog(scenario, tuple(rows))
            raise RunAborted(f"plant solve failed at tick {k} (t={t:.6g} s): {exc}", partial, k) from exc

        if p_filt is None:
            p_filt = list(equilibrium.p_injected)
            q_filt = list(equilibrium.q_injected)
        else:
            for i in range(n):
                tau = droops[i].filter_tau
                p_filt[i] = lowpass_step(p_filt[i], equilibrium.p_injected[i], tau, scenario.tick)
                q_filt[i] = lowpass_step(q_filt[i], equilibrium.q_injected[i], tau, scenario.tick)

        secondary_on = scenario.enable_time is not None and t >= scenario.enable_time - time_slack
        rounds = 0
        if secondary_on:
            measurements = list(zip(v_set, q_filt))
            if not ctrl_ready:
                ctrl_states = [
                    SecondaryState(estimate=0.0, target=local_target(c, d, nominal, v, q))
                    for c, d, (v, q) in zip(ctrls, droops, measurements)
                ]
                ctrl_ready = True
            try:
                ctrl_states, rounds = secondary_tick(
                    ctrl_states, measurements, ctrls, droops, nominal, scenario.graph, scenario.consensus
                )
            except RuntimeError as exc:
                partial = TimeSeriesLog(scenario, tuple(rows))
                raise RunAborted(
                    f"secondary controller failed at tick {k} (t={t:.6g} s): {exc}", partial, k
                ) from exc
            for i, st in enumerate(ctrl_states):
                st.correction = adjustment(ctrls[i], droops[i], nominal, st.estimate, v_set[i], q_filt[i])

        for i in range(n):
            rows.append(
                TickRow(
                    t=t,
                    ibr_id=scenario.ibrs[i].ibr_id,
                    p_w=p_filt[i],
                    q_var=q_filt[i],
                    v_volt=v_set[i],
                    omega_rad_s=droop_frequency(droops[i], nominal, p_filt[i]),
                    v_adj_volt=ctrl_states[i].correction if secondary_on else 0.0,
                    x_est_volt=ctrl_states[i].estimate if secondary_on else 0.0,
                    pcc_v_volt=equilibrium.pcc_voltage.magnitude,
                    load_p_w=load.active,
                    load_q_var=load.reactive,
                    consensus_rounds=rounds,
                    mode=modes[i],
                )
            )

        if on_tick is not None:
            on_tick(
                TickSnapshot(
                    index=k,
                    t=t,
                    equilibrium=equilibrium,
                    load=load,
                    v_setpoints=tuple(v_set),
                    p_filtered=tuple(p_filt),
                    q_filtered=tuple(q_filt),
                    consensus_rounds=rounds,
                )
            )

        for i in range(n):
            corr = ctrl_states[i].correction if secondary_on else 0.0
            v_set[i] = droop_voltage(droops[i], nominal, q_filt[i], corr)

    return TimeSeriesLog(scenario, tuple(rows))


def emit_csv(log: TimeSeriesLog, out_path) -> Path:
    """Write a log as CSV: config echo in '#' comments, then one header row
    and one data row per (tick, inverter), 9-significant-digit numbers."""
    if not log.rows:
        raise ValueError("refusing to write an empty log")
    out_path = Path(out_path)

    def fmt(x: float) -> str:
        return format(x, ".9g")

    lines = [
        f"# scenario: {log.scenario.name}",
        f"# config: {json.dumps(log.scenario.source, sort_keys=True, separators=(',', ':'))}",
        ",".join(CSV_COLUMNS),
    ]
    for row in log.rows:
        lines.append(
            ",".join(
                (
                    fmt(row.t),
                    str(row.ibr_id),
                    fmt(row.p_w),
                    fmt(row.q_var),
                    fmt(row.v_volt),
                    fmt(row.omega_rad_s),
                    fmt(row.v_adj_volt),
                    fmt(row.x_est_volt),
                    fmt(row.pcc_v_volt),
                    fmt(row.load_p_w),
                    fmt(row.load_q_var),
                    str(row.consensus_rounds),
                    row.mode,
                )
            )
        )
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out_path


def steady_state_report(
    log: TimeSeriesLog,
    *,
    at_time: float | None = None,
    window: float = 1.0,
    settle_tol: float = 5e-3,
    share_tol: float = 0.01,
    volt_tol: float = 0.5,
):
    """Objective check over a settled window ending at ``at_time``.

    The window must show no set-point drift beyond ``settle_tol`` volts per
    tick, otherwise the system is still moving and the check is refused.
    """
    times = log.times()
    end = times[-1] if at_time is None else at_time
    window_idx = np.nonzero((times <= end + 1e-9) & (times >= end - window - 1e-9))[0]
    if len(window_idx) < 2:
        raise RuntimeError(f"steady-state window ending at t={end:.6g} s has too few ticks")
    v = log.series("v_volt")[window_idx]
    drift = np.max(np.abs(np.diff(v, axis=0)))
    if drift > settle_tol:
        raise RuntimeError(
            f"steady state not reached: set-points still move {drift:.3g} V/tick at t={end:.6g} s"
        )
    last = window_idx[-1]
    q = log.series("q_var")[last]
    v_final = v[-1]
    return check_steady_state(
        [spec.objective for spec in log.scenario.ibrs],
        v_final,
        q,
        [spec.droop for spec in log.scenario.ibrs],
        log.scenario.nominal,
        share_tol=share_tol,
        volt_tol=volt_tol,
    )

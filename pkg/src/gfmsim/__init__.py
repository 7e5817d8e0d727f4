"""Islanded-microgrid simulator: droop-controlled grid-forming inverters with
a distributed secondary controller for reactive power sharing and voltage
regulation."""

from .comm import CommGraph, GraphError, RoundMessage, broadcast_round, diameter, is_strongly_connected
from .consensus import (
    ConsensusConfig,
    ConsensusNonTermination,
    ConsensusResult,
    NodeState,
    ProtocolViolation,
    run_consensus,
)
from .droop import (
    DroopParams,
    NominalSetpoints,
    droop_frequency,
    droop_voltage,
    steady_state_frequency,
)
from .network import (
    Equilibrium,
    Impedance,
    LoadDemand,
    NetworkSolution,
    Phasor,
    PlantNonConvergence,
    VoltageCollapse,
    lowpass_step,
    solve_equilibrium,
    solve_network,
)
from .presets import preset_config
from .scenario import (
    RunAborted,
    Scenario,
    ScenarioError,
    TimeSeriesLog,
    emit_csv,
    load_scenario,
    run,
    scenario_from_config,
    steady_state_report,
)
from .secondary import (
    CtrlParams,
    Objective,
    SecondaryState,
    adjustment,
    centralized_optimum,
    check_steady_state,
    descent_step,
    local_target,
    secondary_tick,
)

__version__ = "0.1.0"

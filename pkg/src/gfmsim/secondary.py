"""Distributed secondary voltage controller.

Each tick the inverters implicitly share one regularized tracking problem:
find the common set-point closest to everyone's local target term. Every
controller takes a gradient step on its own cost and the network agrees on
the result via approximate consensus, so only nonlinear estimates ever cross
the communication graph. The agreed set-point feeds a local adjustment that
is added on top of the voltage droop law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .comm import CommGraph
from .consensus import ConsensusConfig, run_consensus
from .droop import DroopParams, NominalSetpoints


class Objective(str, Enum):
    """Per-inverter steady-state goal."""

    SHARE_Q = "share_q"
    REGULATE_V = "regulate_v"


@dataclass(frozen=True)
class CtrlParams:
    """Controller gains for one inverter.

    ``target_*_gain`` weight the voltage deviation and the per-unit reactive
    output inside the shared target term; ``feedback_*_gain`` shape the local
    adjustment. ``step_size`` must stay inside (0, 2/(1+regularization)) for
    the mean estimate dynamics to contract.
    """

    target_v_gain: float
    target_q_gain: float
    feedback_v_gain: float
    feedback_q_gain: float
    step_size: float
    regularization: float
    consensus_tol: float

    def __post_init__(self):
        if not (math.isfinite(self.regularization) and self.regularization > 0.0):
            raise ValueError(f"regularization must be finite and > 0, got {self.regularization}")
        bound = 2.0 / (1.0 + self.regularization)
        if not (0.0 < self.step_size < bound):
            raise ValueError(
                f"step size must lie in (0, {bound:.6g}), got {self.step_size}"
            )
        if not (math.isfinite(self.consensus_tol) and self.consensus_tol > 0.0):
            raise ValueError(f"consensus tolerance must be finite and > 0, got {self.consensus_tol}")


def mode_gains(objective: Objective) -> tuple[float, float]:
    """Feedback gains ``(feedback_v, feedback_q)`` pinned by the objective."""
    if objective is Objective.SHARE_Q:
        return 1.0, 0.0
    return 0.0, 1.0


@dataclass(slots=True)
class SecondaryState:
    """Per-inverter controller memory between ticks (all volts)."""

    estimate: float = 0.0
    target: float = 0.0
    correction: float = 0.0


def local_target(
    params: CtrlParams,
    droop: DroopParams,
    nominal: NominalSetpoints,
    v_meas: float,
    q_filtered: float,
) -> float:
    """Local contribution to the shared tracking target."""
    return (
        params.target_v_gain * (nominal.voltage - v_meas)
        + params.target_q_gain * droop.volt_coeff * q_filtered
    )


def centralized_optimum(targets, regularization: float) -> float:
    """Closed-form minimizer of the shared tracking problem.

    With one common set-point, the summed quadratic costs are minimized at the
    target mean shrunk by the regularization.
    """
    values = list(targets)
    if not values:
        raise ValueError("at least one target is required")
    return sum(values) / (len(values) * (1.0 + regularization))


def descent_step(estimate: float, target: float, step_size: float, regularization: float) -> float:
    """One gradient-descent step on the local tracking cost."""
    return estimate - step_size * ((1.0 + regularization) * estimate - target)


def secondary_tick(
    states,
    measurements,
    params_by_ibr,
    droop_by_ibr,
    nominal: NominalSetpoints,
    graph: CommGraph,
    consensus_cfg: ConsensusConfig,
):
    """Advance all controllers one tick.

    Sequence: local descent step on the previous targets, network-wide
    agreement on the post-step estimates, then a target refresh from the
    current measurements. Returns ``(new_states, consensus_rounds)``; the
    returned estimates are pairwise within the consensus tolerance.
    """
    n = len(states)
    if not (len(measurements) == len(params_by_ibr) == len(droop_by_ibr) == n):
        raise ValueError("per-inverter inputs must have equal length")
    post_step = [
        descent_step(st.estimate, st.target, p.step_size, p.regularization)
        for st, p in zip(states, params_by_ibr)
    ]
    agreed = run_consensus(post_step, graph, consensus_cfg)
    new_states = []
    for st, p, d, (v_meas, q_filt), estimate in zip(
        states, params_by_ibr, droop_by_ibr, measurements, agreed.values
    ):
        new_states.append(
            SecondaryState(
                estimate=estimate,
                target=local_target(p, d, nominal, v_meas, q_filt),
                correction=st.correction,
            )
        )
    return new_states, agreed.rounds


def adjustment(
    params: CtrlParams,
    droop: DroopParams,
    nominal: NominalSetpoints,
    estimate: float,
    v_meas: float,
    q_filtered: float,
) -> float:
    """Voltage correction layered on top of the droop law."""
    return (
        estimate
        + params.feedback_q_gain * droop.volt_coeff * q_filtered
        - params.feedback_v_gain * (nominal.voltage - v_meas)
    )


@dataclass(frozen=True)
class SteadyStateReport:
    """Objective verification at one operating point.

    ``share_spread_rel`` is (max - min)/mean of the per-unit reactive outputs
    over the sharing group; ``volt_max_dev`` is the worst |V - nominal| over
    the regulating group. Either is None when its group is empty.
    """

    share_members: tuple[int, ...]
    regulate_members: tuple[int, ...]
    share_spread_rel: float | None
    volt_max_dev: float | None
    share_tol: float
    volt_tol: float
    ok: bool


def check_steady_state(
    objectives,
    v_by_ibr,
    q_by_ibr,
    droop_by_ibr,
    nominal: NominalSetpoints,
    *,
    share_tol: float = 0.01,
    volt_tol: float = 0.5,
) -> SteadyStateReport:
    """Verify each group's configured objective on final measurements."""
    share_idx = tuple(i for i, o in enumerate(objectives) if o is Objective.SHARE_Q)
    reg_idx = tuple(i for i, o in enumerate(objectives) if o is Objective.REGULATE_V)

    share_spread = None
    if share_idx:
        scaled = [droop_by_ibr[i].volt_coeff * q_by_ibr[i] for i in share_idx]
        mean = sum(scaled) / len(scaled)
        if mean == 0.0:
            share_spread = 0.0 if max(scaled) == min(scaled) else math.inf
        else:
            share_spread = (max(scaled) - min(scaled)) / abs(mean)

    volt_dev = None
    if reg_idx:
        volt_dev = max(abs(v_by_ibr[i] - nominal.voltage) for i in reg_idx)

    ok = (share_spread is None or share_spread <= share_tol) and (
        volt_dev is None or volt_dev <= volt_tol
    )
    return SteadyStateReport(
        share_members=share_idx,
        regulate_members=reg_idx,
        share_spread_rel=share_spread,
        volt_max_dev=volt_dev,
        share_tol=share_tol,
        volt_tol=volt_tol,
        ok=ok,
    )

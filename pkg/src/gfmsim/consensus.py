"""Approximate average consensus on a digraph with distributed termination.

Each node tracks a mass/weight pair whose ratio converges to the average of
the initial values (ratio consensus, a push-sum scheme that needs only
column-stochastic mixing, so it works on directed graphs). Termination is
detected locally: max/min envelopes of the ratio are flooded for one reset
period, and a node halts once its envelopes agree within epsilon. Because the
reset period is at least the graph diameter, the envelopes seen at a check
equal the global ratio spread at the previous reseed, so all nodes halt in
the same cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .comm import CommGraph, GraphError, RoundMessage, broadcast_round


class ProtocolViolation(RuntimeError):
    """An internal protocol invariant broke (indicates a graph/weight bug)."""


class ConsensusNonTermination(RuntimeError):
    """The round budget ran out before every node halted."""


@dataclass(slots=True)
class NodeState:
    """Per-node protocol state.

    ``ratio`` is the running average estimate; ``env_max``/``env_min`` are the
    flooded envelopes of the ratios snapshotted at the last reseed.
    """

    mass: float
    weight: float
    ratio: float
    env_max: float
    env_min: float
    rounds_since_reset: int = 0


@dataclass(frozen=True)
class ConsensusConfig:
    """Protocol tuning: agreement tolerance, reseed cadence, round budget."""

    epsilon: float
    reset_period: int
    max_rounds: int = 100_000

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if self.reset_period < 1:
            raise ValueError(f"reset period must be >= 1, got {self.reset_period}")
        if self.max_rounds < 1:
            raise ValueError(f"max rounds must be >= 1, got {self.max_rounds}")


def init_states(values) -> list[NodeState]:
    """Start every node at its own value with unit weight."""
    return [
        NodeState(mass=float(v), weight=1.0, ratio=float(v), env_max=float(v), env_min=float(v))
        for v in values
    ]


def mix_round(states, graph: CommGraph) -> list[NodeState]:
    """One synchronous mixing round.

    Every node keeps 1/(out_degree+1) of its mass and weight and ships the
    same share to each listener, then re-derives its ratio. Total mass and
    weight are conserved exactly up to rounding.
    """
    outgoing = {}
    for node, st in zip(graph.nodes, states):
        share = 1.0 / (graph.out_degree(node) + 1)
        outgoing[node] = RoundMessage(node, st.mass * share, st.weight * share)
    inboxes = broadcast_round(graph, outgoing)
    new_states = []
    for node, st in zip(graph.nodes, states):
        kept = outgoing[node]
        mass = kept.mass_share + sum(m.mass_share for m in inboxes[node])
        weight = kept.weight_share + sum(m.weight_share for m in inboxes[node])
        if weight <= 0.0:
            raise ProtocolViolation(f"node {node} weight fell to {weight}")
        new_states.append(
            NodeState(
                mass=mass,
                weight=weight,
                ratio=mass / weight,
                env_max=st.env_max,
                env_min=st.env_min,
                rounds_since_reset=st.rounds_since_reset,
            )
        )
    return new_states


def maxmin_round(states, graph: CommGraph) -> list[NodeState]:
    """Flood the envelopes one hop: extremes over self plus the receive set."""
    by_node = dict(zip(graph.nodes, states))
    new_states = []
    for node, st in zip(graph.nodes, states):
        peers = [by_node[j] for j in graph.receives_from(node)]
        env_max = max(st.env_max, *(p.env_max for p in peers)) if peers else st.env_max
        env_min = min(st.env_min, *(p.env_min for p in peers)) if peers else st.env_min
        new_states.append(
            NodeState(
                mass=st.mass,
                weight=st.weight,
                ratio=st.ratio,
                env_max=env_max,
                env_min=env_min,
                rounds_since_reset=st.rounds_since_reset,
            )
        )
    return new_states


def detect_and_reset(states, config: ConsensusConfig):
    """Advance the reset counter; at the cadence boundary, check and reseed.

    A node raises its halt flag when its flooded envelopes agree within
    epsilon; otherwise it reseeds both envelopes from its current ratio.
    Returns ``(states, halt_flags)``.
    """
    halts = [False] * len(states)
    new_states = []
    for idx, st in enumerate(states):
        count = st.rounds_since_reset + 1
        if count < config.reset_period:
            new_states.append(
                NodeState(st.mass, st.weight, st.ratio, st.env_max, st.env_min, count)
            )
            continue
        if abs(st.env_max - st.env_min) <= config.epsilon:
            halts[idx] = True
            new_states.append(NodeState(st.mass, st.weight, st.ratio, st.env_max, st.env_min, 0))
        else:
            new_states.append(NodeState(st.mass, st.weight, st.ratio, st.ratio, st.ratio, 0))
    return new_states, tuple(halts)


@dataclass(frozen=True)
class ConsensusResult:
    values: tuple[float, ...]
    rounds: int


def run_consensus(values, graph: CommGraph, config: ConsensusConfig) -> ConsensusResult:
    """Run the protocol until every node halts in the same check.

    At the halt round every returned value is within epsilon of the mean of
    ``values`` and any two returned values are within epsilon of each other.
    """
    if len(values) != graph.node_count:
        raise ValueError(f"expected {graph.node_count} values, got {len(values)}")
    if not graph.strongly_connected:
        raise GraphError("consensus requires a strongly connected graph")
    if config.reset_period < graph.diameter_hops:
        raise ValueError(
            f"reset period {config.reset_period} is below the graph diameter {graph.diameter_hops}"
        )
    states = init_states(values)
    for round_no in range(1, config.max_rounds + 1):
        states = mix_round(states, graph)
        states = maxmin_round(states, graph)
        states, halts = detect_and_reset(states, config)
        if all(halts):
            return ConsensusResult(tuple(st.ratio for st in states), round_no)
    raise ConsensusNonTermination(
        f"no agreement within epsilon={config.epsilon} after {config.max_rounds} rounds"
    )

"""Directed communication graph and a synchronous-round message bus.

Edge convention: edge ``(i, j)`` means node ``i`` receives from node ``j``,
so information flows ``j -> i``. Rounds are lockstep: every node's outgoing
message is delivered to all of its listeners with no loss or reordering.
A graph instance belongs to one simulation; rounds are pure functions of
their inputs, so distinct simulations can run in parallel.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property


class GraphError(ValueError):
    """A graph precondition does not hold (e.g. not strongly connected)."""


class CommGraph:
    """Directed graph on nodes 1..node_count with the receive-edge convention."""

    def __init__(self, node_count: int, edges):
        if node_count < 1:
            raise GraphError(f"node count must be >= 1, got {node_count}")
        edge_set = set()
        for edge in edges:
            i, j = edge
            if i == j:
                raise GraphError(f"self-loop ({i}, {j}) is not allowed")
            if not (1 <= i <= node_count and 1 <= j <= node_count):
                raise GraphError(f"edge ({i}, {j}) references a node outside 1..{node_count}")
            edge_set.add((int(i), int(j)))
        self.node_count = int(node_count)
        self.edges = tuple(sorted(edge_set))
        recv: dict[int, list[int]] = {i: [] for i in self.nodes}
        send: dict[int, list[int]] = {i: [] for i in self.nodes}
        for i, j in self.edges:
            recv[i].append(j)
            send[j].append(i)
        self._recv = {i: tuple(sorted(v)) for i, v in recv.items()}
        self._send = {i: tuple(sorted(v)) for i, v in send.items()}

    @property
    def nodes(self) -> range:
        return range(1, self.node_count + 1)

    def receives_from(self, node: int) -> tuple[int, ...]:
        """Nodes whose messages reach ``node`` each round."""
        return self._recv[node]

    def sends_to(self, node: int) -> tuple[int, ...]:
        """Nodes that receive ``node``'s message each round."""
        return self._send[node]

    def out_degree(self, node: int) -> int:
        return len(self._send[node])

    def _flow_distances(self, source: int) -> dict[int, int]:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self._send[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    @cached_property
    def strongly_connected(self) -> bool:
        return all(len(self._flow_distances(s)) == self.node_count for s in self.nodes)

    @cached_property
    def diameter_hops(self) -> int:
        if not self.strongly_connected:
            raise GraphError("diameter is undefined: graph is not strongly connected")
        return max(max(self._flow_distances(s).values()) for s in self.nodes)


def is_strongly_connected(graph: CommGraph) -> bool:
    """True iff a directed path connects every ordered pair of nodes."""
    return graph.strongly_connected


def diameter(graph: CommGraph) -> int:
    """Longest shortest directed path over all ordered node pairs."""
    return graph.diameter_hops


@dataclass(frozen=True)
class RoundMessage:
    """One node's per-round broadcast: its scaled mass and weight shares."""

    sender: int
    mass_share: float
    weight_share: float


def broadcast_round(graph: CommGraph, outgoing) -> dict[int, tuple[RoundMessage, ...]]:
    """Deliver each node's message to every listener, one synchronous round.

    ``outgoing`` maps node id to its message. Returns each node's inbox in
    ascending sender order; delivery is exact (no loss, no duplication).
    """
    if set(outgoing) != set(graph.nodes):
        raise ValueError("exactly one outgoing message per node is required")
    return {i: tuple(outgoing[j] for j in graph.receives_from(i)) for i in graph.nodes}

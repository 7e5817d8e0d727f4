"""Shared test helpers: oracles, random graphs, and mini scenarios."""

from __future__ import annotations

import numpy as np

from gfmsim.comm import CommGraph


def balance_mismatch_pu(ibr_voltages, lines, load, pcc_voltage):
    """Independent oracle: complex power retained at the bus after serving the
    load, recomputed from first principles (phasors -> line currents -> sent
    power minus series losses), relative to the load apparent power."""
    u = pcc_voltage.to_complex()
    total = 0.0 + 0.0j
    for v, ln in zip(ibr_voltages, lines):
        e = v.to_complex()
        z = ln.to_complex()
        current = (e - u) / z
        sent = e * current.conjugate()
        lost = (abs(current) ** 2) * z
        total += sent - lost
    mismatch = total - load.to_complex()
    return abs(mismatch) / max(abs(load.to_complex()), 1.0)


def random_strongly_connected(n: int, rng: np.random.Generator, extra_edge_prob: float = 0.3) -> CommGraph:
    """Directed cycle (guarantees strong connectivity) plus random chords."""
    edges = [(i % n + 1, i) for i in range(1, n + 1)]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i != j and rng.random() < extra_edge_prob:
                edges.append((i, j))
    return CommGraph(n, edges)


def flow_ring(n: int) -> CommGraph:
    """Ring where node i's message reaches i+1 (mod n)."""
    return CommGraph(n, [(i % n + 1, i) for i in range(1, n + 1)])


def flow_distances(graph: CommGraph, source: int) -> dict[int, int]:
    """Independent BFS oracle over the message-flow direction."""
    # Recompute successor sets from the raw edge list: (i, j) means j -> i.
    succ: dict[int, list[int]] = {i: [] for i in graph.nodes}
    for i, j in graph.edges:
        succ[j].append(i)
    dist = {source: 0}
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in succ[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    return dist


def bfs_diameter(graph: CommGraph) -> int:
    dists = [flow_distances(graph, s) for s in graph.nodes]
    assert all(len(d) == graph.node_count for d in dists), "graph not strongly connected"
    return max(max(d.values()) for d in dists)


def mini_scenario_config(
    n: int = 3,
    *,
    duration: float = 2.0,
    tick: float = 0.05,
    load_events=None,
    enable_time=None,
    objectives=None,
    line_x=None,
    m_v_per_kvar: float = 0.003,
) -> dict:
    """Small hand-sized scenario used across the unit tests."""
    if objectives is None:
        objectives = ["share_q"] * n
    if line_x is None:
        line_x = [0.004 + 0.002 * i for i in range(n)]
    edges = sorted(
        [[i % n + 1, i] for i in range(1, n + 1)] + [[(i + 1) % n + 1, i] for i in range(1, n + 1)]
        if n > 2
        else [[1, 2], [2, 1]]
    )
    return {
        "name": f"mini{n}",
        "nominal": {"voltage_v": 240.0, "frequency_hz": 60.0},
        "ibrs": [
            {
                "id": i + 1,
                "droop_n_hz_per_kw": 0.004,
                "droop_m_v_per_kvar": m_v_per_kvar,
                "filter_tau_s": 0.1,
                "line_r_ohm": 0.0,
                "line_x_ohm": line_x[i],
                "objective": objectives[i],
                **({"a_v": 0.5, "a_q": 1.0} if objectives[i] == "share_q" else {}),
            }
            for i in range(n)
        ],
        "comm_edges": edges,
        "secondary": {
            "enable_time_s": enable_time,
            "gamma": 0.01,
            "epsilon_target_v": 1e-4,
            "max_rounds": 20000,
        },
        "tick_s": tick,
        "duration_s": duration,
        "load_events": load_events if load_events is not None else [],
        "seed": 0,
    }

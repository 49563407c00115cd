"""Shared scenario builders for engine, harness, and acceptance tests."""

from __future__ import annotations

import random

from anttora.scenario import Scenario, parse_scenario


def scenario_dict(n, edges, flows=(), **overrides) -> dict:
    data = {
        "nodes": {"count": n, "initial_energy": 100.0},
        "topology": {"mode": "static", "adjacency": [list(e) for e in edges]},
        "traffic": [dict(f) for f in flows],
        "end_time_s": 8.0,
        "seed": 1,
    }
    data.update(overrides)
    return data


def static_scenario(n, edges, flows=(), **overrides) -> Scenario:
    return parse_scenario(scenario_dict(n, edges, flows, **overrides))


def flow(source, destination, rate=2.0, bits=1000, start=2.0, stop=4.0) -> dict:
    return {
        "source": source,
        "destination": destination,
        "rate_pps": rate,
        "packet_bits": bits,
        "start_s": start,
        "stop_s": stop,
    }


def connected_random_graph(n: int, p: float, seed: int) -> list[tuple[int, int]]:
    """Deterministic Erdos-Renyi graph, resampled until connected."""
    rng = random.Random(seed)
    while True:
        edges = [
            (a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p
        ]
        if _connected(n, edges):
            return edges


def _connected(n: int, edges: list[tuple[int, int]]) -> bool:
    if n == 0:
        return True
    adj = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {0}, [0]
    while stack:
        for j in adj[stack.pop()]:
            if j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == n

"""Pheromone arithmetic and QoS path scoring.

A discovered path is summarized by five aggregated quantities (delay,
bandwidth, residual energy, drain rate, hop count). Replies deposit
pheromone on the link they arrived over, scaled by path quality; pheromone
decays both at update time (persistence factor) and on a periodic
evaporation timer. Next-hop choice ranks candidates by a normalized product
of pheromone and the path metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

NORMAL_FLOOR = 1e-6


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class PathMetrics:
    """Aggregated QoS quantities of one path between distinct endpoints.

    delay sums link transmission+propagation and node processing delays;
    bandwidth is the minimum over links; energy the minimum residual over
    nodes; drain_rate the maximum dissipation rate over nodes; hop_count
    counts the nodes in the path, endpoints included.
    """

    delay: float
    bandwidth: float
    energy: float
    drain_rate: float
    hop_count: int

    def __post_init__(self) -> None:
        for name in ("delay", "bandwidth", "energy", "drain_rate"):
            _require_finite(name, getattr(self, name))
        if self.delay <= 0:
            raise ValueError(f"delay must be positive, got {self.delay}")
        if self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.energy < 0:
            raise ValueError(f"energy must be nonnegative, got {self.energy}")
        if self.drain_rate < 0:
            raise ValueError(f"drain_rate must be nonnegative, got {self.drain_rate}")
        if self.hop_count < 2:
            raise ValueError(f"a path joins at least 2 nodes, got {self.hop_count}")


@dataclass(frozen=True)
class DepositWeights:
    """Exponents weighting each metric in the pheromone deposit ratio."""

    bandwidth: float = 1.0
    energy: float = 1.0
    delay: float = 1.0
    hop_count: float = 1.0
    drain_rate: float = 1.0

    def __post_init__(self) -> None:
        for name in ("bandwidth", "energy", "delay", "hop_count", "drain_rate"):
            v = getattr(self, name)
            _require_finite(name, v)
            if v < 0:
                raise ValueError(f"deposit weight {name} must be >= 0, got {v}")


@dataclass(frozen=True)
class PreferenceWeights:
    """Exponents for next-hop preference, plus the two decay factors.

    ``persistence`` scales old pheromone at deposit time (in (0, 1));
    ``decay`` is the fraction evaporated on each evaporation tick (in
    (0, 1]).
    """

    pheromone: float = 1.0
    delay: float = 1.0
    hop_count: float = 1.0
    bandwidth: float = 1.0
    energy: float = 1.0
    drain_rate: float = 1.0
    persistence: float = 0.7
    decay: float = 0.1

    def __post_init__(self) -> None:
        for name in ("pheromone", "delay", "hop_count", "bandwidth", "energy", "drain_rate"):
            v = getattr(self, name)
            _require_finite(name, v)
            if v < 0:
                raise ValueError(f"preference weight {name} must be >= 0, got {v}")
        if not 0.0 < self.persistence < 1.0:
            raise ValueError(f"persistence must be in (0, 1), got {self.persistence}")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"decay must be in (0, 1], got {self.decay}")


@dataclass(frozen=True)
class NormalizationBounds:
    """Per-scenario reference ranges mapping raw metrics into [floor, 1].

    The deposit ratio mixes quantities of different units; each metric is
    min-max scaled against these bounds (and clamped) before entering it.
    """

    delay: tuple[float, float] = (1e-4, 1.0)
    bandwidth: tuple[float, float] = (1e3, 1e7)
    energy: tuple[float, float] = (1e-3, 100.0)
    drain_rate: tuple[float, float] = (1e-6, 1.0)
    hop_count: tuple[float, float] = (2.0, 32.0)

    def __post_init__(self) -> None:
        for name in ("delay", "bandwidth", "energy", "drain_rate", "hop_count"):
            lo, hi = getattr(self, name)
            _require_finite(name, lo)
            _require_finite(name, hi)
            if not lo < hi:
                raise ValueError(f"bounds for {name} need lo < hi, got ({lo}, {hi})")


def normalize(value: float, lo: float, hi: float, floor: float = NORMAL_FLOOR) -> float:
    """Min-max scale ``value`` into [floor, 1], clamping outside [lo, hi]."""
    x = (value - lo) / (hi - lo)
    x = min(1.0, max(0.0, x))
    return floor + (1.0 - floor) * x


@dataclass(frozen=True)
class CandidateEntry:
    """One next-hop option: its link pheromone plus full-path metrics."""

    next_hop: int
    tau: float
    metrics: PathMetrics


def aggregate_metrics(
    link_delays: Sequence[float],
    node_delays: Sequence[float],
    link_bandwidths: Sequence[float],
    node_energies: Sequence[float],
    node_drain_rates: Sequence[float],
    node_count: int,
) -> PathMetrics:
    """Fold per-link and per-node values into one PathMetrics.

    Delay adds up, bandwidth and energy take the bottleneck minimum, drain
    rate the worst-node maximum, hop count is the number of nodes.
    """
    if node_count < 2:
        raise ValueError(f"a path needs at least 2 nodes, got {node_count}")
    if not link_delays or not node_delays or not link_bandwidths:
        raise ValueError("link and node lists must be nonempty")
    if not node_energies or not node_drain_rates:
        raise ValueError("link and node lists must be nonempty")
    if len(link_delays) != node_count - 1 or len(link_bandwidths) != node_count - 1:
        raise ValueError("per-link lists must have node_count - 1 entries")
    if len(node_delays) != node_count or len(node_energies) != node_count:
        raise ValueError("per-node lists must have node_count entries")
    if len(node_drain_rates) != node_count:
        raise ValueError("per-node lists must have node_count entries")
    for seq in (link_delays, node_delays, link_bandwidths, node_energies, node_drain_rates):
        for v in seq:
            _require_finite("path component", v)
    if any(b <= 0 for b in link_bandwidths):
        raise ValueError("link bandwidths must be positive")
    return PathMetrics(
        delay=sum(link_delays) + sum(node_delays),
        bandwidth=min(link_bandwidths),
        energy=min(node_energies),
        drain_rate=max(node_drain_rates),
        hop_count=node_count,
    )


def deposit_ratio(
    bandwidth: float,
    energy: float,
    delay: float,
    hop_count: float,
    drain_rate: float,
    w: DepositWeights,
) -> float:
    """Quality ratio rewarding bandwidth and energy, punishing the rest.

    All five inputs are expected to be dimensionless (already normalized).
    """
    num = bandwidth**w.bandwidth + energy**w.energy
    den = delay**w.delay + hop_count**w.hop_count + drain_rate**w.drain_rate
    if den <= 0.0:
        raise ValueError("deposit denominator must be positive")
    return num / den


def pheromone_deposit(m: PathMetrics, w: DepositWeights, bounds: NormalizationBounds) -> float:
    """Pheromone quantity earned by a discovered path of quality ``m``."""
    return deposit_ratio(
        normalize(m.bandwidth, *bounds.bandwidth),
        normalize(m.energy, *bounds.energy),
        normalize(m.delay, *bounds.delay),
        normalize(float(m.hop_count), *bounds.hop_count),
        normalize(m.drain_rate, *bounds.drain_rate),
        w,
    )


def pheromone_update(tau: float, rho: float, delta_tau: float) -> float:
    """Reinforce a link: persistence-scaled old pheromone plus the deposit."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"persistence must be in (0, 1), got {rho}")
    if tau < 0 or delta_tau < 0:
        raise ValueError("pheromone and deposit must be nonnegative")
    return rho * tau + delta_tau


def evaporate(tau: float, q: float) -> float:
    """Periodic decay keeping stale links from dominating forever."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"decay must be in (0, 1], got {q}")
    if tau < 0:
        raise ValueError("pheromone must be nonnegative")
    return (1.0 - q) * tau


def path_preference(
    candidates: Sequence[CandidateEntry], w: PreferenceWeights
) -> list[tuple[int, float]]:
    """Probability of choosing each next hop, proportional to a weighted
    product of pheromone, inverse delay, inverse hop count, bandwidth,
    energy, and inverse drain rate.

    Raises if every candidate's product is zero: no path is preferable and
    the caller should rediscover.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    products: list[float] = []
    for c in candidates:
        if c.tau <= 0 and w.pheromone != 0:
            raise ValueError(f"candidate via {c.next_hop} has no pheromone")
        m = c.metrics
        if m.drain_rate <= 0:
            raise ValueError(f"candidate via {c.next_hop} has zero drain rate")
        products.append(
            c.tau**w.pheromone
            * (1.0 / m.delay) ** w.delay
            * (1.0 / m.hop_count) ** w.hop_count
            * m.bandwidth**w.bandwidth
            * m.energy**w.energy
            * (1.0 / m.drain_rate) ** w.drain_rate
        )
    total = sum(products)
    if total <= 0.0:
        raise ValueError("no preferable path among candidates")
    return [(c.next_hop, p / total) for c, p in zip(candidates, products)]

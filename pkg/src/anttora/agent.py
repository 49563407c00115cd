"""Per-node protocol state machine.

Each node runs one agent. The agent owns the node's height state toward
every destination it has heard of, the pheromone table, the neighbor table
fed by hello beacons, the per-destination candidate table built from
discovery replies, and the route cache holding QoS-admitted source routes
for flows this node originates.

Handlers are pure with respect to everything outside the agent: they take
packets and the current simulation time, mutate the agent, and return the
packets to transmit. Agents never share state; all coordination happens
through emissions.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .aco import (
    CandidateEntry,
    DepositWeights,
    NormalizationBounds,
    PathMetrics,
    PreferenceWeights,
    path_preference,
    pheromone_deposit,
    pheromone_update,
    evaporate,
)
from .heights import (
    BroadcastKind,
    Height,
    MaintenanceCase,
    NodeToraState,
    Trigger,
    apply_clr,
    has_downstream,
    maintenance_case,
    new_height_on_reply,
)
from .packets import (
    ClrPacket,
    DataPacket,
    ErrorPacket,
    HelloAnt,
    Packet,
    QryReplyAnt,
    QryRequestAnt,
    UpdPacket,
)

ERROR_DEDUP_WINDOW = 5.0
DRAIN_FLOOR = 1e-12  # keeps reciprocal drain finite before any energy is spent


class NoRouteError(Exception):
    """No unexpired cached route toward the requested destination."""


class SimClockError(Exception):
    """A packet arrived at or before its own send time."""


@dataclass(frozen=True)
class QosConstraints:
    """Componentwise admission thresholds for cached routes."""

    max_delay: float = 10.0
    min_bandwidth: float = 1.0
    min_energy: float = 1e-6
    max_drain_rate: float = 1e6
    max_hop_count: int = 32  # counts nodes, endpoints included

    def __post_init__(self) -> None:
        for name in ("max_delay", "min_bandwidth", "min_energy", "max_drain_rate", "max_hop_count"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def admits(self, m: PathMetrics) -> bool:
        return (
            m.delay <= self.max_delay
            and m.bandwidth >= self.min_bandwidth
            and m.energy >= self.min_energy
            and m.drain_rate <= self.max_drain_rate
            and m.hop_count <= self.max_hop_count
        )


@dataclass
class NeighborInfo:
    """Last heard energy budget and bandwidth estimate for one neighbor."""

    neighbor: int
    residual_energy: float = 0.0
    drain_rate: float = 0.0
    est_bandwidth: float = 0.0
    last_hello: float = 0.0


@dataclass
class NodeEnergy:
    """Residual battery plus a smoothed estimate of the dissipation rate."""

    residual: float
    drain_rate: float = 0.0
    window_spent: float = 0.0

    def debit(self, joules: float) -> bool:
        """Spend energy if affordable; a refused debit leaves state alone."""
        if joules < 0:
            raise ValueError("debit must be nonnegative")
        if self.residual < joules:
            return False
        self.residual -= joules
        self.window_spent += joules
        return True

    def tick(self, window: float, alpha: float) -> None:
        rate = self.window_spent / window
        self.drain_rate = alpha * rate + (1.0 - alpha) * self.drain_rate
        self.window_spent = 0.0


@dataclass
class RouteCacheEntry:
    """A QoS-admitted source route with its ranking probability."""

    path: tuple[int, ...]
    metrics: PathMetrics
    preference: float
    created_at: float
    expires_at: float

    def __post_init__(self) -> None:
        if len(set(self.path)) != len(self.path):
            raise ValueError("cached path must be loop-free")
        if self.expires_at <= self.created_at:
            raise ValueError("cached route must expire after creation")
        if not 0.0 <= self.preference <= 1.0:
            raise ValueError("preference is a probability")

    @property
    def next_hop(self) -> int:
        return self.path[1]


@dataclass
class Candidate:
    """Latest reply-borne route toward a destination via one neighbor."""

    next_hop: int
    path: tuple[int, ...]
    metrics: PathMetrics
    created_at: float
    updated_at: float
    expires_at: float


@dataclass(frozen=True)
class Emission:
    """A packet to transmit; ``to`` is None for a broadcast."""

    packet: Packet
    to: int | None = None


@dataclass(frozen=True)
class ProtocolParams:
    """Tunables shared by every agent in a run."""

    hello_interval: float = 1.0
    hello_bits: int = 512
    neighbor_loss_hellos: int = 3
    route_ttl: float = 10.0
    initial_pheromone: float = 0.1
    metric_packet_bits: int = 512
    drain_alpha: float = 0.3
    deposit_weights: DepositWeights = field(default_factory=DepositWeights)
    preference_weights: PreferenceWeights = field(default_factory=PreferenceWeights)
    bounds: NormalizationBounds = field(default_factory=NormalizationBounds)
    qos: QosConstraints = field(default_factory=QosConstraints)
    baseline: bool = False


class NetView:
    """Radio parameters the protocol is configured with.

    Nodes know their own links' capacity and propagation delay and every
    node's processing delay, the way deployed radios know their specs.
    """

    def link_params(self, a: int, b: int) -> tuple[float, float]:
        """(capacity bits/s, propagation delay s) of the a-b link."""
        raise NotImplementedError

    def processing_delay(self, node: int) -> float:
        raise NotImplementedError


class UniformNetView(NetView):
    def __init__(self, capacity: float, propagation: float, processing: float):
        self._capacity = capacity
        self._propagation = propagation
        self._processing = processing

    def link_params(self, a: int, b: int) -> tuple[float, float]:
        return self._capacity, self._propagation

    def processing_delay(self, node: int) -> float:
        return self._processing


class AgentHooks:
    """Observation points the simulator (and tests) can attach to."""

    def height_changed(self, node: int, dest: int, old: Height, new: Height, now: float) -> None:
        pass

    def route_inserted(self, node: int, dest: int, expires_at: float) -> None:
        pass

    def log(self, tag: str, node: int, now: float, **data) -> None:
        pass


class NodeAgent:
    """Protocol logic of a single node."""

    def __init__(
        self,
        node_id: int,
        params: ProtocolParams,
        net: NetView,
        initial_energy: float,
        hooks: AgentHooks | None = None,
    ):
        self.node = node_id
        self.params = params
        self.net = net
        self.hooks = hooks or AgentHooks()
        self.energy = NodeEnergy(residual=initial_energy)

        self.tora: dict[int, NodeToraState] = {}
        self.pheromone: dict[int, float] = {}
        self.neighbors: dict[int, NeighborInfo] = {}
        self.link_activated_at: dict[int, float] = {}
        self.candidates: dict[int, dict[int, Candidate]] = {}
        self.preferences: dict[int, dict[int, float]] = {}
        self.cache: dict[int, list[RouteCacheEntry]] = {}
        self.pending_request: dict[int, QryRequestAnt] = {}
        self.initiated: dict[int, float] = {}
        self.last_reply_at: dict[int, float] = {}
        self.seen_errors: dict[tuple[int, int], float] = {}
        self.fwd_history: dict[int, set[tuple[int, int]]] = {}
        self.data_queue: dict[int, list[tuple[int, int]]] = {}  # dest -> [(seq, bits)]

    # -- state plumbing ----------------------------------------------------

    def _state_for(self, dest: int) -> NodeToraState:
        state = self.tora.get(dest)
        if state is None:
            state = NodeToraState(node=self.node, destination=dest)
            for j in sorted(self.link_activated_at):
                state.add_link(j)
            self.tora[dest] = state
        return state

    def _set_height(self, state: NodeToraState, new: Height, now: float) -> None:
        old = state.own_height
        if old == new:
            return
        state.set_own_height(new)
        self.hooks.height_changed(self.node, state.destination, old, new, now)

    def _metric_link_delay(self, neighbor: int) -> float:
        capacity, propagation = self.net.link_params(self.node, neighbor)
        return propagation + self.params.metric_packet_bits / capacity

    # -- link layer --------------------------------------------------------

    def link_up(self, neighbor: int, now: float) -> list[Emission]:
        if neighbor in self.link_activated_at:
            return []
        self.link_activated_at[neighbor] = now
        self.pheromone.setdefault(neighbor, self.params.initial_pheromone)
        for state in self.tora.values():
            state.add_link(neighbor)
        emissions: list[Emission] = []
        # an outstanding discovery gets another chance over the new link
        for dest in sorted(self.tora):
            state = self.tora[dest]
            if state.route_required and dest in self.pending_request:
                emissions.append(Emission(self.pending_request[dest]))
        return emissions

    def on_link_failure(self, failed: int, now: float) -> list[Emission]:
        if failed not in self.link_activated_at and failed not in self.neighbors:
            return []
        self.link_activated_at.pop(failed, None)
        self.neighbors.pop(failed, None)
        self.pheromone.pop(failed, None)
        flows = self.fwd_history.pop(failed, set())
        emissions: list[Emission] = []
        for dest in sorted(self.tora):
            state = self.tora[dest]
            if failed not in state.links:
                continue
            state.remove_link(failed)
            self.candidates.get(dest, {}).pop(failed, None)
            self._purge_cache(dest, now, first_hop=failed)
            self._recompute_preferences(dest, now)
            if self.node == dest:
                continue
            if has_downstream(state):
                # another downstream link survives: data falls back to the
                # best remaining cached route, no control traffic at all
                continue
            sources = sorted({s for (s, d) in flows if d == dest and s != self.node})
            for s in sources:
                self.seen_errors[(s, self.node)] = now  # ignore our own flood echo
                emissions.append(Emission(ErrorPacket(source=s, originator=self.node)))
            emissions.extend(self._run_maintenance(state, Trigger.LINK_FAILURE, now))
            if self.node in {s for (s, d) in flows if d == dest} or self.data_queue.get(dest):
                if not self._live_entries(dest, now) and not state.route_required:
                    emissions.extend(self.start_discovery(dest, now))
        return emissions

    # -- hello plane ---------------------------------------------------------

    def on_hello(self, hello: HelloAnt, receive_time: float) -> NeighborInfo:
        if receive_time <= hello.send_time:
            raise SimClockError(
                f"hello received at {receive_time} not after send time {hello.send_time}"
            )
        if hello.sender not in self.link_activated_at:
            self.link_up(hello.sender, receive_time)
        info = NeighborInfo(
            neighbor=hello.sender,
            residual_energy=hello.residual_energy,
            drain_rate=hello.drain_rate,
            est_bandwidth=hello.size_bits / (receive_time - hello.send_time),
            last_hello=receive_time,
        )
        self.neighbors[hello.sender] = info
        return info

    def hello_tick(self, now: float) -> list[Emission]:
        """Periodic beacon: refresh the drain estimate, detect silent
        neighbors, then announce ourselves."""
        self.energy.tick(self.params.hello_interval, self.params.drain_alpha)
        emissions: list[Emission] = []
        cutoff = self.params.neighbor_loss_hellos * self.params.hello_interval
        for j in sorted(self.neighbors):
            if now - self.neighbors[j].last_hello > cutoff:
                self.hooks.log("neighbor_lost", self.node, now, neighbor=j)
                emissions.extend(self.on_link_failure(j, now))
        if self.energy.residual > 0:
            emissions.append(
                Emission(
                    HelloAnt(
                        sender=self.node,
                        send_time=now,
                        residual_energy=self.energy.residual,
                        drain_rate=self.energy.drain_rate,
                        size_bits=self.params.hello_bits,
                    )
                )
            )
        return emissions

    def evaporation_tick(self, now: float) -> None:
        q = self.params.preference_weights.decay
        if not self.params.baseline:
            for j in sorted(self.pheromone):
                self.pheromone[j] = evaporate(self.pheromone[j], q)
        for dest in sorted(self.candidates):
            self._prune_candidates(dest, now)
            self._recompute_preferences(dest, now)

    # -- route discovery -----------------------------------------------------

    def start_discovery(self, dest: int, now: float) -> list[Emission]:
        state = self._state_for(dest)
        self._set_height(state, Height.null(self.node), now)
        state.route_required = True
        self.initiated[dest] = now
        req = QryRequestAnt(
            request_start_time=now,
            min_bandwidth_seen=0.0,  # no link traversed yet
            source=self.node,
            destination=dest,
            visited=(self.node,),
        )
        self.pending_request[dest] = req
        self.hooks.log("discovery_started", self.node, now, dest=dest)
        return [Emission(req)]

    def on_qry_request(self, req: QryRequestAnt, sender: int, now: float) -> list[Emission]:
        if req.source == self.node:
            return []
        if self.node == req.destination:
            reply = self._destination_reply(req, sender)
            if reply is None:
                self.hooks.log("reply_unbuildable", self.node, now, dest=req.destination)
                return []
            self.last_reply_at[req.destination] = now
            return [Emission(reply)]
        if self.node in req.visited:
            return []
        state = self._state_for(req.destination)
        if not has_downstream(state):
            if state.route_required:
                return []
            self._set_height(state, Height.null(self.node), now)
            state.route_required = True
            info = self.neighbors.get(sender)
            seen = req.min_bandwidth_seen
            if info and info.est_bandwidth > 0:
                seen = info.est_bandwidth if seen <= 0 else min(seen, info.est_bandwidth)
            fwd = dataclasses.replace(
                req, min_bandwidth_seen=seen, visited=req.visited + (self.node,)
            )
            self.pending_request[req.destination] = fwd
            return [Emission(fwd)]
        if state.own_height.is_null:
            self._set_height(
                state, new_height_on_reply(state.concrete_mirrors(), self.node), now
            )
            state.route_required = False
        else:
            # one reply per destination and discovery wave over each link:
            # suppression resets when the link re-activates or a fresh wave
            # starts, else rediscovery could never be answered
            activated = self.link_activated_at.get(sender, now)
            threshold = max(activated, req.request_start_time)
            if self.last_reply_at.get(req.destination, -1.0) >= threshold:
                return []
        reply = self._build_reply(req, now)
        if reply is None:
            self.hooks.log("reply_unbuildable", self.node, now, dest=req.destination)
            return []
        self.last_reply_at[req.destination] = now
        return [Emission(reply)]

    def on_qry_reply(self, rep: QryReplyAnt, sender: int, now: float) -> list[Emission]:
        state = self._state_for(rep.destination)
        state.set_mirror(sender, rep.reporter_height)
        if self.node == rep.destination:
            return []
        dest = rep.destination
        extended: PathMetrics | None = None
        path: tuple[int, ...] = ()
        info = self.neighbors.get(sender)
        usable = (
            self.node not in rep.path_nodes
            and rep.path_nodes[0] == sender
            and info is not None
            and info.est_bandwidth > 0
        )
        if usable:
            extended, path = self._extend_metrics(rep, sender)
            cand = self.candidates.setdefault(dest, {})
            old = cand.get(sender)
            cand[sender] = Candidate(
                next_hop=sender,
                path=path,
                metrics=extended,
                created_at=old.created_at if old else now,
                updated_at=now,
                expires_at=now + self.params.route_ttl,
            )
            if not self.params.baseline:
                deposit = pheromone_deposit(
                    extended, self.params.deposit_weights, self.params.bounds
                )
                tau = self.pheromone.get(sender, self.params.initial_pheromone)
                self.pheromone[sender] = pheromone_update(
                    tau, self.params.preference_weights.persistence, deposit
                )
            self._recompute_preferences(dest, now)

        emissions: list[Emission] = []
        if state.route_required:
            concrete = state.concrete_mirrors()
            if concrete:
                self._set_height(state, new_height_on_reply(concrete, self.node), now)
                state.route_required = False
                # the source consumes the reply without republishing it: its
                # reverse-path stack is empty, and advertising the source
                # height would leave stale low mirrors at its neighbors that
                # later absorb reversal cascades and mask partitions
                if extended is not None and self.node != rep.source:
                    pend = self.pending_request.get(dest)
                    back = tuple(reversed(pend.visited))[1:] if pend else ()
                    emissions.append(
                        Emission(
                            QryReplyAnt(
                                hop_count=extended.hop_count,
                                delay=extended.delay,
                                energy=extended.energy,
                                drain_rate=extended.drain_rate,
                                bandwidth=extended.bandwidth,
                                source=rep.source,
                                destination=dest,
                                to_visit=back,
                                path_nodes=path,
                                reporter_height=state.own_height,
                            )
                        )
                    )
                    self.last_reply_at[dest] = now

        if rep.source == self.node and extended is not None and dest in self.initiated:
            emissions.extend(self._admit_route(dest, path, extended, now))
        return emissions

    # -- route maintenance -----------------------------------------------------

    def on_upd(self, upd: UpdPacket, sender: int, now: float) -> list[Emission]:
        if sender not in self.link_activated_at:
            return []
        state = self._state_for(upd.destination)
        state.set_mirror(sender, upd.height)
        if self.node == upd.destination:
            return []
        if has_downstream(state):
            return []
        if state.own_height.is_null:
            # an undiscovered node has nothing to reverse
            return []
        return self._run_maintenance(state, Trigger.UPD_REVERSAL, now)

    def _run_maintenance(self, state: NodeToraState, trigger: Trigger, now: float) -> list[Emission]:
        dest = state.destination
        outcome = maintenance_case(state, trigger, now)
        self.hooks.log(
            "maintenance", self.node, now, dest=dest, case=outcome.case.value, trigger=trigger.value
        )
        if outcome.case is MaintenanceCase.DETECT_PARTITION:
            level = state.concrete_mirrors()[0].level
            self.hooks.log("partition_detected", self.node, now, dest=dest, level=level)
            self._erase_state(state, now)
            return [Emission(ClrPacket(destination=dest, reference_level=level))]
        self._set_height(state, outcome.new_height, now)
        if outcome.broadcast is BroadcastKind.UPD:
            return [Emission(UpdPacket(destination=dest, height=state.own_height))]
        return []

    def _erase_state(self, state: NodeToraState, now: float) -> None:
        """Local route erasure run by the node that detected the partition."""
        dest = state.destination
        self._set_height(state, Height.null(self.node), now)
        for j, ls in sorted(state.links.items()):
            mirror = Height.zero(j) if j == dest else Height.null(j)
            state.set_mirror(j, mirror)
        self.candidates.pop(dest, None)
        self.preferences.pop(dest, None)
        self._purge_cache(dest, now, everything=True)

    def on_error(self, err: ErrorPacket, sender: int, now: float) -> list[Emission]:
        key = (err.source, err.originator)
        last = self.seen_errors.get(key)
        if last is not None and now - last < ERROR_DEDUP_WINDOW:
            return []
        self.seen_errors[key] = now
        affected = self._purge_routes_containing(err.originator, now)
        emissions: list[Emission] = []
        if self.node == err.source:
            for dest in affected:
                if not self._live_entries(dest, now):
                    state = self._state_for(dest)
                    if not state.route_required:
                        emissions.extend(self.start_discovery(dest, now))
        else:
            emissions.append(Emission(err))
        return emissions

    def on_clr(self, clr: ClrPacket, sender: int, now: float) -> list[Emission]:
        state = self._state_for(clr.destination)
        rebroadcast, affected = apply_clr(state, clr.reference_level)
        if affected:
            dest = clr.destination
            cand = self.candidates.get(dest, {})
            for j in affected:
                cand.pop(j, None)
            self._purge_cache(dest, now, through_any=set(affected))
            self._recompute_preferences(dest, now)
        if rebroadcast:
            return [Emission(clr)]
        return []

    # -- data plane ---------------------------------------------------------

    def send_data(self, dest: int, size_bits: int, seq: int, now: float) -> list[Emission]:
        entry = self._select_route(dest, now)
        if entry is None:
            raise NoRouteError(f"node {self.node} has no route to {dest}")
        entry.expires_at = now + self.params.route_ttl  # refreshed on use
        self.hooks.route_inserted(self.node, dest, entry.expires_at)
        packet = DataPacket(
            source=self.node, destination=dest, seq=seq, size_bits=size_bits, path=entry.path
        )
        return [Emission(packet, to=entry.next_hop)]

    def queue_data(self, dest: int, size_bits: int, seq: int) -> None:
        self.data_queue.setdefault(dest, []).append((seq, size_bits))

    def note_forwarded(self, source: int, dest: int, next_hop: int) -> None:
        self.fwd_history.setdefault(next_hop, set()).add((source, dest))

    def _flush_queue(self, dest: int, now: float) -> list[Emission]:
        queued = self.data_queue.get(dest)
        if not queued:
            return []
        emissions: list[Emission] = []
        remaining: list[tuple[int, int]] = []
        for seq, bits in queued:
            try:
                emissions.extend(self.send_data(dest, bits, seq, now))
            except NoRouteError:
                remaining.append((seq, bits))
        if remaining:
            self.data_queue[dest] = remaining
        else:
            self.data_queue.pop(dest, None)
        return emissions

    def route_expiry(self, dest: int, now: float) -> None:
        entries = self.cache.get(dest)
        if entries:
            kept = [e for e in entries if e.expires_at > now]
            if len(kept) != len(entries):
                self.hooks.log(
                    "cache_expired", self.node, now, dest=dest, dropped=len(entries) - len(kept)
                )
                self.cache[dest] = kept
        self._prune_candidates(dest, now)
        self._recompute_preferences(dest, now)

    # -- internals ------------------------------------------------------------

    def _live_entries(self, dest: int, now: float) -> list[RouteCacheEntry]:
        return [e for e in self.cache.get(dest, []) if e.expires_at > now]

    def _select_route(self, dest: int, now: float) -> RouteCacheEntry | None:
        live = self._live_entries(dest, now)
        if not live:
            return None
        if self.params.baseline:
            return min(live, key=lambda e: (e.created_at, e.path))
        return min(live, key=lambda e: (-e.preference, e.created_at, e.path))

    def _purge_cache(
        self,
        dest: int,
        now: float,
        first_hop: int | None = None,
        through_any: set[int] | None = None,
        everything: bool = False,
    ) -> None:
        entries = self.cache.get(dest)
        if not entries:
            return
        kept = []
        for e in entries:
            doomed = everything
            if first_hop is not None and e.next_hop == first_hop:
                doomed = True
            if through_any and set(e.path[1:]) & through_any:
                doomed = True
            if not doomed:
                kept.append(e)
        if len(kept) != len(entries):
            self.hooks.log(
                "cache_purged", self.node, now, dest=dest, dropped=len(entries) - len(kept)
            )
            self.cache[dest] = kept

    def _purge_routes_containing(self, node: int, now: float) -> list[int]:
        """Drop every cached route and candidate whose path visits ``node``;
        returns the destinations whose cache shrank."""
        affected = []
        for dest in sorted(self.cache):
            entries = self.cache[dest]
            kept = [e for e in entries if node not in e.path[1:]]
            if len(kept) != len(entries):
                self.cache[dest] = kept
                affected.append(dest)
                self.hooks.log(
                    "cache_purged", self.node, now, dest=dest, dropped=len(entries) - len(kept)
                )
        for dest in sorted(self.candidates):
            cand = self.candidates[dest]
            doomed = [j for j, c in cand.items() if node in c.path]
            for j in doomed:
                cand.pop(j)
            if doomed:
                self._recompute_preferences(dest, now)
        return affected

    def _prune_candidates(self, dest: int, now: float) -> None:
        cand = self.candidates.get(dest)
        if not cand:
            return
        for j in [j for j, c in cand.items() if c.expires_at <= now]:
            cand.pop(j)

    def _recompute_preferences(self, dest: int, now: float) -> None:
        cand = self.candidates.get(dest, {})
        live = [c for _, c in sorted(cand.items()) if c.expires_at > now]
        if self.params.baseline or not live:
            self.preferences[dest] = {c.next_hop: 1.0 for c in live}
        else:
            entries = [
                CandidateEntry(
                    next_hop=c.next_hop,
                    tau=self.pheromone.get(c.next_hop, self.params.initial_pheromone),
                    metrics=dataclasses.replace(
                        c.metrics, drain_rate=max(c.metrics.drain_rate, DRAIN_FLOOR)
                    ),
                )
                for c in live
            ]
            try:
                self.preferences[dest] = dict(
                    path_preference(entries, self.params.preference_weights)
                )
            except ValueError:
                self.preferences[dest] = {}
        prefs = self.preferences[dest]
        for e in self.cache.get(dest, []):
            if e.next_hop in prefs:
                e.preference = prefs[e.next_hop]

    def _extend_metrics(
        self, rep: QryReplyAnt, sender: int
    ) -> tuple[PathMetrics, tuple[int, ...]]:
        info = self.neighbors[sender]
        metrics = PathMetrics(
            delay=rep.delay + self._metric_link_delay(sender)
            + self.net.processing_delay(self.node),
            bandwidth=min(rep.bandwidth, info.est_bandwidth),
            energy=min(rep.energy, self.energy.residual),
            drain_rate=max(rep.drain_rate, self.energy.drain_rate),
            hop_count=rep.hop_count + 1,
        )
        return metrics, (self.node,) + rep.path_nodes

    def _admit_route(
        self, dest: int, path: tuple[int, ...], metrics: PathMetrics, now: float
    ) -> list[Emission]:
        if not self.params.baseline and not self.params.qos.admits(metrics):
            self.hooks.log("route_rejected", self.node, now, dest=dest, path=path)
            return []
        preference = self.preferences.get(dest, {}).get(path[1], 1.0)
        expires = now + self.params.route_ttl
        entries = self.cache.setdefault(dest, [])
        for e in entries:
            if e.path == path:
                e.metrics = metrics
                e.preference = preference
                e.expires_at = expires
                break
        else:
            entries.append(
                RouteCacheEntry(
                    path=path,
                    metrics=metrics,
                    preference=preference,
                    created_at=now,
                    expires_at=expires,
                )
            )
        self.hooks.route_inserted(self.node, dest, expires)
        self.hooks.log("route_cached", self.node, now, dest=dest, path=path)
        return self._flush_queue(dest, now)

    def _destination_reply(self, req: QryRequestAnt, sender: int) -> QryReplyAnt | None:
        info = self.neighbors.get(sender)
        if info is None or info.est_bandwidth <= 0:
            return None
        return QryReplyAnt(
            hop_count=1,
            delay=self.net.processing_delay(self.node),
            energy=self.energy.residual,
            drain_rate=self.energy.drain_rate,
            bandwidth=info.est_bandwidth,
            source=req.source,
            destination=self.node,
            to_visit=tuple(reversed(req.visited)),
            path_nodes=(self.node,),
            reporter_height=Height.zero(self.node),
        )

    def _best_candidate(self, dest: int, now: float) -> Candidate | None:
        cand = self.candidates.get(dest, {})
        live = [c for _, c in sorted(cand.items()) if c.expires_at > now]
        if not live:
            return None
        if self.params.baseline:
            return min(live, key=lambda c: (c.created_at, c.next_hop))
        prefs = self.preferences.get(dest, {})
        return min(live, key=lambda c: (-prefs.get(c.next_hop, 0.0), c.next_hop))

    def _build_reply(self, req: QryRequestAnt, now: float) -> QryReplyAnt | None:
        dest = req.destination
        state = self._state_for(dest)
        best = self._best_candidate(dest, now)
        if best is not None:
            m, path = best.metrics, best.path
        elif dest in self.neighbors and self.neighbors[dest].est_bandwidth > 0:
            info = self.neighbors[dest]
            m = PathMetrics(
                delay=self._metric_link_delay(dest)
                + self.net.processing_delay(self.node)
                + self.net.processing_delay(dest),
                bandwidth=info.est_bandwidth,
                energy=min(self.energy.residual, info.residual_energy),
                drain_rate=max(self.energy.drain_rate, info.drain_rate),
                hop_count=2,
            )
            path = (self.node, dest)
        else:
            return None
        return QryReplyAnt(
            hop_count=m.hop_count,
            delay=m.delay,
            energy=m.energy,
            drain_rate=m.drain_rate,
            bandwidth=m.bandwidth,
            source=req.source,
            destination=dest,
            to_visit=tuple(reversed(req.visited)),
            path_nodes=path,
            reporter_height=state.own_height,
        )

"""Deterministic discrete-event core.

One ``Simulation`` owns the event queue, the physical link set, node
mobility, and every node agent. All randomness flows from a single seeded
generator used only by mobility and placement; the protocol itself is
deterministic, so identical (scenario, seed) pairs replay to byte-identical
traces. Events dequeue in (time, seq) order and every delivery strictly
follows its send.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from enum import Enum

from .agent import AgentHooks, Emission, NetView, NoRouteError, NodeAgent
from .packets import (
    ClrPacket,
    DataPacket,
    ErrorPacket,
    HelloAnt,
    Packet,
    QryReplyAnt,
    QryRequestAnt,
    TraceRecord,
    UpdPacket,
)
from .scenario import Scenario

PACKET_TOKENS = {
    HelloAnt: "hello",
    QryRequestAnt: "qry_request",
    QryReplyAnt: "qry_reply",
    UpdPacket: "upd",
    ErrorPacket: "error",
    ClrPacket: "clr",
}


class EventKind(Enum):
    PACKET_DELIVERY = "packet_delivery"
    HELLO_TIMER = "hello_timer"
    EVAPORATION_TIMER = "evaporation_timer"
    MOBILITY_STEP = "mobility_step"
    LINK_CHANGE = "link_change"
    DATA_INJECTION = "data_injection"
    ROUTE_EXPIRY = "route_expiry"


@dataclass(order=True)
class SimEvent:
    time: float
    seq: int
    kind: EventKind = field(compare=False)
    payload: tuple = field(compare=False, default=())


@dataclass
class MobilityNode:
    pos: tuple[float, float]
    target: tuple[float, float]
    speed: float
    pause_until: float = 0.0

    def velocity(self, now: float) -> tuple[float, float]:
        if now < self.pause_until or self.speed <= 0.0:
            return (0.0, 0.0)
        dx = self.target[0] - self.pos[0]
        dy = self.target[1] - self.pos[1]
        dist = math.hypot(dx, dy)
        if dist <= 1e-12:
            return (0.0, 0.0)
        return (self.speed * dx / dist, self.speed * dy / dist)


class ScenarioNetView(NetView):
    def __init__(self, scenario: Scenario):
        self._links = scenario.links

    def link_params(self, a: int, b: int) -> tuple[float, float]:
        return self._links.params(a, b)

    def processing_delay(self, node: int) -> float:
        return self._links.processing


class _Hooks(AgentHooks):
    def __init__(self, sim: "Simulation"):
        self.sim = sim

    def height_changed(self, node, dest, old, new, now):
        sim = self.sim
        sim.protocol_log.append((sim.pop_count, now, node, "height", {"dest": dest, "new": new}))
        if sim.current_failure is not None:
            sim.reaction_sets.setdefault(sim.current_failure, set()).add(node)

    def route_inserted(self, node, dest, expires_at):
        if expires_at <= self.sim.end_time:
            self.sim.schedule(expires_at, EventKind.ROUTE_EXPIRY, (node, dest))

    def log(self, tag, node, now, **data):
        self.sim.protocol_log.append((self.sim.pop_count, now, node, tag, data))


class Simulation:
    """One seeded run of a scenario."""

    def __init__(self, scenario: Scenario, seed: int | None = None, mode: str | None = None):
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.mode = mode or scenario.mode
        self.end_time = scenario.end_time
        self.rng = random.Random(self.seed)
        self.net = ScenarioNetView(scenario)
        self.hooks = _Hooks(self)
        params = scenario.protocol_params(self.mode)
        self.agents = {
            i: NodeAgent(i, params, self.net, scenario.nodes.initial_energy, self.hooks)
            for i in range(scenario.nodes.count)
        }

        self.queue: list[SimEvent] = []
        self.event_seq = 0
        self.trace_seq = 0
        self.now = 0.0
        self.pop_count = 0
        self.records: list[TraceRecord] = []
        self.protocol_log: list[tuple[int, float, int, str, dict]] = []
        self.cache_samples: list[tuple[float, int]] = []
        self.failure_events: list[tuple[int, float, int, int]] = []
        self.reaction_sets: dict[int, set[int]] = {}
        self.current_failure: int | None = None
        self._failure_counter = 0
        self.links: set[tuple[int, int]] = set()
        self.mobility: dict[int, MobilityNode] = {}
        self.counters = {
            "frames_sent": 0,
            "frames_delivered": 0,
            "frames_dropped": 0,
            "drop_link_down_at_send": 0,
            "drop_cancelled_in_flight": 0,
            "drop_rx_energy": 0,
            "drop_end_of_run": 0,
            "tx_suppressed": 0,
            "data_offered": 0,
            "data_delivered": 0,
            "data_queued_at_end": 0,
        }
        self._setup()

    # -- scheduling --------------------------------------------------------

    def schedule(self, time: float, kind: EventKind, payload: tuple = ()) -> SimEvent:
        self.event_seq += 1
        ev = SimEvent(time, self.event_seq, kind, payload)
        heapq.heappush(self.queue, ev)
        return ev

    def _setup(self) -> None:
        sc = self.scenario
        n = sc.nodes.count
        if n == 0:
            return
        if sc.topology.mode == "static":
            for a, b in sorted(sc.topology.adjacency):
                self.links.add((a, b))
        else:
            self._init_mobility()
            self.schedule(0.0, EventKind.MOBILITY_STEP)
        for i in sorted(self.agents):
            for j in sorted(self._neighbors(i)):
                self.agents[i].link_up(j, 0.0)
        self.schedule(0.0, EventKind.HELLO_TIMER)
        self.schedule(sc.evaporation_period, EventKind.EVAPORATION_TIMER)
        injections = []
        for idx, flow in enumerate(sc.traffic):
            k = 0
            while True:
                t = flow.start + k / flow.rate_pps
                if t >= flow.stop or t > self.end_time:
                    break
                injections.append((t, idx, flow.source, flow.destination, flow.packet_bits))
                k += 1
        injections.sort(key=lambda it: (it[0], it[1]))
        for seq, (t, _idx, src, dst, bits) in enumerate(injections):
            self.schedule(t, EventKind.DATA_INJECTION, (src, dst, bits, seq))
        for fl in sc.link_failures:
            self.schedule(fl.time, EventKind.LINK_CHANGE, (fl.a, fl.b, False))

    def _init_mobility(self) -> None:
        sc = self.scenario
        w, h = sc.topology.area
        if sc.nodes.positions is not None:
            positions = list(sc.nodes.positions)
        else:
            placement = random.Random(sc.topology.placement_seed or 0)
            positions = [(placement.uniform(0, w), placement.uniform(0, h)) for _ in range(sc.nodes.count)]
        for i, pos in enumerate(positions):
            self.mobility[i] = MobilityNode(pos=pos, target=pos, speed=0.0)
        for i in sorted(self.mobility):
            self._pick_waypoint(i, 0.0)
        r = sc.topology.comm_range
        for a in range(sc.nodes.count):
            for b in range(a + 1, sc.nodes.count):
                if math.dist(positions[a], positions[b]) <= r:
                    self.links.add((a, b))

    def _pick_waypoint(self, node: int, now: float) -> None:
        sc = self.scenario
        w, h = sc.topology.area
        lo, hi = sc.topology.speed
        m = self.mobility[node]
        m.target = (self.rng.uniform(0, w), self.rng.uniform(0, h))
        m.speed = self.rng.uniform(lo, hi)

    # -- helpers -------------------------------------------------------------

    def _neighbors(self, node: int) -> list[int]:
        out = []
        for a, b in self.links:
            if a == node:
                out.append(b)
            elif b == node:
                out.append(a)
        return sorted(out)

    def _link_up(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.links

    def _bits_of(self, packet: Packet) -> int:
        if isinstance(packet, (HelloAnt, DataPacket)):
            return packet.size_bits
        return self.scenario.control_bits[PACKET_TOKENS[type(packet)]]

    def _trace(self, event: str, node: int, packet: Packet, time: float) -> None:
        self.trace_seq += 1
        self.records.append(TraceRecord(time, self.trace_seq, event, node, packet))

    # -- transmission ----------------------------------------------------------

    def process_emissions(self, frm: int, emissions: list[Emission], now: float) -> None:
        for em in emissions:
            packet = em.packet
            bits = self._bits_of(packet)
            if not self.agents[frm].energy.debit(self.scenario.beta_tx * bits):
                self.counters["tx_suppressed"] += 1
                continue
            self._trace("snd", frm, packet, now)
            if em.to is None:
                targets = self._neighbors(frm)
            else:
                targets = [em.to]
            for to in targets:
                self.deliver(packet, frm, to, now)

    def deliver(self, packet: Packet, frm: int, to: int, now: float) -> SimEvent | None:
        """Schedule a point-to-point delivery; drops if the link is down."""
        if not self._link_up(frm, to):
            self.counters["frames_dropped"] += 1
            self.counters["drop_link_down_at_send"] += 1
            self._trace("drp", to, packet, now)
            return None
        bits = self._bits_of(packet)
        capacity, propagation = self.scenario.links.params(frm, to)
        processing = self.scenario.links.processing
        arrival = now + bits / capacity + propagation + processing
        self.counters["frames_sent"] += 1
        return self.schedule(arrival, EventKind.PACKET_DELIVERY, (packet, frm, to))

    # -- event handlers -----------------------------------------------------------

    def _on_delivery(self, packet: Packet, frm: int, to: int) -> None:
        now = self.now
        if not self._link_up(frm, to):
            self.counters["frames_dropped"] += 1
            self.counters["drop_cancelled_in_flight"] += 1
            self._trace("drp", to, packet, now)
            return
        agent = self.agents[to]
        bits = self._bits_of(packet)
        if not agent.energy.debit(self.scenario.beta_rx * bits):
            self.counters["frames_dropped"] += 1
            self.counters["drop_rx_energy"] += 1
            self._trace("drp", to, packet, now)
            return
        self.counters["frames_delivered"] += 1
        self._trace("rcv", to, packet, now)
        if isinstance(packet, HelloAnt):
            agent.on_hello(packet, now)
            return
        if isinstance(packet, QryRequestAnt):
            out = agent.on_qry_request(packet, frm, now)
        elif isinstance(packet, QryReplyAnt):
            out = agent.on_qry_reply(packet, frm, now)
        elif isinstance(packet, UpdPacket):
            out = agent.on_upd(packet, frm, now)
        elif isinstance(packet, ErrorPacket):
            out = agent.on_error(packet, frm, now)
        elif isinstance(packet, ClrPacket):
            out = agent.on_clr(packet, frm, now)
        elif isinstance(packet, DataPacket):
            out = self._on_data(agent, packet)
        else:
            raise AssertionError(f"unhandled packet {packet!r}")
        self.process_emissions(to, out, now)

    def _on_data(self, agent: NodeAgent, packet: DataPacket) -> list[Emission]:
        if agent.node == packet.destination:
            self.counters["data_delivered"] += 1
            return []
        idx = packet.path.index(agent.node)
        nxt = packet.path[idx + 1]
        agent.note_forwarded(packet.source, packet.destination, nxt)
        return [Emission(packet, to=nxt)]

    def _on_hello_timer(self) -> None:
        now = self.now
        for i in sorted(self.agents):
            self.process_emissions(i, self.agents[i].hello_tick(now), now)
        total = sum(len(entries) for a in self.agents.values() for entries in a.cache.values())
        self.cache_samples.append((now, total))
        nxt = now + self.scenario.hello_interval
        if nxt <= self.end_time:
            self.schedule(nxt, EventKind.HELLO_TIMER)

    def _on_evaporation_timer(self) -> None:
        now = self.now
        for i in sorted(self.agents):
            self.agents[i].evaporation_tick(now)
        nxt = now + self.scenario.evaporation_period
        if nxt <= self.end_time:
            self.schedule(nxt, EventKind.EVAPORATION_TIMER)

    def _on_data_injection(self, src: int, dst: int, bits: int, seq: int) -> None:
        now = self.now
        self.counters["data_offered"] += 1
        agent = self.agents[src]
        try:
            self.process_emissions(src, agent.send_data(dst, bits, seq, now), now)
        except NoRouteError:
            agent.queue_data(dst, bits, seq)
            state = agent.tora.get(dst)
            if state is None or not state.route_required:
                self.process_emissions(src, agent.start_discovery(dst, now), now)

    def _on_route_expiry(self, node: int, dest: int) -> None:
        self.agents[node].route_expiry(dest, self.now)

    def _on_link_change(self, a: int, b: int, up: bool) -> None:
        now = self.now
        key = (min(a, b), max(a, b))
        if up:
            if key in self.links:
                return
            self.links.add(key)
            for node, peer in ((min(a, b), max(a, b)), (max(a, b), min(a, b))):
                self.process_emissions(node, self.agents[node].link_up(peer, now), now)
            return
        if key not in self.links:
            return
        self.links.discard(key)
        self._failure_counter += 1
        fid = self._failure_counter
        self.current_failure = fid
        self.failure_events.append((fid, now, key[0], key[1]))
        self.reaction_sets.setdefault(fid, set())
        self.protocol_log.append(
            (self.pop_count, now, -1, "link_failure", {"id": fid, "a": key[0], "b": key[1]})
        )
        for node, peer in ((key[0], key[1]), (key[1], key[0])):
            self.process_emissions(node, self.agents[node].on_link_failure(peer, now), now)

    # -- mobility -----------------------------------------------------------------

    def step_mobility(self, dt: float) -> list[SimEvent]:
        """Advance every node over the coming ``dt`` and schedule a
        LINK_CHANGE at each instant a pair crosses the communication range."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        start, horizon = self.now, self.now + dt
        events: list[SimEvent] = []
        t = start
        while t < horizon - 1e-12:
            seg_end = horizon
            for i in sorted(self.mobility):
                m = self.mobility[i]
                if m.pause_until > t:
                    seg_end = min(seg_end, m.pause_until)
                elif m.speed > 0:
                    dist = math.dist(m.pos, m.target)
                    if dist > 1e-12:
                        seg_end = min(seg_end, t + dist / m.speed)
            events.extend(self._crossings(t, seg_end))
            for i in sorted(self.mobility):
                m = self.mobility[i]
                was_paused = m.pause_until > t
                vx, vy = m.velocity(t)
                m.pos = (m.pos[0] + vx * (seg_end - t), m.pos[1] + vy * (seg_end - t))
                if was_paused:
                    if m.pause_until <= seg_end + 1e-12:
                        self._pick_waypoint(i, seg_end)
                elif m.speed > 0 and math.dist(m.pos, m.target) <= 1e-9:
                    m.pos = m.target
                    pause = self.scenario.topology.pause_time
                    if pause > 0:
                        m.pause_until = seg_end + pause
                    else:
                        self._pick_waypoint(i, seg_end)
            t = seg_end
        return events

    def _crossings(self, t0: float, t1: float) -> list[SimEvent]:
        """Exact range crossings for pairwise-linear motion on [t0, t1]."""
        out = []
        r = self.scenario.topology.comm_range
        nodes = sorted(self.mobility)
        for ai in range(len(nodes)):
            for bi in range(ai + 1, len(nodes)):
                a, b = nodes[ai], nodes[bi]
                ma, mb = self.mobility[a], self.mobility[b]
                va, vb = ma.velocity(t0), mb.velocity(t0)
                dx, dy = ma.pos[0] - mb.pos[0], ma.pos[1] - mb.pos[1]
                vx, vy = va[0] - vb[0], va[1] - vb[1]
                qa = vx * vx + vy * vy
                qb = 2.0 * (dx * vx + dy * vy)
                qc = dx * dx + dy * dy - r * r
                if qa <= 1e-18:
                    continue
                disc = qb * qb - 4.0 * qa * qc
                if disc <= 0.0:
                    continue
                sq = math.sqrt(disc)
                # squared distance is convex along linear relative motion, so
                # the earlier root always enters range and the later one leaves
                for s, up in (((-qb - sq) / (2 * qa), True), ((-qb + sq) / (2 * qa), False)):
                    if s > 1e-12 and t0 + s <= t1 + 1e-12:
                        out.append(self.schedule(t0 + s, EventKind.LINK_CHANGE, (a, b, up)))
        return out

    def _on_mobility_step(self) -> None:
        step = self.scenario.topology.step
        self.step_mobility(step)
        nxt = self.now + step
        if nxt <= self.end_time:
            self.schedule(nxt, EventKind.MOBILITY_STEP)

    # -- main loop -------------------------------------------------------------

    def run(self) -> "Simulation":
        last = (-1.0, 0)
        while self.queue:
            if self.queue[0].time > self.end_time + 1e-12:
                break
            ev = heapq.heappop(self.queue)
            assert (ev.time, ev.seq) > last, "events must dequeue in (time, seq) order"
            last = (ev.time, ev.seq)
            self.now = ev.time
            self.pop_count += 1
            if ev.kind is EventKind.PACKET_DELIVERY:
                self._on_delivery(*ev.payload)
            elif ev.kind is EventKind.HELLO_TIMER:
                self._on_hello_timer()
            elif ev.kind is EventKind.EVAPORATION_TIMER:
                self._on_evaporation_timer()
            elif ev.kind is EventKind.DATA_INJECTION:
                self._on_data_injection(*ev.payload)
            elif ev.kind is EventKind.ROUTE_EXPIRY:
                self._on_route_expiry(*ev.payload)
            elif ev.kind is EventKind.LINK_CHANGE:
                self._on_link_change(*ev.payload)
            elif ev.kind is EventKind.MOBILITY_STEP:
                self._on_mobility_step()
        # frames still in the air when the run ends count as dropped so the
        # sent = delivered + dropped ledger holds
        for ev in self.queue:
            if ev.kind is EventKind.PACKET_DELIVERY:
                self.counters["frames_dropped"] += 1
                self.counters["drop_end_of_run"] += 1
        self.queue.clear()
        self._flush_stuck_data()
        return self

    def _flush_stuck_data(self) -> None:
        """Packets still queued when the run ends count as offered but lost."""
        for i in sorted(self.agents):
            agent = self.agents[i]
            for dest in sorted(agent.data_queue):
                for seq, bits in agent.data_queue[dest]:
                    self.counters["data_queued_at_end"] += 1
                    marker = DataPacket(
                        source=i, destination=dest, seq=seq, size_bits=bits, path=(i, dest)
                    )
                    self._trace("drp", i, marker, self.end_time)

    # -- trace assembly -----------------------------------------------------------

    def trace_lines(self) -> list[str]:
        """Full canonical trace: parameter header, annotations, packet events."""
        if self.scenario.nodes.count == 0:
            return []
        sc = self.scenario
        lines = [
            f"# param mode={self.mode}",
            f"# param seed={self.seed}",
            f"# param end_time={sc.end_time!r}",
            f"# param beta_tx={sc.beta_tx!r}",
            f"# param beta_rx={sc.beta_rx!r}",
        ]
        for token in ("qry_request", "qry_reply", "upd", "error", "clr"):
            lines.append(f"# param bits_{token}={sc.control_bits[token]}")
        for t, total in self.cache_samples:
            lines.append(f"# cachesize t={t:.6f} total={total}")
        for fid, t, a, b in self.failure_events:
            nodes = len(self.reaction_sets.get(fid, ()))
            lines.append(f"# locality failure={fid} t={t:.6f} a={a} b={b} nodes={nodes}")
        lines.extend(sorted(r.encode() for r in self.records))
        return lines

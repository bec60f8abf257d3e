"""Discrete-event engine: event queue, unit-disk radio, CBR traffic.

Nodes only ever see frames and their own timers. Positions and the global
adjacency stay inside the engine.
"""

from __future__ import annotations

import dataclasses
import heapq
import math
import random
from dataclasses import dataclass
from typing import Any, Callable, Optional, TextIO

import numpy as np

from . import node as node_mod
from .adversary import BlackHole, Honest
from .aodv import CountMetric, DeliverToApp, Effect, NodeState, SetTimer, Transmit
from .messages import DataPacket, DriEntry, tag_name
from .metrics import Counters, MetricsReport, NodeRoster, finalize
from .mobility import MobilityTrace, generate_trace, positions_at_times, static_trace
from .scenario import Scenario, ValidationError, validate

CONTROL_TAGS = frozenset(("RREQ", "RREP", "RERR", "FRQ", "FRP", "ALARM"))

# event kinds, ordered only by (time, counter) in the heap
_ARRIVAL = 0
_TIMER = 1
_SEND = 2


class InvalidScenario(ValueError):
    pass


class ConservationError(AssertionError):
    pass


@dataclass(frozen=True)
class RadioModel:
    range: float = 200.0
    per_hop_latency: float = 0.001
    loss_probability: float = 0.0

    def __post_init__(self) -> None:
        if self.range <= 0:
            raise ValueError("radio range must be positive")
        if not 0 <= self.loss_probability <= 1:
            raise ValueError("loss_probability must lie in [0, 1]")


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    src: int
    dst: int
    rate: float
    payload: int
    start: float
    stop: float

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError("flow source and destination must differ")


def stream(seed: Any, name: str) -> random.Random:
    """Independent named generator, so toggling one feature never shifts another."""
    return random.Random(f"{seed}:{name}")


def adjacency(positions: np.ndarray, radio_range: float) -> np.ndarray:
    """Boolean unit-disk adjacency for an ``(N, 2)`` position array."""
    diff = positions[:, None, :] - positions[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    adj = dist2 <= radio_range * radio_range
    np.fill_diagonal(adj, False)
    return adj


def choose_blackholes(s: Scenario, seed: Any) -> tuple[int, ...]:
    if s.blackhole_ids:
        return tuple(sorted(s.blackhole_ids))
    if s.blackhole_count == 0:
        return ()
    return tuple(sorted(stream(seed, "placement").sample(range(s.nodes), s.blackhole_count)))


def choose_flows(s: Scenario, seed: Any, blackholes: tuple[int, ...]) -> list[FlowSpec]:
    end = s.duration_s
    if s.flow_list:
        return [
            FlowSpec(i, f.src, f.dst, s.rate_pps, s.payload_b, f.start, min(f.stop, end))
            for i, f in enumerate(s.flow_list)
        ]
    rng = stream(seed, "traffic")
    honest = [n for n in range(s.nodes) if n not in blackholes]
    used: set[tuple[int, int]] = set()
    flows = []
    for i in range(s.flows):
        while True:
            src, dst = rng.sample(honest, 2)
            if (src, dst) not in used:
                break
        used.add((src, dst))
        start = s.warmup_s + rng.uniform(0, s.flow_start_spread_s)
        stop = start + s.flow_duration_s if s.flow_duration_s else end
        flows.append(FlowSpec(i, src, dst, s.rate_pps, s.payload_b, start, min(stop, end)))
    return flows


def build_trace(s: Scenario, seed: Any) -> MobilityTrace:
    duration = max(s.duration_s, 1e-9)
    if s.positions:
        return static_trace(s.positions, duration, s.arena_m)
    rng = stream(seed, "mobility")
    if s.speed_max_mps == 0:
        pts = [(rng.uniform(0, s.arena_m), rng.uniform(0, s.arena_m)) for _ in range(s.nodes)]
        return static_trace(pts, duration, s.arena_m)
    return generate_trace(s.nodes, s.arena_m, s.speed_min_mps, s.speed_max_mps, s.pause_s, duration, rng)


def _history(s: Scenario) -> dict[int, dict[int, DriEntry]]:
    out: dict[int, dict[int, DriEntry]] = {}
    for n, peer, fb, tb in s.dri_history:
        table = out.setdefault(n, {})
        table[peer] = table.get(peer, DriEntry(0, 0)).merge(DriEntry(fb, tb))
    return out


Observer = Callable[["Simulator", float], None]


class Simulator:
    """One run of one scenario under one seed.

    ``log`` receives one line per transmission and reception when given.
    ``observer`` is called after every event with the engine and the time.
    """

    def __init__(
        self,
        scenario: Scenario,
        seed: Any = None,
        log: Optional[TextIO] = None,
        observer: Optional[Observer] = None,
    ) -> None:
        try:
            s = validate(scenario)
        except ValidationError as exc:
            raise InvalidScenario(str(exc)) from exc
        self.seed = s.seed if seed is None else seed
        if seed is not None and isinstance(seed, int):
            s = dataclasses.replace(s, seed=seed)
        self.scenario = s
        self.log = log
        self.observer = observer
        self.radio = RadioModel(s.range_m, s.per_hop_latency_s, s.loss_probability)
        self.warmup = s.warmup_s
        self.duration = s.duration_s

        self.blackholes = choose_blackholes(s, self.seed)
        self.flows = choose_flows(s, self.seed, self.blackholes)
        self.trace = build_trace(s, self.seed)
        self.roster = NodeRoster(s.node_labels(), frozenset(self.blackholes))
        self.counters = Counters()
        self._loss_rng = stream(self.seed, "loss")

        config = s.protocol_config()
        history = _history(s)
        group = self.blackholes
        self.nodes: list[NodeState] = []
        for i in range(s.nodes):
            if i in group:
                if s.collusion == "chain":
                    k = group.index(i)
                    partners = tuple(group[k + 1 :]) + tuple(group[:k])
                    behavior: Any = BlackHole(partners, s.seq_inflation, name_partner_in_frp=True)
                else:
                    behavior = BlackHole(tuple(b for b in group if b != i), s.seq_inflation)
                rng = stream(self.seed, f"adversary:{i}")
            else:
                behavior = Honest()
                rng = stream(self.seed, f"protocol:{i}")
            self.nodes.append(node_mod.new_node(i, config, behavior, rng, history.get(i)))

        self._queue: list[tuple] = []
        self._counter = 0
        self.now = 0.0
        self.events_processed = 0
        # packets whose generation fell inside the measurement window
        self._tracked: set[tuple[int, int]] = set()

        if s.static:
            self._tick_times = np.zeros(1)
            self._tick_positions = positions_at_times(self.trace, self._tick_times)
        else:
            count = int(math.floor(self.duration / s.tick_interval_s + 1e-9)) + 1
            self._tick_times = np.arange(count) * s.tick_interval_s
            self._tick_positions = positions_at_times(self.trace, self._tick_times)
        self._next_tick = 0
        self._adj = np.zeros((s.nodes, s.nodes), dtype=bool)
        self.neighbors: list[tuple[int, ...]] = [() for _ in range(s.nodes)]
        self._apply_tick()

        hello_rng = stream(self.seed, "hello")
        for i in range(s.nodes):
            self._push(hello_rng.uniform(0, config.hello_interval), _TIMER, i, "hello", None)
        for flow in self.flows:
            if flow.start < flow.stop:
                self._push(flow.start, _SEND, flow, 0, None)

    # -- queue --------------------------------------------------------------

    def _push(self, t: float, kind: int, a: Any, b: Any, c: Any) -> None:
        self._counter += 1
        heapq.heappush(self._queue, (t, self._counter, kind, a, b, c))

    # -- topology -----------------------------------------------------------

    def _apply_tick(self) -> None:
        adj = adjacency(self._tick_positions[self._next_tick], self.radio.range)
        self._next_tick += 1
        if not np.array_equal(adj, self._adj):
            self._adj = adj
            self.neighbors = [tuple(np.flatnonzero(row).tolist()) for row in adj]

    def in_range(self, a: int, b: int) -> bool:
        return bool(self._adj[a, b])

    def positions(self, t: float) -> np.ndarray:
        return positions_at_times(self.trace, np.array([t]))[0]

    # -- radio --------------------------------------------------------------

    def broadcast_frame(self, t: float, sender: int, msg: Any, to: Optional[int] = None) -> list[int]:
        """Schedule the arrival of one frame; returns the receivers it will reach."""
        if to is None:
            receivers = list(self.neighbors[sender])
        elif self._adj[sender, to]:
            receivers = [to]
        else:
            receivers = []
        p = self.radio.loss_probability
        if p > 0:
            receivers = [r for r in receivers if self._loss_rng.random() >= p]
        if receivers:
            self._push(t + self.radio.per_hop_latency, _ARRIVAL, receivers, sender, msg)
        return receivers

    def _transmit(self, sender: int, eff: Transmit, now: float) -> None:
        msg = eff.msg
        tag = tag_name(msg)
        if now >= self.warmup:
            self.counters.control_tx[tag] += 1
        if self.log is not None:
            self.log.write(f"{now:.6f} tx {sender} {'*' if eff.to is None else eff.to} {tag}\n")
        reached = self.broadcast_frame(now, sender, msg, eff.to)
        if not reached and type(msg) is DataPacket:
            self._drop(msg, "drop_link")

    # -- effects ------------------------------------------------------------

    def _drop(self, pkt: DataPacket, kind: str) -> None:
        key = (pkt.flow_id, pkt.seq_in_flow)
        if key in self._tracked:
            self._tracked.discard(key)
            setattr(self.counters, kind, getattr(self.counters, kind) + 1)

    def _count(self, who: int, eff: CountMetric, now: float) -> None:
        kind = eff.kind
        if kind.startswith("drop_"):
            self._drop(eff.detail, kind)
            return
        if now < self.warmup:
            return
        c = self.counters
        if kind == "false_rrep":
            c.false_rreps_sent += 1
            c.attacking_blackholes.add(who)
        elif kind == "route_learned":
            if eff.detail in self.roster.blackholes and eff.detail != who:
                c.poisoned_nodes.add(who)
        elif kind == "flagged":
            c.flagged |= eff.detail
        elif kind == "session_opened":
            c.sessions_opened += 1
        elif kind.startswith("verdict_"):
            c.verdicts[kind] += 1

    def _apply(self, who: int, effects: list[Effect], now: float) -> None:
        for eff in effects:
            t = type(eff)
            if t is Transmit:
                self._transmit(who, eff, now)
            elif t is SetTimer:
                self._push(eff.fire_time, _TIMER, who, eff.kind, eff.key)
            elif t is CountMetric:
                self._count(who, eff, now)
            elif t is DeliverToApp:
                key = (eff.pkt.flow_id, eff.pkt.seq_in_flow)
                if key in self._tracked:
                    self._tracked.discard(key)
                    self.counters.data_delivered += 1
            else:
                raise TypeError(f"unknown effect {eff!r}")

    # -- main loop ----------------------------------------------------------

    def _send(self, flow: FlowSpec, seq: int, now: float) -> None:
        pkt = DataPacket(flow.flow_id, flow.src, flow.dst, seq, flow.payload)
        if now >= self.warmup:
            self._tracked.add((flow.flow_id, seq))
            self.counters.data_generated += 1
        self._apply(flow.src, node_mod.originate(self.nodes[flow.src], pkt, now), now)
        nxt = flow.start + (seq + 1) / flow.rate
        if nxt < flow.stop:
            self._push(nxt, _SEND, flow, seq + 1, None)

    def run(self) -> MetricsReport:
        queue = self._queue
        ticks = self._tick_times
        n_ticks = len(ticks)
        end = self.duration
        log = self.log
        nodes = self.nodes
        while queue and queue[0][0] <= end:
            t = queue[0][0]
            # topology ticks at or before this instant run first
            while self._next_tick < n_ticks and ticks[self._next_tick] <= t:
                self._apply_tick()
            t, _, kind, a, b, c = heapq.heappop(queue)
            self.now = t
            if kind == _ARRIVAL:
                tag = tag_name(c) if log is not None else ""
                for receiver in a:
                    if log is not None:
                        log.write(f"{t:.6f} rx {b} {receiver} {tag}\n")
                    self._apply(receiver, node_mod.handle_frame(nodes[receiver], c, b, t), t)
            elif kind == _TIMER:
                self._apply(a, node_mod.handle_timer(nodes[a], b, c, t), t)
            else:
                self._send(a, b, t)
            self.events_processed += 1
            if self.observer is not None:
                self.observer(self, t)
        return self._finish()

    def in_flight(self) -> int:
        keys: set[tuple[int, int]] = set()
        for state in self.nodes:
            for disc in state.pending.values():
                keys.update((p.flow_id, p.seq_in_flow) for p in disc.buffer)
        for t, _, kind, a, b, c in self._queue:
            if kind == _ARRIVAL and type(c) is DataPacket:
                keys.add((c.flow_id, c.seq_in_flow))
        return len(keys & self._tracked)

    def _finish(self) -> MetricsReport:
        c = self.counters
        c.in_flight_at_end = self.in_flight()
        if not c.conservation_holds() or c.in_flight_at_end != len(self._tracked):
            raise ConservationError(
                f"generated {c.data_generated} != accounted {c.accounted()} "
                f"(untracked remainder {len(self._tracked)})"
            )
        return finalize(c, self.roster, self.scenario, self.seed)


def run(scenario: Scenario, seed: Any = None, log: Optional[TextIO] = None) -> MetricsReport:
    """Simulate ``scenario`` under ``seed`` (default: the scenario's own seed)."""
    return Simulator(scenario, seed, log).run()

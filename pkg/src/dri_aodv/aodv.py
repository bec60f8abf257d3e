"""Baseline AODV as a sans-I/O state machine.

Every handler takes a :class:`NodeState`, the triggering input and the
current simulation time, mutates the state, and returns a list of effects
for the caller (normally :mod:`dri_aodv.simkernel`) to carry out. Nothing in
here reads clocks, positions or other nodes.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Optional, Union

from .messages import DataPacket, Hello, Rerr, Rrep, Rreq

if TYPE_CHECKING:
    from .defense import CrossCheckSession, DriTable


@dataclass(frozen=True)
class ProtocolConfig:
    """Timer and limit constants (RFC 3561 defaults where applicable)."""

    hello_interval: float = 1.0
    allowed_hello_loss: int = 3
    active_route_lifetime: float = 10.0
    rreq_retries: int = 2
    discovery_timeout: float = 1.0
    buffer_cap: int = 64
    probe_depth_limit: int = 5
    session_timeout: float = 3.0
    defense: bool = False
    max_hops: int = 0xFFFF


# -- effects ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Transmit:
    msg: Any
    to: Optional[int] = None  # None means one-hop broadcast

    @property
    def broadcast(self) -> bool:
        return self.to is None


@dataclass(frozen=True, slots=True)
class DeliverToApp:
    pkt: DataPacket


@dataclass(frozen=True, slots=True)
class SetTimer:
    kind: str
    fire_time: float
    key: Any = None


@dataclass(frozen=True, slots=True)
class CountMetric:
    kind: str
    detail: Any = None


Effect = Union[Transmit, DeliverToApp, SetTimer, CountMetric]


# -- state ------------------------------------------------------------------


@dataclass(slots=True)
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    dest_seq: int
    expiry: float
    valid: bool = True
    precursors: set[int] = field(default_factory=set)


@dataclass(slots=True)
class Discovery:
    """A pending route discovery for one destination plus its packet buffer."""

    destination: int
    broadcast_id: int
    retries: int = 0
    buffer: deque = field(default_factory=deque)
    # Responders rejected during this discovery; retries route around them.
    avoid: set[int] = field(default_factory=set)


@dataclass(eq=False)
class NodeState:
    me: int
    config: ProtocolConfig
    dri: DriTable
    behavior: Any
    rng: random.Random
    own_seq: int = 0
    broadcast_counter: int = 0
    routes: dict[int, RouteEntry] = field(default_factory=dict)
    seen_rreqs: set[tuple[int, int]] = field(default_factory=set)
    pending: dict[int, Discovery] = field(default_factory=dict)
    neighbors: dict[int, float] = field(default_factory=dict)
    blacklist: set[int] = field(default_factory=set)
    # nodes this node itself caught lying to a trusted witness
    convicted: set[int] = field(default_factory=set)
    # highest destination sequence number heard in any RREP/RERR
    seq_hint: dict[int, int] = field(default_factory=dict)
    # destinations this node originated data for -> last send time
    active_dests: dict[int, float] = field(default_factory=dict)
    sessions: dict[int, CrossCheckSession] = field(default_factory=dict)
    session_counter: int = 0
    seen_alarms: set[int] = field(default_factory=set)
    alarm_counter: int = 0

    def usable_route(self, dest: int, now: float) -> Optional[RouteEntry]:
        entry = self.routes.get(dest)
        if entry is None or not entry.valid:
            return None
        if entry.expiry <= now:
            expire(entry)
            return None
        if entry.next_hop in self.blacklist:
            return None
        return entry

    def buffered_count(self) -> int:
        return sum(len(d.buffer) for d in self.pending.values())


def expire(entry: RouteEntry) -> None:
    """Invalidate a route, bumping its sequence number as RFC 3561 does."""
    if entry.valid:
        entry.valid = False
        entry.dest_seq += 1


def known_seq(state: NodeState, dest: int) -> Optional[int]:
    entry = state.routes.get(dest)
    hint = state.seq_hint.get(dest)
    if entry is None:
        return hint
    if hint is None:
        return entry.dest_seq
    return max(entry.dest_seq, hint)


def note_seq(state: NodeState, dest: int, seq: int) -> None:
    if seq > state.seq_hint.get(dest, -1):
        state.seq_hint[dest] = seq


def update_route(
    state: NodeState,
    dest: int,
    next_hop: int,
    hop_count: int,
    dest_seq: int,
    lifetime: float,
    now: float,
) -> bool:
    """Install or replace the route to ``dest`` if the offer is fresher.

    Fresher means a higher sequence number, or an equal one with fewer hops
    (or replacing an invalid entry). Ties keep the incumbent.
    """
    entry = state.routes.get(dest)
    if entry is None:
        state.routes[dest] = RouteEntry(dest, next_hop, hop_count, dest_seq, now + lifetime)
        return True
    if entry.valid and entry.expiry <= now:
        expire(entry)
    if dest_seq > entry.dest_seq or (
        dest_seq == entry.dest_seq and (not entry.valid or hop_count < entry.hop_count)
    ):
        entry.next_hop = next_hop
        entry.hop_count = hop_count
        entry.dest_seq = dest_seq
        entry.expiry = now + lifetime
        entry.valid = True
        return True
    return False


def refresh(entry: RouteEntry, state: NodeState, now: float) -> None:
    expiry = now + state.config.active_route_lifetime
    if expiry > entry.expiry:
        entry.expiry = expiry


def invalidate_via(state: NodeState, nodes: set[int] | frozenset[int]) -> list[tuple[int, int]]:
    """Invalidate every valid route whose next hop is in ``nodes``."""
    broken = []
    for dest in sorted(state.routes):
        entry = state.routes[dest]
        if entry.valid and entry.next_hop in nodes:
            expire(entry)
            broken.append((dest, entry.dest_seq))
    return broken


# -- discovery --------------------------------------------------------------


def send_rreq(state: NodeState, dest: int, avoid: frozenset[int] = frozenset()) -> Rreq:
    """Build a fresh RREQ for ``dest``; the caller transmits it."""
    state.own_seq += 1
    state.broadcast_counter += 1
    rreq = Rreq(
        origin=state.me,
        origin_seq=state.own_seq,
        broadcast_id=state.broadcast_counter,
        destination=dest,
        dest_seq_known=known_seq(state, dest),
        hop_count=0,
        avoid=avoid,
    )
    state.seen_rreqs.add((state.me, rreq.broadcast_id))
    return rreq


def start_discovery(state: NodeState, dest: int, now: float) -> list[Effect]:
    disc = state.pending.get(dest)
    if disc is None:
        disc = state.pending[dest] = Discovery(dest, 0)
    return _discovery_attempt(state, disc, now)


def _discovery_attempt(state: NodeState, disc: Discovery, now: float) -> list[Effect]:
    rreq = send_rreq(state, disc.destination, frozenset(disc.avoid))
    disc.broadcast_id = rreq.broadcast_id
    return [
        Transmit(rreq),
        SetTimer("discovery", now + state.config.discovery_timeout, (disc.destination, rreq.broadcast_id)),
    ]


def restart_discovery(state: NodeState, dest: int, now: float) -> list[Effect]:
    """Send a new RREQ for a discovery that is still pending, without using a retry."""
    disc = state.pending.get(dest)
    if disc is None:
        return []
    return _discovery_attempt(state, disc, now)


def handle_discovery_timer(state: NodeState, key: tuple[int, int], now: float) -> list[Effect]:
    dest, bcid = key
    disc = state.pending.get(dest)
    if disc is None or disc.broadcast_id != bcid:
        return []
    if state.usable_route(dest, now) is not None:
        return flush(state, dest, now)
    if disc.retries < state.config.rreq_retries:
        disc.retries += 1
        return _discovery_attempt(state, disc, now)
    del state.pending[dest]
    return [CountMetric("drop_no_route", pkt) for pkt in disc.buffer]


def flush(state: NodeState, dest: int, now: float) -> list[Effect]:
    """Send everything buffered for ``dest`` over the now-usable route."""
    disc = state.pending.pop(dest, None)
    if disc is None:
        return []
    effects: list[Effect] = []
    for pkt in disc.buffer:
        effects.extend(originate_data(state, pkt, now))
    return effects


# -- data -------------------------------------------------------------------


def originate_data(state: NodeState, pkt: DataPacket, now: float) -> list[Effect]:
    state.active_dests[pkt.dst] = now
    route = state.usable_route(pkt.dst, now)
    if route is not None:
        refresh(route, state, now)
        state.dri.note_through(route.next_hop)
        return [Transmit(pkt, route.next_hop)]
    effects: list[Effect] = []
    disc = state.pending.get(pkt.dst)
    if disc is None:
        effects.extend(start_discovery(state, pkt.dst, now))
        disc = state.pending[pkt.dst]
    disc.buffer.append(pkt)
    if len(disc.buffer) > state.config.buffer_cap:
        effects.append(CountMetric("drop_buffer", disc.buffer.popleft()))
    return effects


def deliver(state: NodeState, pkt: DataPacket, sender: int, now: float) -> list[Effect]:
    state.dri.note_from(sender)
    return [DeliverToApp(pkt)]


def forward_data(state: NodeState, pkt: DataPacket, sender: int, now: float) -> list[Effect]:
    state.dri.note_from(sender)
    back = state.usable_route(pkt.src, now)
    if back is not None:
        refresh(back, state, now)
    route = state.usable_route(pkt.dst, now)
    if route is None:
        entry = state.routes.get(pkt.dst)
        seq = entry.dest_seq if entry is not None else 0
        return [CountMetric("drop_no_route", pkt), Transmit(Rerr(((pkt.dst, seq),)))]
    refresh(route, state, now)
    route.precursors.add(sender)
    state.dri.note_through(route.next_hop)
    return [Transmit(pkt, route.next_hop)]


# -- route discovery messages -----------------------------------------------


def handle_rreq(state: NodeState, rreq: Rreq, sender: int, now: float) -> list[Effect]:
    me = state.me
    if me in rreq.avoid or sender in state.blacklist:
        return []
    key = (rreq.origin, rreq.broadcast_id)
    if key in state.seen_rreqs:
        return []
    state.seen_rreqs.add(key)
    cfg = state.config
    update_route(state, rreq.origin, sender, rreq.hop_count + 1, rreq.origin_seq, cfg.active_route_lifetime, now)

    if rreq.destination == me:
        # strictly above anything the path has heard, so the reply wins
        state.own_seq = max(state.own_seq, rreq.dest_seq_known or 0) + 1
        rrep = Rrep(rreq.origin, me, state.own_seq, 0, cfg.active_route_lifetime, me)
        return [Transmit(rrep, sender)]

    if not rreq.avoid:
        route = state.usable_route(rreq.destination, now)
        if (
            route is not None
            and route.next_hop != sender
            and (rreq.dest_seq_known is None or route.dest_seq >= rreq.dest_seq_known)
        ):
            route.precursors.add(sender)
            rrep = Rrep(
                rreq.origin,
                rreq.destination,
                route.dest_seq,
                route.hop_count,
                round(route.expiry - now, 3),
                me,
            )
            return [Transmit(rrep, sender)]

    if rreq.hop_count + 1 > cfg.max_hops:
        return []
    seq = known_seq(state, rreq.destination)
    if seq is not None and (rreq.dest_seq_known is None or seq > rreq.dest_seq_known):
        rreq = replace(rreq, dest_seq_known=seq)
    return [Transmit(replace(rreq, hop_count=rreq.hop_count + 1))]


def handle_rrep(state: NodeState, rrep: Rrep, sender: int, now: float) -> list[Effect]:
    """RREP handling at intermediate nodes and at a baseline (undefended) origin."""
    if rrep.responder in state.blacklist or sender in state.blacklist:
        return [CountMetric("rrep_blacklisted")]
    note_seq(state, rrep.destination, rrep.dest_seq)
    hops = rrep.hop_count + 1
    effects: list[Effect] = []
    installed = update_route(state, rrep.destination, sender, hops, rrep.dest_seq, rrep.lifetime, now)
    if installed:
        effects.append(CountMetric("route_learned", rrep.responder))

    if rrep.origin == state.me:
        if state.usable_route(rrep.destination, now) is not None:
            effects.extend(flush(state, rrep.destination, now))
        return effects
    if not installed:
        # relaying a route we do not follow ourselves could close a loop
        effects.append(CountMetric("rrep_stale"))
        return effects

    back = state.usable_route(rrep.origin, now)
    if back is None:
        effects.append(CountMetric("rrep_no_reverse_route"))
        return effects
    refresh(back, state, now)
    back.precursors.add(sender)
    fwd = state.routes[rrep.destination]
    if fwd.valid and fwd.next_hop == sender:
        fwd.precursors.add(back.next_hop)
    effects.append(Transmit(replace(rrep, hop_count=hops), back.next_hop))
    return effects


# -- route maintenance ------------------------------------------------------


def _rediscover(state: NodeState, broken: list[tuple[int, int]], now: float) -> list[Effect]:
    effects: list[Effect] = []
    horizon = state.config.active_route_lifetime
    for dest, _ in broken:
        last = state.active_dests.get(dest)
        if last is not None and now - last < horizon and dest not in state.pending:
            effects.extend(start_discovery(state, dest, now))
    return effects


def handle_link_break(state: NodeState, dead_neighbor: int, now: float) -> list[Effect]:
    state.neighbors.pop(dead_neighbor, None)
    broken = invalidate_via(state, {dead_neighbor})
    if not broken:
        return []
    effects: list[Effect] = [Transmit(Rerr(tuple(broken)))]
    effects.extend(_rediscover(state, broken, now))
    return effects


def handle_rerr(state: NodeState, rerr: Rerr, sender: int, now: float) -> list[Effect]:
    broken = []
    relay = []
    for dest, seq in rerr.unreachable:
        note_seq(state, dest, seq)
        entry = state.routes.get(dest)
        if entry is None or not entry.valid or entry.next_hop != sender:
            continue
        entry.valid = False
        entry.dest_seq = max(entry.dest_seq + 1, seq)
        broken.append((dest, entry.dest_seq))
        if entry.precursors:
            relay.append((dest, entry.dest_seq))
    effects: list[Effect] = []
    if relay:
        effects.append(Transmit(Rerr(tuple(relay))))
    effects.extend(_rediscover(state, broken, now))
    return effects


def note_neighbor(state: NodeState, sender: int, now: float) -> None:
    state.neighbors[sender] = now


def handle_hello(state: NodeState, hello: Hello, sender: int, now: float) -> list[Effect]:
    state.neighbors[sender] = now
    return []


def handle_hello_timer(state: NodeState, now: float) -> list[Effect]:
    cfg = state.config
    effects: list[Effect] = [
        Transmit(Hello(state.me)),
        SetTimer("hello", now + cfg.hello_interval),
    ]
    limit = cfg.allowed_hello_loss * cfg.hello_interval
    lost = [n for n, heard in state.neighbors.items() if now - heard > limit]
    for n in sorted(lost):
        effects.extend(handle_link_break(state, n, now))
    return effects

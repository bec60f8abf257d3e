"""DRI tables and the source-side cross-check against cooperative black holes.

A source that receives a route reply from a node it has never routed data
through interrogates the replier's claimed next hop (and, if that node is
also untrusted, the next hop it claims in turn) over paths that avoid every
node already under scrutiny. Once a trusted witness answers, the claims are
checked link by link back towards the original replier.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Union

from . import aodv
from .aodv import CountMetric, Effect, NodeState, SetTimer, Transmit
from .messages import Alarm, DriEntry, Frp, Frq, Rrep

NO_HISTORY = DriEntry(0, 0)


class DriTable:
    """Per-neighbor (from, through) bits. Absent peers read as ``00``."""

    __slots__ = ("_bits",)

    def __init__(self, entries: Optional[dict[int, DriEntry]] = None) -> None:
        self._bits: dict[int, int] = {}
        for node, entry in (entries or {}).items():
            self.merge(node, entry)

    def get(self, node: int) -> DriEntry:
        return DriEntry.from_byte(self._bits.get(node, 0))

    __getitem__ = get

    def note_from(self, node: int) -> None:
        self._bits[node] = self._bits.get(node, 0) | 0b10

    def note_through(self, node: int) -> None:
        self._bits[node] = self._bits.get(node, 0) | 0b01

    def merge(self, node: int, entry: DriEntry) -> None:
        self._bits[node] = self._bits.get(node, 0) | entry.to_byte()

    def items(self) -> Iterator[tuple[int, DriEntry]]:
        for node in sorted(self._bits):
            yield node, DriEntry.from_byte(self._bits[node])

    def __len__(self) -> int:
        return len(self._bits)

    def __repr__(self) -> str:
        body = ", ".join(f"{n}: {e}" for n, e in self.items())
        return f"DriTable({{{body}}})"


def is_reliable(dri: DriTable, node: int) -> bool:
    """A node is trusted once data has been routed through it."""
    return dri.get(node).through == 1


class Judgement(enum.Enum):
    BLACKHOLE_SUSPECT = "blackhole_suspect"
    NOT_IMPLICATED = "not_implicated"


def judge(suspect_claim: DriEntry, nhn_reply: DriEntry) -> Judgement:
    """The suspect says it sent data through the witness; the witness never saw any."""
    if suspect_claim.through == 1 and nhn_reply.from_ == 0:
        return Judgement.BLACKHOLE_SUSPECT
    return Judgement.NOT_IMPLICATED


# -- verdicts ---------------------------------------------------------------


@dataclass(frozen=True)
class RouteSecure:
    via: int


@dataclass(frozen=True)
class Blackholes:
    nodes: frozenset[int]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise ValueError("Blackholes verdict needs at least one node")


@dataclass(frozen=True)
class Inconclusive:
    reason: str


Verdict = Union[RouteSecure, Blackholes, Inconclusive]


class SessionState(enum.Enum):
    AWAITING_ROUTE_TO_TARGET = "awaiting_route"
    AWAITING_FRP = "awaiting_frp"
    CLOSED = "closed"


@dataclass
class CrossCheckSession:
    """One interrogation of the chain behind an untrusted route reply.

    ``chain[i]`` claimed ``claims[i]`` about its next hop (``chain[i+1]`` or,
    for the last member, ``probe_target``); ``replies[i]`` is what the next
    node in line reported about ``chain[i]``.
    """

    session_id: int
    wanted_destination: int
    current_suspect: int
    probe_target: int
    chain: list[int]
    claims: list[DriEntry]
    visited: set[int]
    original_rrep: Rrep
    original_from: int
    started_at: float
    state: SessionState = SessionState.AWAITING_ROUTE_TO_TARGET
    replies: list[DriEntry] = field(default_factory=list)
    probe_broadcast_id: int = 0
    verdict: Optional[Verdict] = None


# -- responder side ---------------------------------------------------------


def fill_rrep_extension(state: NodeState, base_rrep: Rrep) -> Rrep:
    if base_rrep.responder == base_rrep.destination:
        return base_rrep
    route = state.routes[base_rrep.destination]
    nhn = route.next_hop
    return replace(base_rrep, next_hop_node=nhn, dri_for_nhn=state.dri.get(nhn))


def answer_frq(state: NodeState, frq: Frq, now: float) -> Frp:
    about = state.dri.get(frq.suspect_in)
    route = state.usable_route(frq.wanted_destination, now)
    if route is None:
        return Frp(frq.asker, state.me, about)
    return Frp(frq.asker, state.me, about, route.next_hop, state.dri.get(route.next_hop))


# -- source side ------------------------------------------------------------


def active_session_for(state: NodeState, dest: int) -> Optional[CrossCheckSession]:
    for sess in state.sessions.values():
        if sess.wanted_destination == dest and sess.state is not SessionState.CLOSED:
            return sess
    return None


def _accept(state: NodeState, rrep: Rrep, sender: int, now: float) -> list[Effect]:
    effects: list[Effect] = []
    hops = rrep.hop_count + 1
    if aodv.update_route(state, rrep.destination, sender, hops, rrep.dest_seq, rrep.lifetime, now):
        effects.append(CountMetric("route_learned", rrep.responder))
    if state.usable_route(rrep.destination, now) is not None:
        effects.extend(aodv.flush(state, rrep.destination, now))
    return effects


def _probe(state: NodeState, sess: CrossCheckSession, now: float) -> list[Effect]:
    rreq = aodv.send_rreq(state, sess.probe_target, frozenset(sess.visited))
    sess.probe_broadcast_id = rreq.broadcast_id
    sess.state = SessionState.AWAITING_ROUTE_TO_TARGET
    return [
        Transmit(rreq),
        SetTimer("probe", now + state.config.discovery_timeout, (sess.session_id, rreq.broadcast_id)),
    ]


def on_rrep_at_source(
    state: NodeState, rrep: Rrep, sender: int, now: float
) -> tuple[list[Effect], Optional[Verdict]]:
    """Route reply arriving at the node that asked for it, defense enabled."""
    if rrep.responder in state.blacklist or sender in state.blacklist:
        return [CountMetric("rrep_blacklisted")], None
    dest = rrep.destination
    aodv.note_seq(state, dest, rrep.dest_seq)
    effects: list[Effect] = []

    # A reply from a probe target opens the avoid-respecting path for the FRq.
    for sess in state.sessions.values():
        if (
            sess.state is SessionState.AWAITING_ROUTE_TO_TARGET
            and sess.probe_target == dest
            and rrep.responder == dest
        ):
            aodv.update_route(state, dest, sender, rrep.hop_count + 1, rrep.dest_seq, rrep.lifetime, now)
            frq = Frq(state.me, sess.current_suspect, sess.probe_target, sess.wanted_destination)
            effects.append(Transmit(frq, sender))
            sess.state = SessionState.AWAITING_FRP

    disc = state.pending.get(dest)
    if effects and disc is None:
        return effects, None
    responder = rrep.responder
    if responder == dest or is_reliable(state.dri, responder):
        if disc is None and state.usable_route(dest, now) is None:
            # nobody asked for this destination any more
            return effects, None
        effects.extend(_accept(state, rrep, sender, now))
        return effects, RouteSecure(responder)

    if disc is None:
        return effects, None
    if not rrep.has_extension:
        disc.avoid.add(responder)
        effects.append(CountMetric("verdict_inconclusive", "missing_extension"))
        return effects, Inconclusive("missing_extension")
    if active_session_for(state, dest) is not None:
        disc.avoid.add(responder)
        return effects, None

    disc.avoid.add(responder)
    state.session_counter += 1
    nhn = rrep.next_hop_node
    assert nhn is not None and rrep.dri_for_nhn is not None
    sess = CrossCheckSession(
        session_id=state.session_counter,
        wanted_destination=dest,
        current_suspect=responder,
        probe_target=nhn,
        chain=[responder],
        claims=[rrep.dri_for_nhn],
        visited={responder},
        original_rrep=rrep,
        original_from=sender,
        started_at=now,
    )
    state.sessions[sess.session_id] = sess
    effects.append(CountMetric("session_opened", (responder, nhn)))
    if nhn in state.convicted and rrep.dri_for_nhn.through == 1:
        # vouched for by a proven liar: the witness step has already been done
        effects.extend(_close(state, sess, Blackholes(frozenset(sess.chain)), now))
        return effects, sess.verdict
    if nhn == state.me or nhn in state.blacklist:
        effects.extend(_close(state, sess, Inconclusive("implausible_next_hop"), now))
        return effects, sess.verdict
    effects.append(SetTimer("session", now + state.config.session_timeout, sess.session_id))
    effects.extend(_probe(state, sess, now))
    return effects, None


def on_frp_at_source(state: NodeState, frp: Frp, now: float) -> tuple[list[Effect], Optional[Verdict]]:
    sess = None
    for candidate in state.sessions.values():
        if candidate.state is SessionState.AWAITING_FRP and candidate.probe_target == frp.responder:
            sess = candidate
            break
    if sess is None:
        return [CountMetric("stale_frp")], None

    sess.replies.append(frp.dri_for_suspect)
    witness = frp.responder
    if is_reliable(state.dri, witness):
        return _judge_chain(state, sess, frp, now)

    nxt = frp.own_next_hop
    if nxt is not None and nxt in state.convicted and frp.dri_for_own_next_hop.through == 1:
        culprits = frozenset(sess.chain) | {witness}
        return _close(state, sess, Blackholes(culprits), now), sess.verdict
    if nxt is None:
        return _close(state, sess, Inconclusive("chain_ended_unverified"), now), sess.verdict
    if len(sess.chain) + 1 > state.config.probe_depth_limit:
        return _close(state, sess, Inconclusive("depth_limit"), now), sess.verdict
    if nxt == state.me or nxt in sess.visited or nxt == witness or nxt in state.blacklist:
        return _close(state, sess, Inconclusive("implausible_next_hop"), now), sess.verdict

    assert frp.dri_for_own_next_hop is not None
    sess.chain.append(witness)
    sess.claims.append(frp.dri_for_own_next_hop)
    sess.visited.add(witness)
    sess.current_suspect = witness
    sess.probe_target = nxt
    return _probe(state, sess, now), None


def _judge_chain(
    state: NodeState, sess: CrossCheckSession, frp: Frp, now: float
) -> tuple[list[Effect], Optional[Verdict]]:
    # Walk back from the trusted witness: each vindicated member's report
    # about its predecessor becomes admissible evidence in turn.
    last = len(sess.chain) - 1
    for j in range(last, -1, -1):
        claim = sess.claims[j]
        report = sess.replies[j]
        if judge(claim, report) is Judgement.BLACKHOLE_SUSPECT:
            culprits = frozenset(sess.chain[: j + 1])
            state.convicted |= culprits
            return _close(state, sess, Blackholes(culprits), now), sess.verdict
        if j == last and claim.through == 0:
            onward = frp.own_next_hop is not None or frp.responder == sess.wanted_destination
            if not onward:
                return _close(state, sess, Inconclusive("unsupported_claim"), now), sess.verdict
    return _close(state, sess, RouteSecure(sess.chain[0]), now), sess.verdict


def _close(state: NodeState, sess: CrossCheckSession, verdict: Verdict, now: float) -> list[Effect]:
    sess.state = SessionState.CLOSED
    sess.verdict = verdict
    effects: list[Effect] = []
    dest = sess.wanted_destination
    if isinstance(verdict, RouteSecure):
        effects.append(CountMetric("verdict_secure", verdict.via))
        state.dri.merge(verdict.via, DriEntry(0, 1))
        disc = state.pending.get(dest)
        if disc is not None:
            disc.avoid.discard(verdict.via)
        effects.extend(_accept(state, sess.original_rrep, sess.original_from, now))
    elif isinstance(verdict, Blackholes):
        effects.append(CountMetric("verdict_blackholes", verdict.nodes))
        effects.extend(raise_alarm(state, verdict.nodes, now))
        if dest in state.pending and state.usable_route(dest, now) is None:
            effects.extend(aodv.restart_discovery(state, dest, now))
    else:
        effects.append(CountMetric("verdict_inconclusive", verdict.reason))
    return effects


def handle_session_timer(state: NodeState, session_id: int, now: float) -> list[Effect]:
    sess = state.sessions.get(session_id)
    if sess is None or sess.state is SessionState.CLOSED:
        return []
    return _close(state, sess, Inconclusive("timeout"), now)


def handle_probe_timer(state: NodeState, key: tuple[int, int], now: float) -> list[Effect]:
    session_id, bcid = key
    sess = state.sessions.get(session_id)
    if (
        sess is None
        or sess.state is not SessionState.AWAITING_ROUTE_TO_TARGET
        or sess.probe_broadcast_id != bcid
    ):
        return []
    if now + state.config.discovery_timeout > sess.started_at + state.config.session_timeout:
        return []
    return _probe(state, sess, now)


# -- alarms -----------------------------------------------------------------


def _blacklist(state: NodeState, nodes: frozenset[int]) -> None:
    fresh = set(nodes) - {state.me} - state.blacklist
    if fresh:
        state.blacklist |= fresh
        aodv.invalidate_via(state, fresh)


def raise_alarm(state: NodeState, nodes: frozenset[int], now: float) -> list[Effect]:
    _blacklist(state, nodes)
    state.alarm_counter += 1
    alarm = Alarm(state.me, nodes, (state.me << 16) | (state.alarm_counter & 0xFFFF))
    state.seen_alarms.add(alarm.alarm_id)
    return [CountMetric("flagged", nodes), Transmit(alarm)]


def handle_alarm(state: NodeState, alarm: Alarm, sender: int, now: float) -> list[Effect]:
    if alarm.alarm_id in state.seen_alarms:
        return []
    state.seen_alarms.add(alarm.alarm_id)
    _blacklist(state, alarm.blackholes)
    return [CountMetric("flagged", alarm.blackholes), Transmit(alarm)]

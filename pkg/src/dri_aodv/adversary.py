"""Black-hole behavior: forged route replies, silent drops, colluding answers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from . import aodv
from .aodv import CountMetric, Effect, NodeState, Transmit
from .messages import DataPacket, DriEntry, Frp, Frq, Rrep, Rreq

ALL_POSITIVE = DriEntry(1, 1)
CLAIMED_USE = DriEntry(0, 1)


@dataclass(frozen=True)
class Honest:
    pass


@dataclass(frozen=True)
class BlackHole:
    """A node that attracts routes with inflated sequence numbers and drops data.

    With ``name_partner_in_frp`` set the node names its next partner as its
    own next hop when cross-checked, instead of a random honest neighbor.
    """

    partners: tuple[int, ...] = ()
    seq_inflation: int = 100
    name_partner_in_frp: bool = False


NodeBehavior = Union[Honest, BlackHole]


def _validate(state: NodeState) -> BlackHole:
    behavior = state.behavior
    if not isinstance(behavior, BlackHole):
        raise TypeError(f"node {state.me} is not a black hole")
    if state.me in behavior.partners:
        raise ValueError(f"black hole {state.me} lists itself as a partner")
    return behavior


def blackhole_on_rreq(state: NodeState, rreq: Rreq, sender: int, now: float) -> list[Effect]:
    behavior = _validate(state)
    if state.me in rreq.avoid:
        return []
    key = (rreq.origin, rreq.broadcast_id)
    if key in state.seen_rreqs:
        return []
    state.seen_rreqs.add(key)
    aodv.update_route(
        state, rreq.origin, sender, rreq.hop_count + 1, rreq.origin_seq,
        state.config.active_route_lifetime, now,
    )
    if behavior.partners:
        nhn: Optional[int] = behavior.partners[0]
    else:
        choices = sorted(n for n in state.neighbors if n != sender)
        nhn = state.rng.choice(choices) if choices else None
    forged_seq = (rreq.dest_seq_known or 0) + behavior.seq_inflation
    rrep = Rrep(
        origin=rreq.origin,
        destination=rreq.destination,
        dest_seq=min(forged_seq, 0xFFFFFFFF),
        hop_count=1,
        lifetime=state.config.active_route_lifetime,
        responder=state.me,
        next_hop_node=nhn,
        dri_for_nhn=CLAIMED_USE if nhn is not None else None,
    )
    return [CountMetric("false_rrep"), Transmit(rrep, sender)]


def blackhole_on_data(state: NodeState, pkt: DataPacket) -> list[Effect]:
    _validate(state)
    return [CountMetric("drop_malicious", pkt)]


def colluder_answer_frq(state: NodeState, frq: Frq, now: float) -> Frp:
    """Vouch for the suspect and point the prober at somebody plausible."""
    behavior = _validate(state)
    exclude = {frq.asker, frq.suspect_in, frq.wanted_destination, state.me}
    nxt: Optional[int] = None
    if behavior.name_partner_in_frp:
        nxt = next((p for p in behavior.partners if p not in exclude), None)
    if nxt is None:
        neighbors = sorted(n for n in state.neighbors if n not in exclude)
        honest = [n for n in neighbors if n not in behavior.partners]
        if honest:
            nxt = state.rng.choice(honest)
        elif neighbors:
            nxt = state.rng.choice(neighbors)
    if nxt is None:
        return Frp(frq.asker, state.me, ALL_POSITIVE)
    return Frp(frq.asker, state.me, ALL_POSITIVE, nxt, ALL_POSITIVE)

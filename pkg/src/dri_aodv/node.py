"""Per-node event dispatch: routes each input to the honest, defended or
malicious handler and applies the behavior-specific overrides."""

from __future__ import annotations

import random
from typing import Optional

from . import adversary, aodv, defense
from .adversary import BlackHole, Honest, NodeBehavior
from .aodv import CountMetric, Effect, NodeState, ProtocolConfig, Transmit
from .defense import DriTable
from .messages import Alarm, DataPacket, DriEntry, Frp, Frq, Hello, Message, Rerr, Rrep, Rreq


def new_node(
    me: int,
    config: ProtocolConfig,
    behavior: Optional[NodeBehavior] = None,
    rng: Optional[random.Random] = None,
    history: Optional[dict[int, DriEntry]] = None,
) -> NodeState:
    return NodeState(
        me=me,
        config=config,
        dri=DriTable(history),
        behavior=behavior if behavior is not None else Honest(),
        rng=rng if rng is not None else random.Random(me),
    )


def is_blackhole(state: NodeState) -> bool:
    return isinstance(state.behavior, BlackHole)


def _route_control(state: NodeState, msg: Message, final: int, now: float) -> list[Effect]:
    route = state.usable_route(final, now)
    if route is None:
        return [CountMetric("control_no_route")]
    return [Transmit(msg, route.next_hop)]


def handle_frame(state: NodeState, msg: Message, sender: int, now: float) -> list[Effect]:
    """Process one received frame. ``sender`` is the one-hop transmitter."""
    state.neighbors[sender] = now
    kind = type(msg)
    me = state.me
    bh = isinstance(state.behavior, BlackHole)

    if kind is DataPacket:
        if msg.dst == me:
            return aodv.deliver(state, msg, sender, now)
        if bh:
            return adversary.blackhole_on_data(state, msg)
        return aodv.forward_data(state, msg, sender, now)

    if kind is Hello:
        return []

    if kind is Rreq:
        if bh and msg.destination != me:
            return adversary.blackhole_on_rreq(state, msg, sender, now)
        effects = aodv.handle_rreq(state, msg, sender, now)
        if state.config.defense:
            effects = [_extend(state, e) for e in effects]
        return effects

    if kind is Rrep:
        if msg.origin == me and state.config.defense:
            return defense.on_rrep_at_source(state, msg, sender, now)[0]
        return aodv.handle_rrep(state, msg, sender, now)

    if kind is Rerr:
        if bh:
            return []
        return aodv.handle_rerr(state, msg, sender, now)

    if kind is Frq:
        if msg.target_nhn != me:
            return _route_control(state, msg, msg.target_nhn, now)
        if bh:
            frp = adversary.colluder_answer_frq(state, msg, now)
        else:
            frp = defense.answer_frq(state, msg, now)
        return _route_control(state, frp, msg.asker, now)

    if kind is Frp:
        if msg.asker != me:
            return _route_control(state, msg, msg.asker, now)
        if not state.config.defense:
            return []
        return defense.on_frp_at_source(state, msg, now)[0]

    if kind is Alarm:
        return defense.handle_alarm(state, msg, sender, now)

    raise TypeError(f"unexpected message {msg!r}")


def _extend(state: NodeState, effect: Effect) -> Effect:
    if type(effect) is Transmit and type(effect.msg) is Rrep:
        rrep = effect.msg
        if rrep.responder == state.me and rrep.destination != state.me:
            return Transmit(defense.fill_rrep_extension(state, rrep), effect.to)
    return effect


def handle_timer(state: NodeState, kind: str, key: object, now: float) -> list[Effect]:
    if kind == "hello":
        effects = aodv.handle_hello_timer(state, now)
        if isinstance(state.behavior, BlackHole):
            # black holes keep quiet about broken links
            effects = [e for e in effects if not (type(e) is Transmit and type(e.msg) is Rerr)]
        return effects
    if kind == "discovery":
        return aodv.handle_discovery_timer(state, key, now)  # type: ignore[arg-type]
    if kind == "session":
        return defense.handle_session_timer(state, key, now)  # type: ignore[arg-type]
    if kind == "probe":
        return defense.handle_probe_timer(state, key, now)  # type: ignore[arg-type]
    raise ValueError(f"unknown timer kind {kind!r}")


def originate(state: NodeState, pkt: DataPacket, now: float) -> list[Effect]:
    if pkt.src != state.me:
        raise ValueError(f"node {state.me} cannot originate a packet from {pkt.src}")
    return aodv.originate_data(state, pkt, now)

import random

import pytest

from dri_aodv import aodv, adversary
from dri_aodv.adversary import BlackHole
from dri_aodv.aodv import CountMetric, ProtocolConfig, Transmit
from dri_aodv.messages import DataPacket, DriEntry, Frp, Frq, Hello, Rerr, Rrep, Rreq
from dri_aodv.node import handle_frame, handle_timer, new_node

CFG = ProtocolConfig(defense=True)
S, D, B1, B2 = 0, 9, 10, 11


def blackhole(me=B1, partners=(B2,), **kw):
    return new_node(me, CFG, BlackHole(tuple(partners), **kw), random.Random(3))


def sends(effects, kind=None):
    return [e for e in effects if type(e) is Transmit and (kind is None or type(e.msg) is kind)]


def test_forged_reply_names_partner_with_claimed_use():
    b = blackhole()
    out = handle_frame(b, Rreq(S, 1, 1, D, None), S, 0.0)
    (tx,) = sends(out)
    rrep = tx.msg
    assert type(rrep) is Rrep and tx.to == S
    assert rrep.responder == B1 and rrep.hop_count == 1
    assert rrep.next_hop_node == B2 and rrep.dri_for_nhn == DriEntry(0, 1)
    assert [e.kind for e in out if type(e) is CountMetric] == ["false_rrep"]


def test_forged_seq_is_known_plus_inflation():
    (tx,) = sends(handle_frame(blackhole(), Rreq(S, 1, 1, D, 7), S, 0.0))
    assert tx.msg.dest_seq == 107


def test_forged_reply_beats_honest_ones_at_route_selection():
    s = new_node(S, ProtocolConfig())
    honest = [Rrep(S, D, seq, hops, 10.0, D) for seq, hops in ((8, 3), (9, 5), (8, 2))]
    (tx,) = sends(handle_frame(blackhole(), Rreq(S, 1, 1, D, 7), S, 0.0))
    for i, r in enumerate(honest + [tx.msg]):
        aodv.update_route(s, D, 20 + i, r.hop_count + 1, r.dest_seq, r.lifetime, 0.0)
    assert s.routes[D].next_hop == 20 + len(honest)


def test_lone_blackhole_names_a_neighbor_other_than_sender():
    b = blackhole(partners=())
    for n in (S, 4, 5):
        handle_frame(b, Hello(n), n, 0.0)
    (tx,) = sends(handle_frame(b, Rreq(S, 1, 1, D, None), S, 0.0))
    assert tx.msg.next_hop_node in {4, 5}


def test_avoided_blackhole_stays_silent_and_never_forwards_rreq():
    b = blackhole()
    assert handle_frame(b, Rreq(S, 1, 1, D, None, 0, frozenset({B1})), S, 0.0) == []
    out = handle_frame(b, Rreq(S, 1, 2, D, None), S, 0.0)
    assert sends(out, Rreq) == []


def test_blackhole_answers_honestly_as_destination():
    b = blackhole()
    (tx,) = sends(handle_frame(b, Rreq(S, 1, 1, B1, None), 4, 0.0))
    assert tx.msg.responder == B1 and not tx.msg.has_extension


def test_transit_data_dropped_and_counted():
    b = blackhole()
    aodv.update_route(b, D, 4, 2, 1, 10.0, 0.0)
    drops = 0
    for i in range(100):
        out = handle_frame(b, DataPacket(0, S, D, i), S, 0.0)
        assert sends(out) == []
        drops += sum(1 for e in out if type(e) is CountMetric and e.kind == "drop_malicious")
    assert drops == 100


def test_data_for_the_blackhole_itself_is_delivered():
    out = handle_frame(blackhole(), DataPacket(0, S, B1, 0), S, 0.0)
    assert [type(e).__name__ for e in out] == ["DeliverToApp"]


def test_blackhole_never_emits_rerr():
    b = blackhole()
    handle_frame(b, Hello(4), 4, 0.0)
    aodv.update_route(b, D, 4, 2, 1, 10.0, 0.0)
    b.routes[D].precursors.add(S)
    out = handle_timer(b, "hello", None, 5.0)
    assert sends(out, Rerr) == [] and sends(out, Hello)
    assert sends(handle_frame(b, Rerr(((D, 3),)), 4, 5.1)) == []


def test_colluder_vouches_and_names_honest_neighbor():
    b = blackhole(B2, partners=(B1,))
    for n in (4, 6, B1, D, S):
        handle_frame(b, Hello(n), n, 0.0)
    seen = set()
    for _ in range(40):
        frp = adversary.colluder_answer_frq(b, Frq(S, B1, B2, D), 0.0)
        assert frp.dri_for_suspect == DriEntry(1, 1) and frp.dri_for_own_next_hop == DriEntry(1, 1)
        seen.add(frp.own_next_hop)
    assert seen == {4, 6}


def test_colluder_without_neighbors_names_nobody():
    frp = adversary.colluder_answer_frq(blackhole(B2, (B1,)), Frq(S, B1, B2, D), 0.0)
    assert frp == Frp(S, B2, DriEntry(1, 1))


def test_chain_flag_names_next_partner():
    b = blackhole(B2, partners=(12, B1), name_partner_in_frp=True)
    handle_frame(b, Hello(4), 4, 0.0)
    assert adversary.colluder_answer_frq(b, Frq(S, B1, B2, D), 0.0).own_next_hop == 12


def test_self_partnership_rejected():
    with pytest.raises(ValueError):
        adversary.blackhole_on_data(blackhole(B1, partners=(B1,)), DataPacket(0, S, D, 0))

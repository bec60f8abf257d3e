"""Protocol message types and their canonical byte codec.

Layout: one tag byte, then fields in declaration order. Integers are
big-endian and fixed width:

* node ids: 2 bytes
* sequence numbers and identifiers (broadcast/alarm/flow ids, packet
  sequence numbers, lifetimes in milliseconds): 4 bytes
* counts (hop counts, payload size, collection lengths): 2 bytes
* DRI entries: 1 byte, ``from`` in bit 1 and ``through`` in bit 0
* optionals: a 1-byte presence flag (0 or 1) followed by the value
* sets: 2-byte length, then members in strictly increasing order
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional, Union

__all__ = [
    "Alarm",
    "DataPacket",
    "DriEntry",
    "Frp",
    "Frq",
    "Hello",
    "MalformedMessage",
    "Message",
    "Rerr",
    "Rrep",
    "Rreq",
    "decode",
    "encode",
    "tag_name",
]

U16_MAX = 0xFFFF
U32_MAX = 0xFFFFFFFF


class MalformedMessage(ValueError):
    """Raised by :func:`decode` for any byte string outside encode's image."""


@dataclass(frozen=True, slots=True)
class DriEntry:
    """Data routing information about one peer.

    ``from_`` is set once this node has handled data arriving from the peer,
    ``through`` once it has sent data via the peer. Both bits are sticky.
    """

    from_: int = 0
    through: int = 0

    def __post_init__(self) -> None:
        if self.from_ not in (0, 1) or self.through not in (0, 1):
            raise ValueError(f"DRI bits must be 0 or 1, got {self.from_}{self.through}")

    def to_byte(self) -> int:
        return (self.from_ << 1) | self.through

    @classmethod
    def from_byte(cls, value: int) -> DriEntry:
        if value > 3:
            raise MalformedMessage(f"DRI byte out of range: {value:#04x}")
        return _DRI_BY_BYTE[value]

    def merge(self, other: DriEntry) -> DriEntry:
        """Bitwise OR; the only way DRI entries are ever combined."""
        return _DRI_BY_BYTE[self.to_byte() | other.to_byte()]

    def __str__(self) -> str:
        return f"{self.from_}{self.through}"


_DRI_BY_BYTE = tuple(DriEntry(b >> 1, b & 1) for b in range(4))


def _check_node(value: int, name: str) -> None:
    if not 0 <= value <= U16_MAX:
        raise ValueError(f"{name} out of range: {value}")


def _check_u32(value: int, name: str) -> None:
    if not 0 <= value <= U32_MAX:
        raise ValueError(f"{name} out of range: {value}")


def _check_u16(value: int, name: str) -> None:
    if not 0 <= value <= U16_MAX:
        raise ValueError(f"{name} out of range: {value}")


@dataclass(frozen=True, slots=True)
class Rreq:
    origin: int
    origin_seq: int
    broadcast_id: int
    destination: int
    dest_seq_known: Optional[int]
    hop_count: int = 0
    avoid: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        _check_node(self.origin, "origin")
        _check_u32(self.origin_seq, "origin_seq")
        _check_u32(self.broadcast_id, "broadcast_id")
        _check_node(self.destination, "destination")
        if self.dest_seq_known is not None:
            _check_u32(self.dest_seq_known, "dest_seq_known")
        _check_u16(self.hop_count, "hop_count")
        if not isinstance(self.avoid, frozenset):
            object.__setattr__(self, "avoid", frozenset(self.avoid))
        for n in self.avoid:
            _check_node(n, "avoid member")


@dataclass(frozen=True, slots=True)
class Rrep:
    """Route reply.

    ``origin`` is the node whose discovery this answers; intermediate nodes
    use it to find the reverse route. The next-hop extension is carried only
    by intermediate responders.
    """

    origin: int
    destination: int
    dest_seq: int
    hop_count: int
    lifetime: float
    responder: int
    next_hop_node: Optional[int] = None
    dri_for_nhn: Optional[DriEntry] = None

    def __post_init__(self) -> None:
        _check_node(self.origin, "origin")
        _check_node(self.destination, "destination")
        _check_u32(self.dest_seq, "dest_seq")
        _check_u16(self.hop_count, "hop_count")
        if not 0 <= self.lifetime * 1000 <= U32_MAX:
            raise ValueError(f"lifetime out of range: {self.lifetime}")
        _check_node(self.responder, "responder")
        if (self.next_hop_node is None) != (self.dri_for_nhn is None):
            raise ValueError("next_hop_node and dri_for_nhn must be present together")
        if self.next_hop_node is not None:
            _check_node(self.next_hop_node, "next_hop_node")
            if self.responder == self.destination:
                raise ValueError("destination responder carries no next-hop extension")

    @property
    def has_extension(self) -> bool:
        return self.next_hop_node is not None


@dataclass(frozen=True, slots=True)
class Rerr:
    unreachable: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if not isinstance(self.unreachable, tuple):
            object.__setattr__(self, "unreachable", tuple(tuple(u) for u in self.unreachable))
        if not self.unreachable:
            raise ValueError("RERR must list at least one destination")
        for dest, seq in self.unreachable:
            _check_node(dest, "unreachable destination")
            _check_u32(seq, "unreachable seq")


@dataclass(frozen=True, slots=True)
class Hello:
    sender: int

    def __post_init__(self) -> None:
        _check_node(self.sender, "sender")


@dataclass(frozen=True, slots=True)
class Frq:
    asker: int
    suspect_in: int
    target_nhn: int
    wanted_destination: int

    def __post_init__(self) -> None:
        for name in ("asker", "suspect_in", "target_nhn", "wanted_destination"):
            _check_node(getattr(self, name), name)
        if self.suspect_in == self.target_nhn:
            raise ValueError("FRq must not ask the suspect about itself")
        if self.asker == self.suspect_in:
            raise ValueError("asker cannot be the suspect")


@dataclass(frozen=True, slots=True)
class Frp:
    """Cross-check answer. ``asker`` routes the reply back to the prober."""

    asker: int
    responder: int
    dri_for_suspect: DriEntry
    own_next_hop: Optional[int] = None
    dri_for_own_next_hop: Optional[DriEntry] = None

    def __post_init__(self) -> None:
        _check_node(self.asker, "asker")
        _check_node(self.responder, "responder")
        if (self.own_next_hop is None) != (self.dri_for_own_next_hop is None):
            raise ValueError("own_next_hop and dri_for_own_next_hop must be present together")
        if self.own_next_hop is not None:
            _check_node(self.own_next_hop, "own_next_hop")


@dataclass(frozen=True, slots=True)
class Alarm:
    accuser: int
    blackholes: frozenset[int]
    alarm_id: int

    def __post_init__(self) -> None:
        _check_node(self.accuser, "accuser")
        if not isinstance(self.blackholes, frozenset):
            object.__setattr__(self, "blackholes", frozenset(self.blackholes))
        if not self.blackholes:
            raise ValueError("alarm must name at least one node")
        if self.accuser in self.blackholes:
            raise ValueError("accuser cannot accuse itself")
        for n in self.blackholes:
            _check_node(n, "blackhole")
        _check_u32(self.alarm_id, "alarm_id")


@dataclass(frozen=True, slots=True)
class DataPacket:
    flow_id: int
    src: int
    dst: int
    seq_in_flow: int
    payload_bytes: int = 512

    def __post_init__(self) -> None:
        _check_u32(self.flow_id, "flow_id")
        _check_node(self.src, "src")
        _check_node(self.dst, "dst")
        if self.src == self.dst:
            raise ValueError("data packet src and dst must differ")
        _check_u32(self.seq_in_flow, "seq_in_flow")
        _check_u16(self.payload_bytes, "payload_bytes")


Message = Union[Rreq, Rrep, Rerr, Hello, Frq, Frp, Alarm, DataPacket]

TAGS: dict[type, int] = {
    Rreq: 1,
    Rrep: 2,
    Rerr: 3,
    Hello: 4,
    Frq: 5,
    Frp: 6,
    Alarm: 7,
    DataPacket: 8,
}
_NAMES = {
    Rreq: "RREQ",
    Rrep: "RREP",
    Rerr: "RERR",
    Hello: "HELLO",
    Frq: "FRQ",
    Frp: "FRP",
    Alarm: "ALARM",
    DataPacket: "DATA",
}


def tag_name(msg: Message) -> str:
    return _NAMES[type(msg)]


# -- encoding ---------------------------------------------------------------

_U8 = struct.Struct(">B")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")


def _opt_node(out: bytearray, value: Optional[int]) -> None:
    if value is None:
        out += b"\x00"
    else:
        out += b"\x01" + _U16.pack(value)


def _opt_dri(out: bytearray, value: Optional[DriEntry]) -> None:
    if value is None:
        out += b"\x00"
    else:
        out += bytes((1, value.to_byte()))


def _node_set(out: bytearray, nodes: frozenset[int]) -> None:
    out += _U16.pack(len(nodes))
    for n in sorted(nodes):
        out += _U16.pack(n)


def encode(msg: Message) -> bytes:
    out = bytearray(_U8.pack(TAGS[type(msg)]))
    if isinstance(msg, DataPacket):
        out += struct.pack(">IHHIH", msg.flow_id, msg.src, msg.dst, msg.seq_in_flow, msg.payload_bytes)
    elif isinstance(msg, Hello):
        out += _U16.pack(msg.sender)
    elif isinstance(msg, Rreq):
        out += struct.pack(">HIIH", msg.origin, msg.origin_seq, msg.broadcast_id, msg.destination)
        if msg.dest_seq_known is None:
            out += b"\x00"
        else:
            out += b"\x01" + _U32.pack(msg.dest_seq_known)
        out += _U16.pack(msg.hop_count)
        _node_set(out, msg.avoid)
    elif isinstance(msg, Rrep):
        out += struct.pack(
            ">HHIHIH",
            msg.origin,
            msg.destination,
            msg.dest_seq,
            msg.hop_count,
            round(msg.lifetime * 1000),
            msg.responder,
        )
        _opt_node(out, msg.next_hop_node)
        _opt_dri(out, msg.dri_for_nhn)
    elif isinstance(msg, Rerr):
        out += _U16.pack(len(msg.unreachable))
        for dest, seq in msg.unreachable:
            out += struct.pack(">HI", dest, seq)
    elif isinstance(msg, Frq):
        out += struct.pack(">HHHH", msg.asker, msg.suspect_in, msg.target_nhn, msg.wanted_destination)
    elif isinstance(msg, Frp):
        out += struct.pack(">HHB", msg.asker, msg.responder, msg.dri_for_suspect.to_byte())
        _opt_node(out, msg.own_next_hop)
        _opt_dri(out, msg.dri_for_own_next_hop)
    elif isinstance(msg, Alarm):
        out += _U16.pack(msg.accuser)
        _node_set(out, msg.blackholes)
        out += _U32.pack(msg.alarm_id)
    else:
        raise TypeError(f"not a protocol message: {msg!r}")
    return bytes(out)


# -- decoding ---------------------------------------------------------------


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes) -> None:
        self.buf = buf
        self.pos = 0

    def take(self, fmt: struct.Struct) -> int:
        end = self.pos + fmt.size
        if end > len(self.buf):
            raise MalformedMessage(f"truncated at byte {self.pos}")
        (value,) = fmt.unpack_from(self.buf, self.pos)
        self.pos = end
        return value

    def u8(self) -> int:
        return self.take(_U8)

    def u16(self) -> int:
        return self.take(_U16)

    def u32(self) -> int:
        return self.take(_U32)

    def flag(self) -> bool:
        value = self.u8()
        if value > 1:
            raise MalformedMessage(f"bad option flag {value:#04x}")
        return value == 1

    def opt_node(self) -> Optional[int]:
        return self.u16() if self.flag() else None

    def opt_dri(self) -> Optional[DriEntry]:
        return DriEntry.from_byte(self.u8()) if self.flag() else None

    def node_set(self) -> frozenset[int]:
        count = self.u16()
        members = [self.u16() for _ in range(count)]
        if any(a >= b for a, b in zip(members, members[1:])):
            raise MalformedMessage("set members not strictly increasing")
        return frozenset(members)


def _decode_body(tag: int, r: _Reader) -> Message:
    if tag == 1:
        origin, origin_seq, bid, dest = r.u16(), r.u32(), r.u32(), r.u16()
        known = r.u32() if r.flag() else None
        hops = r.u16()
        return Rreq(origin, origin_seq, bid, dest, known, hops, r.node_set())
    if tag == 2:
        origin, dest, seq, hops = r.u16(), r.u16(), r.u32(), r.u16()
        lifetime = r.u32() / 1000
        responder = r.u16()
        return Rrep(origin, dest, seq, hops, lifetime, responder, r.opt_node(), r.opt_dri())
    if tag == 3:
        count = r.u16()
        return Rerr(tuple((r.u16(), r.u32()) for _ in range(count)))
    if tag == 4:
        return Hello(r.u16())
    if tag == 5:
        return Frq(r.u16(), r.u16(), r.u16(), r.u16())
    if tag == 6:
        asker, responder = r.u16(), r.u16()
        dri = DriEntry.from_byte(r.u8())
        return Frp(asker, responder, dri, r.opt_node(), r.opt_dri())
    if tag == 7:
        accuser = r.u16()
        nodes = r.node_set()
        return Alarm(accuser, nodes, r.u32())
    if tag == 8:
        return DataPacket(r.u32(), r.u16(), r.u16(), r.u32(), r.u16())
    raise MalformedMessage(f"unknown tag {tag:#04x}")


def decode(data: bytes) -> Message:
    """Parse exactly one message occupying all of ``data``."""
    r = _Reader(bytes(data))
    tag = r.u8()
    try:
        msg = _decode_body(tag, r)
    except MalformedMessage:
        raise
    except ValueError as exc:
        raise MalformedMessage(str(exc)) from exc
    if r.pos != len(r.buf):
        raise MalformedMessage(f"{len(r.buf) - r.pos} trailing bytes")
    return msg

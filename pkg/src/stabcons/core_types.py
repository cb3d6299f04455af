"""Shared vocabulary: values, the three-valued consensus result, and wire messages."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple, Optional, Union

U64_MAX = 2**64 - 1
# destination field of broadcast bodies
BROADCAST = 0xFFFF


class _Sentinel:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __reduce__(self):
        return self.name


BOT = _Sentinel("BOT")
TRANSIENT_ERROR = _Sentinel("TRANSIENT_ERROR")


@dataclass(frozen=True, slots=True)
class Decided:
    value: bytes


ConsensusResult = Union[_Sentinel, Decided]


def value_equals(a, b) -> bool:
    """Structural equality over values and sentinels.

    Sentinels compare equal only to themselves; a sentinel never equals a
    byte payload or a ``Decided`` wrapper.
    """
    if isinstance(a, _Sentinel) or isinstance(b, _Sentinel):
        return a is b
    return type(a) is type(b) and a == b


def check_value(v) -> bytes:
    if not isinstance(v, (bytes, bytearray)) or len(v) == 0:
        raise ValueError(f"values are non-empty byte strings, got {v!r}")
    return bytes(v)


class TxDescriptor(NamedTuple):
    sender: int
    seq: int
    tag: int = 0


ReadyVector = tuple


class Kind(IntEnum):
    PROPOSAL = 1
    SYNC = 2
    SYNCACK = 3
    URB_DATA = 4
    URB_ACK = 5
    APP = 6


@dataclass(frozen=True, slots=True)
class Message:
    """A protocol message.

    PROPOSAL, SYNC, SYNCACK and APP are protocol bodies.  URB_DATA and URB_ACK
    are the transport envelopes used by the broadcast layer; URB_DATA carries
    a nested body.  Unused fields stay at their zero defaults.
    """

    kind: Kind
    sender: int
    dest: int
    tag: int = 0
    value: Optional[bytes] = None
    sn: int = 0
    seq: int = 0
    obs: int = 0
    ready: tuple = ()
    origin: int = 0
    useq: int = 0
    stream: int = 0
    body: Optional["Message"] = None


_HEAD = struct.Struct(">BHHQ")
_NUMS = struct.Struct(">QQQ")
_URB = struct.Struct(">HQB")
_LEN = struct.Struct(">I")
_CNT = struct.Struct(">H")
_U64 = struct.Struct(">Q")


def _put_bytes(out: list, b: Optional[bytes]) -> None:
    if b is None:
        out.append(b"\x00")
    else:
        out.append(b"\x01")
        out.append(_LEN.pack(len(b)))
        out.append(b)


def encode(m: Message) -> bytes:
    """Canonical encoding: fixed field order, length-prefixed variable parts."""
    out = [_HEAD.pack(int(m.kind), m.sender, m.dest, m.tag)]
    _put_bytes(out, m.value)
    out.append(_NUMS.pack(m.sn, m.seq, m.obs))
    out.append(_CNT.pack(len(m.ready)))
    out.extend(_U64.pack(r) for r in m.ready)
    out.append(_URB.pack(m.origin, m.useq, m.stream))
    _put_bytes(out, None if m.body is None else encode(m.body))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, st: struct.Struct):
        end = self.pos + st.size
        if end > len(self.data):
            raise ValueError("truncated message")
        vals = st.unpack_from(self.data, self.pos)
        self.pos = end
        return vals

    def opt_bytes(self) -> Optional[bytes]:
        if self.pos >= len(self.data):
            raise ValueError("truncated message")
        flag = self.data[self.pos]
        self.pos += 1
        if flag == 0:
            return None
        if flag != 1:
            raise ValueError(f"bad presence flag {flag}")
        (size,) = self.take(_LEN)
        end = self.pos + size
        if end > len(self.data):
            raise ValueError("truncated payload")
        b = self.data[self.pos:end]
        self.pos = end
        return b


def _decode(r: _Reader) -> Message:
    kind, sender, dest, tag = r.take(_HEAD)
    kind = Kind(kind)
    value = r.opt_bytes()
    sn, seq, obs = r.take(_NUMS)
    (count,) = r.take(_CNT)
    ready = tuple(r.take(_U64)[0] for _ in range(count))
    origin, useq, stream = r.take(_URB)
    raw_body = r.opt_bytes()
    body = None if raw_body is None else decode(raw_body)
    return Message(kind, sender, dest, tag, value, sn, seq, obs, ready, origin, useq, stream, body)


def decode(data: bytes) -> Message:
    """Inverse of :func:`encode`; raises ``ValueError`` on malformed input."""
    r = _Reader(bytes(data))
    m = _decode(r)
    if r.pos != len(r.data):
        raise ValueError("trailing bytes")
    return m


def encode_vector(vec) -> bytes:
    """Fixed-width encoding of a readiness vector, sender-index order."""
    return _CNT.pack(len(vec)) + b"".join(_U64.pack(x) for x in vec)


def decode_vector(data: bytes, n: Optional[int] = None) -> tuple:
    if len(data) < 2:
        raise ValueError("truncated vector")
    (count,) = _CNT.unpack_from(data, 0)
    if len(data) != 2 + 8 * count:
        raise ValueError("vector length mismatch")
    if n is not None and count != n:
        raise ValueError(f"vector has {count} entries, expected {n}")
    return tuple(_U64.unpack_from(data, 2 + 8 * i)[0] for i in range(count))

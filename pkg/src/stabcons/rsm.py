"""Replicated state machine on top of the total-order layer.

The consensus value is the pair (automaton snapshot, readiness vector).  A
replica that adopts a decided slot first overwrites its automaton with the
agreed snapshot and then applies the agreed batch, so a corrupted replica is
repaired by the next decided slot.

The snapshot includes the per-sender prefix of commands already applied.
Applying a slot therefore means "commands above the snapshot's prefix, up
to the agreed vector", which depends only on the agreed value and on the
broadcast contents, not on local consumption pointers that a fault may
have skewed.
"""
from __future__ import annotations

import hashlib
import json
import struct

from .core_types import Message, decode_vector, encode_vector
from .mv_consensus import SEQUENTIAL
from .to_urb import DEFAULT_DELTA, ToUrbNode

_LEN = struct.Struct(">I")


class KvAutomaton:
    """Append-counter keyed-value machine.

    A command ``b"key=suffix"`` appends ``suffix`` to the value under ``key``.
    ``applied[o]`` is the highest sequence number from sender ``o`` applied so
    far; malformed commands still advance it.
    """

    def __init__(self, n: int):
        self.n = n
        self.kv: dict = {}
        self.applied = [0] * n

    def apply(self, origin: int, seq: int, cmd: bytes) -> bool:
        if seq != self.applied[origin] + 1:
            return False
        self.applied[origin] = seq
        try:
            key, _, suffix = cmd.decode("utf-8").partition("=")
        except (UnicodeDecodeError, AttributeError):
            return True
        if key:
            self.kv[key] = self.kv.get(key, "") + suffix
        return True

    def get_state(self) -> bytes:
        return json.dumps({"applied": self.applied, "kv": self.kv}, sort_keys=True, separators=(",", ":")).encode()

    def set_state(self, snap: bytes) -> None:
        d = json.loads(snap.decode("utf-8"))
        kv, applied = d["kv"], d["applied"]
        if not isinstance(kv, dict) or not isinstance(applied, list) or len(applied) != self.n:
            raise ValueError("malformed snapshot")
        if not all(isinstance(a, int) and a >= 0 for a in applied):
            raise ValueError("malformed applied vector")
        self.kv = {str(k): str(v) for k, v in kv.items()}
        self.applied = list(applied)

    def digest(self) -> str:
        return hashlib.sha256(self.get_state()).hexdigest()[:16]


def encode_pair(state: bytes, ready) -> bytes:
    return _LEN.pack(len(state)) + state + encode_vector(ready)


def decode_pair(value: bytes, n: int):
    if len(value) < _LEN.size:
        raise ValueError("truncated pair")
    (size,) = _LEN.unpack_from(value, 0)
    end = _LEN.size + size
    if end > len(value):
        raise ValueError("truncated state")
    return value[_LEN.size:end], decode_vector(value[end:], n)


class RsmNode(ToUrbNode):
    def __init__(self, pid: int, n: int, world, variant: str = SEQUENTIAL, delta: int = DEFAULT_DELTA,
                 automaton=None):
        super().__init__(pid, n, world, variant, delta)
        self.automaton = automaton if automaton is not None else KvAutomaton(n)

    def get_state(self) -> bytes:
        return self.automaton.get_state()

    def set_state(self, snap: bytes) -> None:
        self.automaton.set_state(snap)

    def _proposal_value(self, all_ready: tuple) -> bytes:
        return encode_pair(self.get_state(), all_ready)

    def _deliver(self, tag: int, value: bytes) -> bool:
        try:
            state, r_max = decode_pair(value, self.n)
            KvAutomaton(self.n).set_state(state)
        except (ValueError, KeyError, TypeError, UnicodeDecodeError):
            return False
        self.set_state(state)
        self._deliver_batch(tag, r_max)
        urb = self.app_urb
        for o in range(self.n):
            hi = min(r_max[o], urb.delivered[o])
            for s in range(self.automaton.applied[o] + 1, hi + 1):
                body = urb.body(o, s)
                self.automaton.apply(o, s, body.value if isinstance(body, Message) and body.value else b"")
        self.world.record("rsm_apply", p=self.pid, tag=tag, state=self.automaton.digest())
        return True

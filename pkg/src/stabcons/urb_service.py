"""Uniform reliable broadcast with FIFO readiness bookkeeping.

Each process owns one :class:`UrbEndpoint` per stream.  The endpoint runs a
majority-echo protocol over the simulator's lossy channels: every process that
holds a copy retransmits it to trusted peers until they acknowledge, and a copy
is delivered once more than half of the processes are known to hold it.  With
fewer than n/2 crashes this yields URB-validity, -integrity and (uniform)
-termination; the FIFO view (``fifo_ready`` / ``ready_min`` / ``bulk_read``)
sits on top of the per-sender sequence numbers.
"""
from __future__ import annotations

import logging
from typing import Callable, Optional

from .core_types import Kind, Message, TxDescriptor

log = logging.getLogger(__name__)

RESEND_EVERY = 1


class _Copy:
    __slots__ = ("body", "tag", "holders", "acked", "delivered", "age")

    def __init__(self, body, tag):
        self.body = body
        self.tag = tag
        self.holders: set = set()
        self.acked: set = set()
        self.delivered = False
        self.age = 0


class UrbEndpoint:
    def __init__(
        self,
        pid: int,
        n: int,
        net,
        stream: int = 0,
        on_deliver: Optional[Callable[[int, int, object], None]] = None,
        fifo: bool = False,
    ):
        self.pid = pid
        self.n = n
        self.net = net
        self.stream = stream
        self.on_deliver = on_deliver
        self.fifo = fifo
        self.next_seq = 1
        self.copies: dict = {}
        # delivered[o] is the contiguous delivered prefix of sender o; gaps above it sit in _above
        self.delivered = [0] * n
        self._above = [set() for _ in range(n)]
        # FIFO view: consumed[o] is the last sequence handed to the application
        self.consumed = [0] * n
        self.ready_buf = [dict() for _ in range(n)]
        self.broadcasts = 0

    # -- sender side -------------------------------------------------------

    def broadcast(self, body, tag: int = 0) -> TxDescriptor:
        seq = self.next_seq
        self.next_seq += 1
        self.broadcasts += 1
        key = (self.pid, seq)
        c = _Copy(body, tag)
        c.holders.add(self.pid)
        self.copies[key] = c
        self._send_data(key, c, self.net.trusted())
        self._maybe_deliver(key, c)
        return TxDescriptor(self.pid, seq, tag)

    def has_terminated(self, txd: TxDescriptor) -> bool:
        """True once every trusted process acknowledged delivery of ``txd``.

        Descriptors that are no longer tracked were garbage collected after
        termination (or are leftovers of corrupted state); both count as
        terminated.
        """
        c = self.copies.get((txd.sender, txd.seq))
        if c is None:
            return True
        return c.delivered and self.net.trusted() <= c.acked

    def all_have_terminated(self) -> bool:
        trusted = self.net.trusted()
        for (origin, _), c in self.copies.items():
            if origin == self.pid and not (c.delivered and trusted <= c.acked):
                return False
        return True

    # -- FIFO view ---------------------------------------------------------

    def fifo_ready(self) -> tuple:
        return tuple(self.delivered) if self.fifo else (0,) * self.n

    def ready_min(self) -> tuple:
        return tuple(self.consumed)

    def bulk_read(self, r_max) -> list:
        """Consume and return ready messages up to ``r_max``.

        Entries are clamped into ``[ready_min, fifo_ready]``.  The result is
        sender-major, then ascending sequence: ``[(origin, seq, body), ...]``.
        """
        out = []
        for o in range(self.n):
            lo = self.consumed[o]
            hi = min(max(int(r_max[o]), lo), self.delivered[o])
            buf = self.ready_buf[o]
            for s in range(lo + 1, hi + 1):
                out.append((o, s, buf.get(s)))
            self.consumed[o] = hi
        return out

    def body(self, origin: int, seq: int):
        """Payload of a FIFO-delivered message; delivered payloads are retained."""
        if seq <= self.delivered[origin]:
            return self.ready_buf[origin].get(seq)
        return None

    # -- receiver side -----------------------------------------------------

    def _is_delivered(self, origin: int, seq: int) -> bool:
        return seq <= self.delivered[origin] or seq in self._above[origin]

    def receive(self, m: Message) -> None:
        if not 0 <= m.origin < self.n or m.useq < 1:
            return
        key = (m.origin, m.useq)
        if m.kind == Kind.URB_ACK:
            c = self.copies.get(key)
            if c is not None:
                c.acked.add(m.sender)
                c.holders.add(m.sender)
            return
        c = self.copies.get(key)
        if c is None:
            if self._is_delivered(*key):
                self._ack(key, m.sender)
                return
            c = _Copy(m.body, m.tag)
            c.holders.add(self.pid)
            self.copies[key] = c
            c.holders.add(m.sender)
            # first copy: echo to every trusted peer
            self._send_data(key, c, self.net.trusted())
        else:
            c.holders.add(m.sender)
        self._maybe_deliver(key, c)
        if c.delivered:
            self._ack(key, m.sender)

    def _maybe_deliver(self, key, c: _Copy) -> None:
        if c.delivered or 2 * len(c.holders) <= self.n:
            return
        c.delivered = True
        c.acked.add(self.pid)
        origin, seq = key
        if seq == self.delivered[origin] + 1:
            d = seq
            above = self._above[origin]
            while d + 1 in above:
                d += 1
                above.discard(d)
            self.delivered[origin] = d
        else:
            self._above[origin].add(seq)
        if self.fifo:
            self.ready_buf[origin][seq] = c.body
        self.net.note_urb_delivery(self.pid, self.stream, origin, seq)
        if self.on_deliver is not None:
            self.on_deliver(origin, seq, c.body, c.tag)

    def _ack(self, key, to: int) -> None:
        if to == self.pid:
            return
        self.net.send(Message(Kind.URB_ACK, self.pid, to, origin=key[0], useq=key[1], stream=self.stream))

    def _send_data(self, key, c: _Copy, targets) -> None:
        for j in targets:
            if j != self.pid and j not in c.acked:
                self.net.send(
                    Message(Kind.URB_DATA, self.pid, j, tag=c.tag, origin=key[0], useq=key[1],
                            stream=self.stream, body=c.body)
                )

    def tick(self) -> None:
        """Retransmit unacknowledged copies and collect finished ones."""
        trusted = self.net.trusted()
        done = []
        for key, c in self.copies.items():
            if c.delivered and trusted <= c.acked:
                done.append(key)
                continue
            c.age += 1
            if c.age % RESEND_EVERY == 0:
                self._send_data(key, c, trusted)
        for key in done:
            del self.copies[key]
        self.stabilize()

    def stabilize(self) -> None:
        """Repair bookkeeping that only corruption can make inconsistent."""
        for o in range(self.n):
            if self.consumed[o] > self.delivered[o]:
                self.consumed[o] = self.delivered[o]
            if self.consumed[o] < 0:
                self.consumed[o] = 0
        own = max((s for (o, s) in self.copies if o == self.pid), default=0)
        own = max(own, self.delivered[self.pid])
        if self.next_seq <= own:
            self.next_seq = own + 1

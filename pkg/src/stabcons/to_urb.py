"""Self-stabilizing total-order URB by repeated multivalued consensus.

Each process keeps a ring of M=3 consensus slots.  A do-forever iteration
queries every trusted process with SYNC(sn), and once all SYNCACKs for the
current ``sn`` are in it checks the reported sequence numbers, recycles stale
slots, proposes the entrywise-min readiness vector on the next slot and
delivers the batch of the slot right after ``obsS`` once it is decided.

The repeat-until SYNC loop is phase-structured: an activation either resends
SYNC to the trusted processes that have not answered yet or, when all answers
are in, finishes the iteration and immediately opens the next query.
"""
from __future__ import annotations

import logging
from typing import NamedTuple

from .bin_consensus import BcClient
from .core_types import (BOT, BROADCAST, Decided, Kind, Message, decode_vector,
                   encode_vector)
from .mv_consensus import SEQUENTIAL, MvSlot
from .urb_service import UrbEndpoint

log = logging.getLogger(__name__)

M = 3
DEFAULT_DELTA = 8
CONS_STREAM = 0
APP_STREAM = 1


class Ack(NamedTuple):
    seq: int
    obs: int
    ready: tuple


class ToUrbNode:
    def __init__(self, pid: int, n: int, world, variant: str = SEQUENTIAL, delta: int = DEFAULT_DELTA):
        if delta < 1:
            raise ValueError("delta must be positive")
        self.pid = pid
        self.n = n
        self.world = world
        self.delta = delta
        self.cons_urb = UrbEndpoint(pid, n, world, CONS_STREAM, on_deliver=self._on_cons_deliver)
        self.app_urb = UrbEndpoint(pid, n, world, APP_STREAM, fifo=True)
        self.bcc = BcClient(pid, n, world)
        self.cs = [MvSlot(pid, n, self.cons_urb, self.bcc, world, variant, tag=k) for k in range(M)]
        self.obs_s = 0
        self.sn = 0
        self.querying = False
        self.acks: dict = {}
        # locals of the last finished iteration, read by the quiescence predicate
        self.max_seq = 0
        self.all_seq: frozenset = frozenset({0})
        self.iterations = 0
        self.delivered_log: list = []
        # harness bookkeeping: the current query has seen injected acks
        self.tainted_query = False

    # -- macros --------------------------------------------------------------

    def s_set(self) -> set:
        return {slot.obj.tag for slot in self.cs if slot.obj is not None}

    def get_seq(self) -> int:
        return max(self.s_set() | {self.obs_s})

    def check_seq(self, s: int) -> bool:
        return s in self.s_set() or s == self.get_seq() + 1

    def ell(self) -> int:
        hi = self.app_urb.fifo_ready()
        lo = self.app_urb.ready_min()
        return sum(h - l for h, l in zip(hi, lo))

    def exceed(self) -> bool:
        ell = self.ell()
        return (self.app_urb.all_have_terminated() and ell > 0) or self.delta <= ell

    def active_slots(self) -> int:
        return sum(1 for slot in self.cs if slot.obj is not None)

    # -- application interface -------------------------------------------------

    def to_broadcast(self, payload: bytes):
        txd = self.app_urb.broadcast(Message(Kind.APP, self.pid, BROADCAST, value=payload))
        self.world.record("to_broadcast", p=self.pid, seq=txd.seq, value=payload.hex())
        return txd

    # -- do-forever ------------------------------------------------------------

    def activate(self) -> None:
        for slot in self.cs:
            slot.step()
        self._iteration()
        self.cons_urb.tick()
        self.app_urb.tick()

    def _own_ack(self) -> Ack:
        return Ack(self.get_seq(), self.obs_s, self.app_urb.fifo_ready())

    def _iteration(self) -> None:
        trusted = self.world.trusted()
        if self.querying and all(j in self.acks for j in trusted if j != self.pid):
            # the own answer is taken now, not at query start, so it cannot lag the others
            self.acks[self.pid] = self._own_ack()
            self._finish([self.acks[j] for j in sorted(trusted) if j in self.acks])
            self.querying = False
            self.tainted_query = False
            self.iterations += 1
            self.world.iteration_done(self.pid)
        if not self.querying:
            self._scrub()
            self.sn += 1
            self.acks = {}
            self.querying = True
            targets = trusted
        else:
            targets = [j for j in trusted if j not in self.acks]
        for j in sorted(targets):
            if j != self.pid:
                self.world.send(Message(Kind.SYNC, self.pid, j, sn=self.sn))

    def _scrub(self) -> None:
        bad = any(slot.obj is not None and slot.obj.tag % M != k for k, slot in enumerate(self.cs))
        s = self.s_set()
        if s and (self.obs_s > max(s) or max(s) - min(s) > 1):
            bad = True
        if bad:
            for slot in self.cs:
                slot.deactivate()
            self.world.record("scrub", p=self.pid)

    def _finish(self, acks: list) -> None:
        n = self.n
        all_ready = tuple(min(a.ready[k] for a in acks) for k in range(n))
        max_seq = max(a.seq for a in acks)
        all_seq = frozenset(x for a in acks for x in (a.seq, a.obs))
        self.max_seq, self.all_seq = max_seq, all_seq

        x, y, z = self.obs_s, self.get_seq(), max_seq
        if not (x + 1 == y == z or x == y == z or x == y == z - 1):
            self.obs_s = max(x, y, z)
            self.world.record("obs_jump", p=self.pid, frm=x, to=self.obs_s)

        top = self.get_seq()
        keep = {s % M for s in range(self.obs_s, min(top, self.obs_s + M) + 1)}
        if len(all_seq) == 1:
            keep.add((max_seq + 1) % M)
        for k, slot in enumerate(self.cs):
            if k not in keep and slot.obj is not None:
                slot.deactivate()

        s = None
        if len(all_seq) == 1:
            if self.exceed():
                s = max_seq + 1
        elif self.obs_s == self.get_seq() == max_seq - 1 and all_seq <= {max_seq - 1, max_seq}:
            # one instance behind and holding no object for it: join that
            # instance rather than wait for a PROPOSAL that may never come
            s = max_seq
        if s is not None:
            slot = self.cs[s % M]
            if slot.obj is not None and slot.obj.tag != s:
                slot.deactivate()
            if slot.obj is None:
                slot.propose(self._proposal_value(all_ready), tag=s)
                if not self.tainted_query:
                    self.world.clean_values.setdefault(s, set()).add(slot.obj.v)
                self.world.record("cs_propose", p=self.pid, tag=s)

        if self.obs_s + 1 == self.get_seq():
            s = self.obs_s + 1
            slot = self.cs[s % M]
            if slot.obj is not None and slot.obj.tag == s:
                r = slot.result()
                if r is not BOT:
                    ok = isinstance(r, Decided) and self._deliver(s, r.value)
                    if not ok or r.value not in self.world.clean_values.get(s, ()):
                        self.world.tainted_tags.add(s)
                    self.world.record("cs_decide", p=self.pid, tag=s, ok=ok)
                    self.obs_s = s
                    # the previous slot became obsolete with this increment
                    for other in self.cs:
                        if other.obj is not None and other.obj.tag < s:
                            other.deactivate()

    # -- overridable value handling -------------------------------------------

    def _proposal_value(self, all_ready: tuple) -> bytes:
        return encode_vector(all_ready)

    def _deliver(self, tag: int, value: bytes) -> bool:
        try:
            r_max = decode_vector(value, self.n)
        except ValueError:
            return False
        self._deliver_batch(tag, r_max)
        return True

    def _deliver_batch(self, tag: int, r_max) -> list:
        batch = self.app_urb.bulk_read(r_max)
        for origin, seq, body in batch:
            payload = body.value if isinstance(body, Message) else None
            self.delivered_log.append((origin, seq, payload))
        if batch:
            self.world.record("to_deliver", p=self.pid, tag=tag,
                              batch=[[o, s, (b.value.hex() if isinstance(b, Message) and b.value else "")]
                                     for o, s, b in batch])
        return batch

    # -- message handlers ------------------------------------------------------

    def on_packet(self, m: Message) -> None:
        if m.kind in (Kind.URB_DATA, Kind.URB_ACK):
            (self.cons_urb if m.stream == CONS_STREAM else self.app_urb).receive(m)
        elif m.kind == Kind.SYNC:
            a = self._own_ack()
            self.world.send(Message(Kind.SYNCACK, self.pid, m.sender, sn=m.sn, seq=a.seq, obs=a.obs, ready=a.ready))
        elif m.kind == Kind.SYNCACK:
            if self.querying and m.sn == self.sn and len(m.ready) == self.n and m.sender != self.pid:
                self.acks[m.sender] = Ack(m.seq, m.obs, m.ready)
                if id(m) in self.world.tainted_msgs:
                    self.tainted_query = True

    def _on_cons_deliver(self, origin: int, useq: int, body, tag: int) -> None:
        if not isinstance(body, Message) or body.kind != Kind.PROPOSAL:
            return
        s = body.tag
        if not self.check_seq(s):
            return
        slot = self.cs[s % M]
        if slot.obj is not None and slot.obj.tag != s:
            slot.deactivate()
        slot.on_proposal(origin, body.value, tag=s)

    def on_bc_decide(self, tag: int, k: int, decided: bool, carry) -> None:
        slot = self.cs[tag % M]
        if slot.obj is not None and slot.obj.tag == tag:
            slot.on_bc_decide(k, decided, carry)

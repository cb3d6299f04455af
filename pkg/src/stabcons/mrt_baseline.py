"""Non-self-stabilizing baseline: round-based reduction over an unbounded BC list.

``propose`` broadcasts once, then round k asks BC[k] whether the proposal of
process ``k mod n`` should be decided.  The first True wins and the process
waits for that proposal to arrive.  The blocking loop is unrolled into a
resumable state machine, one round per simulator activation.
"""
from __future__ import annotations

from typing import Optional

from .bin_consensus import BcState
from .core_types import BROADCAST, Kind, Message

IDLE, ROUND, AWAIT, WAIT_VALUE, DONE = "idle", "round", "await", "wait_value", "done"


class MrtProcess:
    def __init__(self, pid: int, n: int, urb, bc_client, world, tag: int = 0):
        self.pid = pid
        self.n = n
        self.urb = urb
        self.bcc = bc_client
        self.world = world
        self.tag = tag
        self.proposals: list = [None] * n
        self.k = 0
        self.bc: dict = {}
        self.state = IDLE
        self.decided: Optional[bytes] = None
        self.decided_round: Optional[int] = None
        self.rounds = 0
        # corruption of BC[0..false_below-1] to "decided False", kept symbolic so 2**64 is representable
        self.false_below = 0
        self.skip_broadcast = False

    def propose(self, v: bytes) -> None:
        if self.state != IDLE:
            return
        # proposals/BC start empty at construction; proposals that arrived earlier are kept
        if not self.skip_broadcast:
            self.urb.broadcast(Message(Kind.PROPOSAL, self.pid, BROADCAST, tag=self.tag, value=v), tag=self.tag)
        self.k = 0
        self.state = ROUND
        self.world.record("mv_propose", p=self.pid, tag=self.tag, value=v.hex(), variant="mrt")

    def _entry(self, k: int) -> Optional[BcState]:
        e = self.bc.get(k)
        if e is None and k < self.false_below:
            return BcState(False, False)
        return e

    def step(self) -> None:
        if self.state == ROUND:
            if self._entry(self.k) is None:
                i = self.k % self.n
                p = self.proposals[i]
                self.bcc.bin_propose(self.bc, self.tag, [(self.k, p is not None, None)])
            self.state = AWAIT
        if self.state == AWAIT:
            e = self._entry(self.k)
            if e is None or e.decided is None:
                self.bcc.refresh(self.bc, self.tag, self.proposals)
                return
            if e.decided is False:
                self.k += 1
                self.rounds += 1
                self.state = ROUND
                return
            self.state = WAIT_VALUE
        if self.state == WAIT_VALUE:
            x = self.proposals[self.k % self.n]
            if x is not None:
                self.decided = x
                self.decided_round = self.k
                self.state = DONE

    def result(self) -> Optional[bytes]:
        return self.decided

    def on_proposal(self, frm: int, v: Optional[bytes], tag: Optional[int] = None) -> None:
        self.proposals[frm] = v

    def on_bc_decide(self, k: int, decided: bool, carry) -> None:
        e = self.bc.get(k)
        if e is not None and e.decided is None:
            e.decided = decided
            self.world.record("bc_decide", p=self.pid, tag=self.tag, k=k, value=decided, variant="mrt")

"""Wiring of one single-shot consensus process (self-stabilizing or baseline)."""
from __future__ import annotations

from .bin_consensus import BcClient
from .core_types import BOT, Decided, Kind, Message
from .mrt_baseline import MrtProcess
from .mv_consensus import SEQUENTIAL, MvSlot
from .urb_service import UrbEndpoint

MV, MRT = "mv", "mrt"


class ConsensusNode:
    def __init__(self, pid: int, n: int, world, protocol: str = MV, variant: str = SEQUENTIAL, tag: int = 0):
        self.pid = pid
        self.n = n
        self.world = world
        self.protocol = protocol
        self.urb = UrbEndpoint(pid, n, world, 0, on_deliver=self._on_deliver)
        self.bcc = BcClient(pid, n, world)
        if protocol == MV:
            self.cons = MvSlot(pid, n, self.urb, self.bcc, world, variant, tag)
        elif protocol == MRT:
            self.cons = MrtProcess(pid, n, self.urb, self.bcc, world, tag)
        else:
            raise ValueError(f"unknown protocol {protocol!r}")

    def propose(self, v: bytes) -> None:
        self.cons.propose(v)

    def result(self):
        r = self.cons.result()
        if self.protocol == MRT:
            return BOT if r is None else Decided(r)
        return r

    def activate(self) -> None:
        self.cons.step()
        self.urb.tick()
        self.world.iteration_done(self.pid)

    def on_packet(self, m: Message) -> None:
        if m.kind in (Kind.URB_DATA, Kind.URB_ACK) and m.stream == 0:
            self.urb.receive(m)

    def _on_deliver(self, origin: int, useq: int, body, tag: int) -> None:
        if isinstance(body, Message) and body.kind == Kind.PROPOSAL and body.tag == self.cons.tag:
            self.cons.on_proposal(origin, body.value, body.tag)

    def on_bc_decide(self, tag: int, k: int, decided: bool, carry) -> None:
        if tag == self.cons.tag:
            self.cons.on_bc_decide(k, decided, carry)

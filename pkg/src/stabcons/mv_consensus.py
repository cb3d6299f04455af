"""Self-stabilizing wait-free multivalued consensus over n binary objects.

One :class:`MvSlot` holds the (possibly inactive) object of one process.
``propose`` and ``result`` never block; all progress happens in ``step``,
which the simulator calls once per do-forever iteration.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from .bin_consensus import BcState, bc_result
from .core_types import BOT, BROADCAST, TRANSIENT_ERROR, Decided, Kind, Message, TxDescriptor

log = logging.getLogger(__name__)

SEQUENTIAL = "seq"
CONCURRENT = "conc"


@dataclass
class MvObject:
    v: Optional[bytes]
    proposals: list
    bc: list
    txd: Optional[TxDescriptor] = None
    one_term: bool = False
    tag: int = 0

    @classmethod
    def fresh(cls, n: int, v: bytes, tag: int = 0) -> "MvObject":
        return cls(v, [None] * n, [None] * n, None, False, tag)

    def copy(self) -> "MvObject":
        bc = [None if e is None else BcState(e.my_proposal, e.decided) for e in self.bc]
        return MvObject(self.v, list(self.proposals), bc, self.txd, self.one_term, self.tag)


def k_macro(o: MvObject) -> int:
    """Highest index x such that BC[0..x] are all active and decided False; -1 if none."""
    k = -1
    for e in o.bc:
        if e is None or e.decided is not False:
            break
        k += 1
    return k


def result_of(o: Optional[MvObject]):
    n = len(o.bc) if o is not None else 0
    if o is None:
        return BOT
    k = k_macro(o)
    if o.v is None or k >= n - 1:
        return TRANSIENT_ERROR
    if o.bc[k + 1] is None or bc_result(o.bc[k + 1]) is not True:
        return BOT
    x = o.proposals[k + 1]
    if x is None:
        return TRANSIENT_ERROR
    return Decided(x)


class MvSlot:
    def __init__(self, pid: int, n: int, urb, bc_client, world, variant: str = SEQUENTIAL, tag: int = 0):
        if variant not in (SEQUENTIAL, CONCURRENT):
            raise ValueError(f"unknown variant {variant!r}")
        self.pid = pid
        self.n = n
        self.urb = urb
        self.bcc = bc_client
        self.world = world
        self.variant = variant
        self.tag = tag
        self.obj: Optional[MvObject] = None

    @property
    def active(self) -> bool:
        return self.obj is not None

    def k(self) -> int:
        return k_macro(self.obj)

    def propose(self, v: Optional[bytes], tag: Optional[int] = None) -> None:
        if v is None or self.obj is not None:
            return
        t = self.tag if tag is None else tag
        self.obj = MvObject.fresh(self.n, v, t)
        self.world.record("mv_propose", p=self.pid, tag=t, value=v.hex())

    def result(self):
        return result_of(self.obj)

    def deactivate(self) -> None:
        self.obj = None

    def step(self) -> None:
        o = self.obj
        if o is None:
            return
        n = self.n
        if o.v is not None and (o.txd is None or self.urb.has_terminated(o.txd)):
            o.one_term = o.one_term or (o.txd is not None and self.urb.has_terminated(o.txd))
            body = Message(Kind.PROPOSAL, self.pid, BROADCAST, tag=o.tag, value=o.v)
            o.txd = self.urb.broadcast(body, tag=o.tag)
        try:
            if self.variant == SEQUENTIAL:
                k = k_macro(o)
                if o.one_term and k < n - 1 and o.bc[k + 1] is None and (k == -1 or bc_result(o.bc[k]) is not None):
                    p = o.proposals[k + 1]
                    self.bcc.bin_propose(o.bc, o.tag, [(k + 1, p is not None, p)])
            elif o.one_term and any(e is None for e in o.bc):
                items = [(j, o.proposals[j] is not None, o.proposals[j]) for j in range(n) if o.bc[j] is None]
                self.bcc.bin_propose(o.bc, o.tag, items)
        except IndexError:
            log.debug("p%d: out-of-range binary object index, deactivating", self.pid)
            self.obj = None
            return
        self.bcc.refresh(o.bc, o.tag, o.proposals)

    def on_proposal(self, frm: int, vj: Optional[bytes], tag: Optional[int] = None) -> None:
        if vj is None:
            return
        o = self.obj
        if o is not None:
            if o.proposals[frm] is None:
                o.proposals[frm] = vj
        else:
            t = self.tag if tag is None else tag
            self.obj = o = MvObject.fresh(self.n, vj, t)
            o.proposals[frm] = vj

    def on_bc_decide(self, k: int, decided: bool, carry: Optional[bytes]) -> None:
        o = self.obj
        if o is None or not 0 <= k < len(o.bc):
            return
        e = o.bc[k]
        if e is None or e.decided is not None:
            return
        # a True decision arrives together with the value that justified it
        if decided and carry is not None and o.proposals[k] is None:
            o.proposals[k] = carry
        e.decided = decided
        self.world.record("bc_decide", p=self.pid, tag=o.tag, k=k, value=decided)

    def corrupt(self, **fields) -> None:
        """Overwrite named object fields verbatim; ``active=False`` deactivates."""
        if fields.pop("active", True) is False:
            self.obj = None
            return
        if self.obj is None:
            self.obj = MvObject(None, [None] * self.n, [None] * self.n, None, False, self.tag)
        for name, val in fields.items():
            if name in ("proposals", "bc"):
                val = list(val)
                if len(val) != self.n:
                    raise ValueError(f"{name} must have {self.n} entries")
            elif name not in ("v", "txd", "one_term", "tag"):
                raise AttributeError(f"MvObject has no field {name!r}")
            setattr(self.obj, name, val)

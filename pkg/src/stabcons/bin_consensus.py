"""Binary consensus objects backed by a simulator ledger.

The ledger fixes the decision of each ``(tag, k)`` key to the proposal of the
first submission the simulator dequeues for it and answers each submitter
when its own submission is dequeued (never lost).  Processes keep a local cache entry per
object; only the cache is exposed to fault injection.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass(slots=True)
class BcState:
    """An active binary consensus object.  ``None`` stands for inactive."""

    my_proposal: bool
    decided: Optional[bool] = None


def bc_result(entry: Optional[BcState]) -> Optional[bool]:
    """Local view of the decision: ``None`` while inactive or undecided."""
    if entry is None:
        return None
    return entry.decided


class BcLedger:
    """The uncorruptible decision record shared by all processes."""

    def __init__(self):
        self.decisions: dict = {}
        self.submissions = 0

    def submit(self, tag: int, k: int, b: bool, carry: Optional[bytes]):
        self.submissions += 1
        key = (tag, k)
        if key not in self.decisions:
            self.decisions[key] = (bool(b), carry if b else None)
        return self.decisions[key]

    def decision(self, tag: int, k: int):
        return self.decisions.get((tag, k))


class BcClient:
    """Per-process access point.

    ``bin_propose`` activates the cache entry and hands the submission to the
    world, which queues it as an event.  A single call may carry several
    ``(k, b, carry)`` triples; they travel in one event, which is how the
    concurrent variant piggybacks its n proposals.
    """

    def __init__(self, pid: int, n: int, world):
        self.pid = pid
        self.n = n
        self.world = world
        self.invocations = 0
        self.invocation_steps: list = []

    def bin_propose(self, bc: list, tag: int, items) -> None:
        batch = []
        for k, b, carry in items:
            if isinstance(bc, dict):
                if k < 0:
                    raise IndexError(f"negative binary consensus index {k}")
                if bc.get(k) is not None:
                    continue
            elif not 0 <= k < len(bc):
                raise IndexError(f"binary consensus index {k} outside [0, {len(bc)})")
            elif bc[k] is not None:
                continue
            bc[k] = BcState(bool(b))
            batch.append((k, bool(b), carry if b else None))
        if not batch:
            return
        self.invocations += len(batch)
        self.invocation_steps.append(self.world.clock)
        self.world.submit_bc(self.pid, tag, batch)
        for k, b, _ in batch:
            self.world.record("bc_propose", p=self.pid, tag=tag, k=k, value=b)

    def refresh(self, bc: list, tag: int, proposals) -> None:
        """Resubmit active undecided entries that have nothing in flight.

        Never fires in an authentic execution, where every active entry was
        created by :meth:`bin_propose`.  After corruption it models the
        binary consensus service finishing whatever instance the local state
        claims to be part of.
        """
        batch = []
        entries = bc.items() if isinstance(bc, dict) else enumerate(bc)
        for k, entry in entries:
            if entry is not None and entry.decided is None and not self.world.bc_in_flight(self.pid, tag, k):
                carry = proposals[k % len(proposals)] if entry.my_proposal else None
                batch.append((k, entry.my_proposal, carry))
        if batch:
            self.world.submit_bc(self.pid, tag, batch)


def corrupt_bc(bc: list, k: int, forced: Optional[BcState]) -> None:
    """Overwrite one cache entry verbatim (fault injection only)."""
    bc[k] = None if forced is None else BcState(forced.my_proposal, forced.decided)

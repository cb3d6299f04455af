"""Checkable predicates over results, objects and whole worlds.

Everything here is read-only: calling a predicate never mutates the state it
inspects, so checks can run after every step without perturbing a run.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .bin_consensus import bc_result
from .core_types import BOT, TRANSIENT_ERROR, Decided, Kind
from .mv_consensus import MvObject, k_macro


@dataclass
class Verdict:
    name: str
    ok: bool
    witness: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "ok": self.ok, "witness": self.witness}


def _show(r) -> str:
    if isinstance(r, Decided):
        return "Decided(" + r.value.hex() + ")"
    return repr(r)


# -- consensus properties ---------------------------------------------------

def check_agreement(results: dict) -> Verdict:
    """``results`` maps process id to its current result."""
    seen = {}
    for p, r in sorted(results.items()):
        if isinstance(r, Decided):
            seen.setdefault(r.value, p)
    if len(seen) > 1:
        return Verdict("agreement", False, {"decisions": {_show(Decided(v)): p for v, p in seen.items()}})
    return Verdict("agreement", True)


def check_validity(results: dict, proposed: Iterable[bytes]) -> Verdict:
    pool = set(proposed)
    for p, r in sorted(results.items()):
        if isinstance(r, Decided) and r.value not in pool:
            return Verdict("validity", False, {"process": p, "value": r.value.hex()})
    return Verdict("validity", True)


def check_integrity(history: list) -> Verdict:
    """A result history must read Bot*, then one Decided value forever, and never the error symbol."""
    decided = None
    for i, r in enumerate(history):
        if r is TRANSIENT_ERROR:
            return Verdict("integrity", False, {"index": i, "result": "TRANSIENT_ERROR"})
        if r is BOT:
            if decided is not None:
                return Verdict("integrity", False, {"index": i, "result": "BOT after decision"})
            continue
        if decided is None:
            decided = r
        elif r != decided:
            return Verdict("integrity", False, {"index": i, "from": _show(decided), "to": _show(r)})
    return Verdict("integrity", True)


def check_termination(results: dict, correct: Iterable[int]) -> Verdict:
    missing = [p for p in correct if not isinstance(results.get(p), Decided)]
    return Verdict("termination", not missing, {"undecided": missing} if missing else {})


# -- object consistency -----------------------------------------------------

def check_def2_consistent(o: Optional[MvObject]) -> bool:
    if o is None:
        return True
    n = len(o.bc)
    k = k_macro(o)
    if o.v is None or k >= n - 1:
        return False
    e = o.bc[k + 1]
    r = bc_result(e)
    return e is None or r is None or (r is True and o.proposals[k + 1] is not None)


# -- total-order ring legality ----------------------------------------------

def _def4_node(node, M: int) -> Optional[str]:
    seqs = []
    for k, slot in enumerate(node.cs):
        if slot.obj is not None:
            if slot.obj.tag % M != k:
                return f"slot {k} holds tag {slot.obj.tag}"
            seqs.append(slot.obj.tag)
    if seqs:
        if max(seqs) - min(seqs) > 1:
            return f"slot tags {sorted(seqs)} spread more than one"
        if node.obs_s > max(seqs):
            return f"obsS {node.obs_s} above every slot tag"
    g = node.get_seq()
    if not node.obs_s <= g <= node.obs_s + 1:
        return f"getSeq {g} outside [obsS, obsS+1] with obsS={node.obs_s}"
    return None


def check_def4_legal(world, nodes=None, M: int = 3) -> Verdict:
    """Slot tags match their index, tags span at most one, and obsS <= getSeq <= obsS+1 at every correct process."""
    nodes = world.procs if nodes is None else nodes
    correct = set(world.correct())
    for node in nodes:
        if node.pid not in correct:
            continue
        why = _def4_node(node, M)
        if why is not None:
            return Verdict("def4_legal", False, {"process": node.pid, "reason": why})
    for m in world.sync_in_flight.values():
        owner = m.sender if m.kind == Kind.SYNC else m.dest
        if owner in correct and m.sn > nodes[owner].sn:
            return Verdict("def4_legal", False, {"process": owner, "reason": f"in-flight sn {m.sn} above {nodes[owner].sn}"})
    return Verdict("def4_legal", True)


def check_pred(nodes, correct: Iterable[int]) -> Verdict:
    """Shared-z quiescence predicate: getSeq = maxSeq = obsS = z and allSeq = {z} everywhere."""
    zs = set()
    for p in correct:
        node = nodes[p]
        z = node.obs_s
        if not (node.get_seq() == z and node.max_seq == z and node.all_seq == frozenset({z})):
            return Verdict("pred", False, {"process": p, "obsS": z, "getSeq": node.get_seq(),
                                           "maxSeq": node.max_seq, "allSeq": sorted(node.all_seq)})
        zs.add(z)
    if len(zs) > 1:
        return Verdict("pred", False, {"z_values": sorted(zs)})
    return Verdict("pred", True)


# -- total order ---------------------------------------------------------------

def check_total_order(logs: dict) -> Verdict:
    """Pairwise prefix comparability plus per-sender FIFO order.

    ``logs`` maps process id to a list of delivered items; an item is any
    hashable value, and when it is an ``(origin, seq, ...)`` tuple the FIFO
    subcheck requires strictly increasing ``seq`` per origin.
    """
    items = sorted(logs.items())
    for p, log_p in items:
        last = {}
        for it in log_p:
            if isinstance(it, tuple) and len(it) >= 2:
                o, s = it[0], it[1]
                if s <= last.get(o, 0):
                    return Verdict("total_order", False, {"process": p, "fifo": [o, s]})
                last[o] = s
    for a in range(len(items)):
        for b in range(a + 1, len(items)):
            (p, x), (q, y) = items[a], items[b]
            short = min(len(x), len(y))
            if x[:short] != y[:short]:
                i = next(i for i in range(short) if x[i] != y[i])
                return Verdict("total_order", False, {"processes": [p, q], "index": i})
    return Verdict("total_order", True)

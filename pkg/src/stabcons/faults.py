"""Transient-fault recipes.

A recipe overwrites local state (never code) with type-valid but arbitrary
values drawn from the world's seeded generator, and may seed the channels
with garbage.  Each function returns a small description of what it did so
reports can show the injected fault.
"""
from __future__ import annotations

import json
import logging

from .bin_consensus import BcState
from .core_types import BROADCAST, U64_MAX, Kind, Message, TxDescriptor, encode_vector
from .rsm import encode_pair
from .to_urb import M, Ack

log = logging.getLogger(__name__)

MV_RECIPES = ("all_false", "random_fields", "k_prefix", "one_term_skip", "deactivate",
              "channel_garbage", "true_bot", "flip_bytes")
CONTRAST_RECIPES = ("all_false", "k_corrupt", "pc_skip")


def _value(rng, pool):
    if pool and rng.random() < 0.7:
        return rng.choice(pool)
    return bytes(rng.randrange(256) for _ in range(rng.randrange(1, 6)))


def _bc_entry(rng):
    r = rng.random()
    if r < 0.25:
        return None
    b = rng.random() < 0.5
    if r < 0.5:
        return BcState(b, None)
    return BcState(b, rng.random() < 0.5)


def _random_object_fields(rng, n, pool, pid):
    return dict(
        v=None if rng.random() < 0.15 else _value(rng, pool),
        proposals=[None if rng.random() < 0.4 else _value(rng, pool) for _ in range(n)],
        bc=[_bc_entry(rng) for _ in range(n)],
        txd=None if rng.random() < 0.5 else TxDescriptor(pid, rng.randrange(1, 8), 0),
        one_term=rng.random() < 0.5,
    )


# -- single-shot consensus -----------------------------------------------------

def inject_mv(world, nodes, recipe: str, pool: list, anchor: int) -> dict:
    """Apply one recipe to every correct process of a single-shot mv run.

    ``anchor`` is a correct process whose object is left active so that some
    correct process holds an active object after the fault.
    """
    rng = world.rng
    n = world.n
    correct = world.correct()
    touched = []
    if recipe == "all_false":
        for p in correct:
            slot = nodes[p].cons
            slot.corrupt(v=slot.obj.v if slot.obj else _value(rng, pool),
                         bc=[BcState(rng.random() < 0.5, False) for _ in range(n)])
            touched.append(p)
    elif recipe == "random_fields":
        for p in rng.sample(correct, rng.randrange(1, len(correct) + 1)):
            nodes[p].cons.corrupt(**_random_object_fields(rng, n, pool, p))
            touched.append(p)
    elif recipe == "k_prefix":
        for p in correct:
            j = rng.randrange(-1, n)
            slot = nodes[p].cons
            slot.corrupt(v=slot.obj.v if slot.obj else _value(rng, pool),
                         bc=[BcState(False, False) if i <= j else None for i in range(n)])
            touched.append(p)
    elif recipe == "one_term_skip":
        for p in correct:
            slot = nodes[p].cons
            slot.corrupt(v=slot.obj.v if slot.obj else _value(rng, pool), one_term=True, txd=None)
            touched.append(p)
    elif recipe == "deactivate":
        for p in correct:
            if p != anchor and rng.random() < 0.6:
                nodes[p].cons.corrupt(active=False)
                touched.append(p)
    elif recipe == "channel_garbage":
        for _ in range(rng.randrange(1, 3 * n)):
            src = rng.choice(range(n))
            dst = rng.choice([j for j in range(n) if j != src])
            body = Message(Kind.PROPOSAL, src, BROADCAST, tag=0, value=_value(rng, pool))
            world.inject_packet(Message(Kind.URB_DATA, src, dst, origin=src, useq=rng.randrange(50, 90),
                                        stream=0, body=body))
        touched = ["channels"]
    elif recipe == "true_bot":
        for p in correct:
            slot = nodes[p].cons
            j = rng.randrange(n)
            bc = [BcState(False, False) if i < j else None for i in range(n)]
            bc[j] = BcState(True, True)
            props = [None if i == j else (slot.obj.proposals[i] if slot.obj else None) for i in range(n)]
            slot.corrupt(v=slot.obj.v if slot.obj else _value(rng, pool), bc=bc, proposals=props)
            touched.append(p)
    elif recipe == "flip_bytes":
        touched = ["channels", world.flip_channel_bytes(rng.randrange(1, 8))]
    else:
        raise ValueError(f"unknown recipe {recipe!r}")
    o = nodes[anchor].cons.obj
    if o is None or o.v is None:
        nodes[anchor].cons.corrupt(v=_value(rng, pool))
    world.record("inject", recipe=recipe, touched=touched)
    return {"recipe": recipe, "touched": touched}


def inject_contrast(world, nodes, recipe: str, pool: list) -> dict:
    """Corrupt the decision state alike in baseline and mv processes (all-False BCs, skewed index, skipped broadcast)."""
    rng = world.rng
    n = world.n
    for p in world.correct():
        c = nodes[p].cons
        if nodes[p].protocol == "mrt":
            if recipe == "all_false":
                c.false_below = U64_MAX
            elif recipe == "k_corrupt":
                c.false_below = U64_MAX
                c.k = rng.randrange(0, 2**63)
            elif recipe == "pc_skip":
                c.skip_broadcast = True
            else:
                raise ValueError(f"unknown recipe {recipe!r}")
        else:
            v = c.obj.v if c.obj else _value(rng, pool)
            if recipe == "all_false":
                c.corrupt(v=v, bc=[BcState(False, False) for _ in range(n)])
            elif recipe == "k_corrupt":
                j = rng.randrange(n)
                c.corrupt(v=v, bc=[BcState(False, False) if i <= j else None for i in range(n)])
            elif recipe == "pc_skip":
                c.corrupt(v=v, one_term=True, txd=None)
            else:
                raise ValueError(f"unknown recipe {recipe!r}")
    world.record("inject", recipe=recipe)
    return {"recipe": recipe}


# -- total order ---------------------------------------------------------------

def _garbage_vector(rng, n, ready):
    return tuple(max(0, r + rng.randrange(-2, 3)) for r in ready) if rng.random() < 0.8 else \
        tuple(rng.randrange(0, 20) for _ in range(n))


def _vector_value(rng, n, ready):
    return encode_vector(_garbage_vector(rng, n, ready))


def rsm_value(rng, n, ready):
    return encode_pair(_garbage_state(rng, n, ready), _garbage_vector(rng, n, ready))


def _garbage_state(rng, n, ready) -> bytes:
    if rng.random() < 0.1:
        return bytes(rng.randrange(256) for _ in range(rng.randrange(1, 12)))
    kv = {f"k{rng.randrange(4)}": "".join(rng.choice("xyz") for _ in range(rng.randrange(4))) for _ in range(rng.randrange(3))}
    applied = list(_garbage_vector(rng, n, ready))
    return json.dumps({"applied": applied, "kv": kv}, sort_keys=True, separators=(",", ":")).encode()


def inject_to_urb(world, nodes, intensity: float = 0.6, make_value=_vector_value) -> dict:
    """Randomize the agreement-layer state of every correct process and seed garbage packets.

    Broadcast-layer bookkeeping is left alone; only consensus slots, obsS, sn,
    the query state, and channel contents are hit.  The returned ``tainted``
    lists the tags that received garbage; whether any of it is later decided
    is tracked by the nodes themselves.
    """
    rng = world.rng
    n = world.n
    correct = world.correct()
    base = max(nodes[p].obs_s for p in correct)
    near = lambda: max(0, base + rng.randrange(-2, 4))  # noqa: E731
    tainted = set()
    ready_now = nodes[correct[0]].app_urb.fifo_ready()
    for p in correct:
        node = nodes[p]
        if rng.random() < intensity:
            for slot in node.cs:
                r = rng.random()
                if r < 0.35:
                    slot.corrupt(active=False)
                    continue
                tag = near() if r < 0.9 else base + rng.randrange(10, 1000)
                fields = _random_object_fields(rng, n, [make_value(rng, n, ready_now)], p)
                fields["tag"] = tag
                slot.corrupt(**fields)
                tainted.add(tag)
        if rng.random() < intensity:
            node.obs_s = near()
        if rng.random() < intensity:
            node.sn = rng.randrange(0, 64)
        if rng.random() < intensity:
            node.querying = rng.random() < 0.7
            node.acks = {}
            for j in rng.sample(range(n), rng.randrange(0, n + 1)):
                node.acks[j] = Ack(near(), near(), _garbage_vector(rng, n, ready_now))
            node.tainted_query = True
        if rng.random() < intensity:
            node.max_seq = near()
            node.all_seq = frozenset(near() for _ in range(rng.randrange(1, 3)))
    for _ in range(rng.randrange(0, 4 * n)):
        src = rng.randrange(n)
        dst = rng.choice([j for j in range(n) if j != src])
        r = rng.random()
        if r < 0.3:
            msg = Message(Kind.SYNC, src, dst, sn=rng.randrange(0, 64))
        elif r < 0.7:
            msg = Message(Kind.SYNCACK, src, dst, sn=rng.randrange(0, 64), seq=near(), obs=near(),
                          ready=_garbage_vector(rng, n, ready_now))
            world.tainted_msgs.add(id(msg))
            world.keepalive.append(msg)
        else:
            tag = near()
            tainted.add(tag)
            body = Message(Kind.PROPOSAL, src, BROADCAST, tag=tag,
                           value=make_value(rng, n, ready_now))
            msg = Message(Kind.URB_DATA, src, dst, tag=tag, origin=src, useq=rng.randrange(10_000, 20_000),
                          stream=0, body=body)
        world.inject_packet(msg)
    for p in correct:
        a = getattr(nodes[p], "automaton", None)
        if a is not None and rng.random() < intensity:
            try:
                a.set_state(_garbage_state(rng, n, ready_now))
            except ValueError:
                a.kv = {"garbage": "!"}
    world.record("inject", recipe="to_urb", base=base, tainted=sorted(tainted))
    return {"recipe": "to_urb", "base": base, "tainted": sorted(tainted)}


__all__ = ["MV_RECIPES", "CONTRAST_RECIPES", "inject_mv", "inject_contrast", "inject_to_urb", "rsm_value", "M"]

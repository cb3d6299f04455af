from types import SimpleNamespace

from stabcons.core_types import BOT, TRANSIENT_ERROR, Decided
from stabcons.invariant_suite import (check_agreement, check_def2_consistent, check_def4_legal, check_integrity,
                                 check_pred, check_termination, check_total_order, check_validity)
from stabcons.mv_consensus import MvObject
from stabcons.simulator import World
from stabcons.to_urb import ToUrbNode

A, B = Decided(b"a"), Decided(b"b")


def test_agreement():
    assert check_agreement({0: A, 1: BOT, 2: A}).ok
    assert not check_agreement({0: A, 1: B}).ok


def test_validity():
    assert check_validity({0: A, 1: BOT}, [b"a", b"c"]).ok
    assert not check_validity({0: B}, [b"a"]).ok


def test_integrity():
    assert check_integrity([BOT, BOT, A, A]).ok
    assert not check_integrity([A, B]).ok
    assert not check_integrity([A, BOT]).ok
    assert not check_integrity([BOT, TRANSIENT_ERROR]).ok


def test_termination():
    assert check_termination({0: A, 1: A, 2: BOT}, [0, 1]).ok
    v = check_termination({0: A, 1: BOT}, [0, 1])
    assert not v.ok and v.witness == {"undecided": [1]}


def test_object_consistency():
    assert check_def2_consistent(None)
    o = MvObject.fresh(3, b"v", 0)
    assert check_def2_consistent(o)
    o.v = None
    assert not check_def2_consistent(o)


def _ring(n=3):
    w = World(n, 0)
    nodes = [ToUrbNode(i, n, w) for i in range(n)]
    w.add_processes(nodes)
    return w, nodes


def test_fresh_ring_is_legal():
    w, nodes = _ring()
    assert check_def4_legal(w).ok


def test_ring_check_detects_slot_tag_mismatch_and_spread():
    w, nodes = _ring()
    nodes[0].cs[1].obj = MvObject.fresh(3, b"v", 2)
    assert not check_def4_legal(w).ok
    w, nodes = _ring()
    nodes[0].cs[0].obj = MvObject.fresh(3, b"v", 3)
    nodes[0].cs[2].obj = MvObject.fresh(3, b"v", 5)
    assert not check_def4_legal(w).ok


def test_ring_check_ignores_crashed_process():
    w, nodes = _ring()
    nodes[2].cs[1].obj = MvObject.fresh(3, b"v", 2)
    w.crashed.add(2)
    assert check_def4_legal(w).ok


def _pred_node(obs, get_seq, max_seq, all_seq):
    return SimpleNamespace(obs_s=obs, get_seq=lambda: get_seq, max_seq=max_seq, all_seq=frozenset(all_seq))


def test_pred():
    assert check_pred([_pred_node(4, 4, 4, {4})] * 3, [0, 1, 2]).ok
    assert not check_pred([_pred_node(4, 4, 4, {4}), _pred_node(4, 4, 4, {3, 4})], [0, 1]).ok
    assert not check_pred([_pred_node(4, 4, 4, {4}), _pred_node(5, 5, 5, {5})], [0, 1]).ok


def test_total_order_prefixes():
    m1, m2 = (0, 1, b"x"), (1, 1, b"y")
    assert check_total_order({0: [m1, m2], 1: [m1]}).ok
    assert not check_total_order({0: [m1, m2], 1: [m2, m1]}).ok


def test_total_order_fifo_per_sender():
    assert not check_total_order({0: [(0, 2, b""), (0, 1, b"")]}).ok

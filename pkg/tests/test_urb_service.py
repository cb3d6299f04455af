from stabcons.core_types import BROADCAST, Kind, Message, TxDescriptor

from conftest import urb_world


def _app(p, v):
    return Message(Kind.APP, p, BROADCAST, value=v)


def _settled(procs, count):
    return lambda w: all(sum(1 for _ in p.log) >= count for p in procs if p.pid not in w.crashed)


def test_descriptors_number_per_sender(urb3):
    w, procs = urb3
    assert procs[0].urb.broadcast(_app(0, b"a")) == TxDescriptor(0, 1, 0)
    assert procs[0].urb.broadcast(_app(0, b"b")).seq == 2
    assert procs[1].urb.broadcast(_app(1, b"c")).seq == 1


def test_has_terminated_false_before_any_delivery_step(urb3):
    w, procs = urb3
    txd = procs[0].urb.broadcast(_app(0, b"a"))
    assert not procs[0].urb.has_terminated(txd)
    assert not procs[0].urb.all_have_terminated()


def test_has_terminated_after_everyone_acks(urb3):
    w, procs = urb3
    txd = procs[0].urb.broadcast(_app(0, b"a"))
    assert w.run(stop=lambda w: procs[0].urb.has_terminated(txd), budget=2000)
    assert all(p.log == [(0, 1, _app(0, b"a"))] for p in procs)
    assert procs[0].urb.all_have_terminated()


def test_fresh_process_has_no_pending_transmissions(urb3):
    assert urb3[1][0].urb.all_have_terminated()


def test_untracked_descriptor_counts_as_terminated(urb3):
    # deliberate: stale descriptors left by corruption must not block the caller
    assert urb3[1][0].urb.has_terminated(TxDescriptor(0, 99, 0))


def test_termination_ignores_crashed_receiver():
    w, procs = urb_world(3, crashes={2: 1})
    txd = procs[0].urb.broadcast(_app(0, b"a"))
    assert w.run(stop=lambda w: procs[0].urb.has_terminated(txd), budget=2000)
    assert 2 in w.crashed and 2 not in w.trusted()


def test_ready_vectors_empty_at_start(urb3):
    u = urb3[1][1].urb
    assert u.ready_min() == (0, 0, 0) and u.fifo_ready() == (0, 0, 0)


def test_ready_vectors_after_two_deliveries(urb3):
    w, procs = urb3
    procs[0].urb.broadcast(_app(0, b"a"))
    procs[0].urb.broadcast(_app(0, b"b"))
    w.run(stop=_settled(procs, 2), budget=3000)
    u = procs[1].urb
    assert u.fifo_ready()[0] == 2
    # readyMin is an exclusive pointer: nothing consumed yet, so the lowest ready message is readyMin+1 = 1
    assert u.ready_min()[0] == 0
    assert u.ready_min()[0] + 1 == 1


def test_fifo_ready_is_contiguous(urb3):
    w, procs = urb3
    u = procs[1].urb
    for s in (1, 3):
        u.receive(Message(Kind.URB_DATA, 0, 1, origin=0, useq=s, body=_app(0, bytes([s]))))
    assert u.fifo_ready()[0] == 1
    u.receive(Message(Kind.URB_DATA, 0, 1, origin=0, useq=2, body=_app(0, b"\x02")))
    assert u.fifo_ready()[0] == 3


def test_bulk_read_empty_band(urb3):
    w, procs = urb3
    procs[0].urb.broadcast(_app(0, b"a"))
    w.run(stop=_settled(procs, 1), budget=3000)
    u = procs[1].urb
    assert u.bulk_read(u.ready_min()) == []


def test_bulk_read_sender_major_and_identical_across_processes(urb3):
    w, procs = urb3
    procs[1].urb.broadcast(_app(1, b"y"))
    procs[0].urb.broadcast(_app(0, b"x"))
    w.run(stop=_settled(procs, 2), budget=3000)
    batches = [p.urb.bulk_read((1, 1, 0)) for p in procs]
    assert [(o, s) for o, s, _ in batches[0]] == [(0, 1), (1, 1)]
    assert batches[0] == batches[1] == batches[2]
    assert procs[0].urb.ready_min() == (1, 1, 0)


def test_bulk_read_clamps_out_of_band_entries(urb3):
    w, procs = urb3
    procs[0].urb.broadcast(_app(0, b"x"))
    w.run(stop=_settled(procs, 1), budget=3000)
    u = procs[2].urb
    assert [(o, s) for o, s, _ in u.bulk_read((50, 7, 9))] == [(0, 1)]
    assert u.bulk_read((50, 7, 9)) == []
    assert u.body(0, 1) == _app(0, b"x")


def test_crashed_sender_message_reaches_all_correct():
    # sender crashes right after its first copies left; one receiver already has it
    for seed in range(20):
        w, procs = urb_world(3, seed=seed, crashes={0: 3}, drop=0.2)
        procs[0].urb.broadcast(_app(0, b"a"))
        w.run(budget=3000)
        got = [bool(p.log) for p in procs[1:]]
        assert all(got) or not any(got), seed


def test_stabilize_repairs_corrupted_pointers(urb3):
    u = urb3[1][0].urb
    u.consumed = [5, -1, 0]
    u.next_seq = 0
    u.stabilize()
    assert u.consumed == [0, 0, 0] and u.next_seq == 1

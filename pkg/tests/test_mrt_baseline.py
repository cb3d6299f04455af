from stabcons.core_types import U64_MAX, Decided
from stabcons.node import MRT, ConsensusNode
from stabcons.simulator import FaultConfig, World


def _world(n=3, seed=0, **faults):
    w = World(n, seed, FaultConfig(**faults))
    nodes = [ConsensusNode(i, n, w, protocol=MRT) for i in range(n)]
    w.add_processes(nodes)
    return w, nodes


def _all_decided(nodes):
    return lambda w: all(isinstance(nodes[p].result(), Decided) for p in w.correct())


def test_same_value_everywhere_decides_it():
    w, nodes = _world()
    for nd in nodes:
        nd.propose(b"a")
    assert w.run(stop=_all_decided(nodes), budget=5000)
    assert {nd.result() for nd in nodes} == {Decided(b"a")}


def test_early_proposal_of_p0_wins_round_zero():
    w, nodes = _world()
    # p0's proposal has reached everyone before any round-0 decision is taken
    for nd in nodes:
        nd.cons.on_proposal(0, b"zero")
    nodes[0].propose(b"zero")
    nodes[1].propose(b"one")
    nodes[2].propose(b"two")
    assert w.run(stop=_all_decided(nodes), budget=5000)
    assert {nd.result() for nd in nodes} == {Decided(b"zero")}
    assert {nd.cons.decided_round for nd in nodes} == {0}


def test_decided_value_is_proposal_of_round_owner():
    for seed in range(10):
        w, nodes = _world(4, seed, drop=0.1, reorder=True)
        for nd in nodes:
            nd.propose(f"v{nd.pid}".encode())
        assert w.run(stop=_all_decided(nodes), budget=20000), seed
        for nd in nodes:
            c = nd.cons
            assert c.decided == c.proposals[c.decided_round % 4]


def test_all_false_corruption_blocks_within_budget():
    w, nodes = _world()
    for nd in nodes:
        nd.cons.false_below = U64_MAX
        nd.propose(b"a")
    w.run(budget=64 * 3 * 50)
    assert all(nd.result() is not None and not isinstance(nd.result(), Decided) for nd in nodes)
    assert min(nd.cons.rounds for nd in nodes) > 64 * 3 // 2

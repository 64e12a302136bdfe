import pytest
from hypothesis import given, strategies as st

from congestpa.casting import Job, TreeAggregator, exchange, run_relay
from congestpa.graphs import build_bfs_tree, gen_path, gen_random_tree
from congestpa.ops import OPERATORS, Carry, PairOp, get_op
from congestpa.oracle import fold
from congestpa.sim import CapacityExceeded, WORD_MASK, Simulator

words = st.integers(0, WORD_MASK)


@pytest.mark.parametrize("name", OPERATORS)
@given(st.lists(st.tuples(st.integers(0, 50), words), min_size=1, max_size=12, unique_by=lambda t: t[0]))
def test_fold_matches_oracle_in_any_order(name, items):
    op = get_op(name)
    acc = op.identity
    for node, x in reversed(items):
        acc = op.combine(acc, op.lift(node, x))
    assert op.finish(acc) == fold(name, items)
    assert op.unpack(op.pack(acc)) == acc
    assert len(op.pack(acc)) == op.words


def test_unknown_operator():
    with pytest.raises(ValueError):
        get_op("median")


def test_pair_and_carry():
    pair = PairOp("or", "sum")
    assert pair.combine((0, 2), (1, 3)) == (1, 5)
    assert pair.identity == (0, 0)
    assert Carry(2).combine((1, 2), (3, 4)) == (1, 2)


def test_tree_aggregator_per_cluster():
    g = gen_path(6)
    tree, _ = build_bfs_tree(g, 0)
    # clusters {0,1,2} rooted at 0 and {3,4,5} rooted at 3
    cluster = [0, 0, 0, 3, 3, 3]
    parent = [None, 0, 1, None, 3, 4]
    children = [[1], [2], [], [4], [5], []]
    agg = TreeAggregator(cluster, parent, children)
    sim = Simulator(g)
    out = agg.solve(sim, {v: 10 - v for v in range(6)}, get_op("min"))
    assert out == {0: 8, 1: 8, 2: 8, 3: 5, 4: 5, 5: 5}
    # convergecast plus broadcast: 2 messages per tree edge
    assert sim.report().messages == 8


def test_exchange_one_round():
    g = gen_path(3)
    sim = Simulator(g)
    got = exchange(sim, {0: [(1, (7,))], 2: [(1, (9,))]}, range(3))
    assert got[1] == [(0, (7,)), (2, (9,))]
    assert sim.report().rounds == 1


def test_meta_rounds_spread_a_burst():
    # three flows fire together towards one neighbour: fine with beta=3, not with beta=2
    g = gen_path(2)
    jobs = {0: {(k,): Job([1], acc=(k,)) for k in range(3)},
            1: {(k,): Job([], need=1) for k in range(3)}}
    sim = Simulator(g)
    run_relay(sim, jobs, Carry(), beta=3)
    assert sim.report().messages == 3
    jobs = {0: {(k,): Job([1], acc=(k,)) for k in range(3)},
            1: {(k,): Job([], need=1) for k in range(3)}}
    with pytest.raises(CapacityExceeded):
        run_relay(Simulator(g), jobs, Carry(), beta=2)


@given(st.integers(2, 60), st.integers(0, 1000))
def test_tree_aggregator_whole_tree(n, seed):
    g = gen_random_tree(n, seed=seed)
    tree, _ = build_bfs_tree(g, 0)
    agg = TreeAggregator([0] * n, tree.parent, tree.children)
    vals = {v: (v * 7919 + seed) % 1000 for v in range(n)}
    out = agg.solve(Simulator(g), vals, get_op("sum"))
    assert set(out.values()) == {sum(vals.values())}

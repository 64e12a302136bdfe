import random

import pytest
from hypothesis import given, settings, strategies as st

from congestpa.graphs import (NetworkGraph, Partition, build_bfs_tree, gen_grid_with_apex, gen_path,
                              gen_random_connected, gen_random_connected_partition)
from congestpa.oracle import fold, oracle_blocks, oracle_congestion, oracle_rep_block_count
from congestpa.shortcuts import K1, K2, TreeRestrictedShortcut, block_route, blocks, congestion
from congestpa.sim import Simulator


def _random_shortcut(g, part, tree, rng, density=0.3):
    tree_edges = [v for v in range(g.n) if tree.parent[v] is not None]
    return {p: {ch for ch in tree_edges if rng.random() < density} for p in part.parts}


def test_empty_and_full():
    g = gen_path(6)
    tree, _ = build_bfs_tree(g, 0)
    part = Partition([0, 0, 1, 1, 2, 2])
    sc = TreeRestrictedShortcut(tree, part)
    assert congestion(sc)[0] == 0
    assert blocks(sc).counts == {0: 2, 1: 2, 2: 2}
    full = {p: set(range(1, 6)) for p in part.parts}
    sc = TreeRestrictedShortcut(tree, part, full)
    c, load = congestion(sc)
    assert c == 3 and set(load.values()) == {3}
    assert blocks(sc).b == 1


def test_spanning_h_gives_one_block():
    g = gen_path(6)
    tree, _ = build_bfs_tree(g, 0)
    part = Partition([0, 0, 0, 1, 1, 1])
    sc = TreeRestrictedShortcut(tree, part, {0: {1, 2}, 1: {4, 5}})
    assert blocks(sc).counts == {0: 1, 1: 1}


def test_rejects_non_tree_edge():
    g = gen_path(3)
    tree, _ = build_bfs_tree(g, 0)
    with pytest.raises(ValueError):
        TreeRestrictedShortcut(tree, Partition([0, 0, 0]), {0: {0}})


def test_crafted_four_parts():
    g = gen_random_connected(40, 0.05, seed=8)
    part = gen_random_connected_partition(g, 4, seed=8)
    tree, _ = build_bfs_tree(g, 0)
    H = _random_shortcut(g, part, tree, random.Random(8))
    sc = TreeRestrictedShortcut(tree, part, H)
    bs = blocks(sc)
    for p, vs in part.parts.items():
        assert sorted(b.members for b in bs.blocks[p]) == oracle_blocks(tree.parent, vs, H[p])
    assert congestion(sc)[1] == oracle_congestion(tree.parent, H)


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 60), st.integers(1, 6), st.integers(0, 10**6), st.sampled_from(["min", "sum", "first"]))
def test_blocks_and_routing_against_oracles(n, k, seed, op):
    rng = random.Random(seed)
    g = gen_random_connected(n, 0.1, seed=seed)
    part = gen_random_connected_partition(g, min(k, n), seed=seed)
    tree, _ = build_bfs_tree(g, 0)
    H = _random_shortcut(g, part, tree, rng, rng.random())
    sc = TreeRestrictedShortcut(tree, part, H)
    reps = {v for v in range(n) if rng.random() < 0.3}
    bs = blocks(sc, reps=reps)
    c, load = congestion(sc)
    assert load == oracle_congestion(tree.parent, H)
    for p, vs in part.parts.items():
        assert bs.counts[p] == len(oracle_blocks(tree.parent, vs, H[p]))
        assert bs.rep_counts[p] == oracle_rep_block_count(tree.parent, vs, H[p], reps & set(vs))
    participants = {(part.part_of[v], v): rng.randrange(1000) for v in range(n) if rng.random() < 0.5}
    if not participants:
        return
    res, rep = block_route(tree, bs, participants, op, "convergecast", c=max(c, 1), graph=g)
    expect: dict = {}
    for (p, v), x in participants.items():
        expect.setdefault((p, bs.block_of[(p, v)]), []).append((v, x))
    assert res == {key: fold(op, items) for key, items in expect.items()}
    D = tree.depth_bound
    assert rep.rounds <= K1 * (D + max(c, 1))
    assert rep.messages <= K2 * len(participants) * D
    res, _ = block_route(tree, bs, participants, op, "broadcast", graph=g)
    for (p, v) in participants:
        assert res[(p, v)] == fold(op, expect[(p, bs.block_of[(p, v)])])


def test_single_leaf_upcast():
    g = gen_path(7)
    tree, _ = build_bfs_tree(g, 0)
    part = Partition([0] * 7)
    sc = TreeRestrictedShortcut(tree, part, {0: set(range(1, 7))})
    res, rep = block_route(tree, blocks(sc), {(0, 6): 42}, "min", graph=g)
    assert res == {(0, 0): 42}
    assert rep.messages == 6 and rep.rounds <= 6


def test_grid_column_blocks():
    g, part = gen_grid_with_apex(8, 8)
    apex = g.n - 1
    tree, _ = build_bfs_tree(g, apex)
    # each row takes the column edges from its own row up to the apex
    H = {p: {v for v in range(g.n - 1) if v // 8 <= p} for p in part.parts if p < 8}
    sc = TreeRestrictedShortcut(tree, part, H)
    bs = blocks(sc)
    assert all(bs.counts[p] == 1 for p in range(8))
    participants = {(part.part_of[v], v): v * 3 % 17 for v in range(g.n)}
    res, _ = block_route(tree, bs, participants, "sum", graph=g)
    for p in range(8):
        assert res[(p, apex)] == sum(v * 3 % 17 for v in part.parts[p])


def test_five_overlapping_blocks_on_path():
    n = 30
    g = gen_path(n)
    tree, _ = build_bfs_tree(g, 0)
    part = Partition([v * 5 // n for v in range(n)])
    sc = TreeRestrictedShortcut(tree, part, {p: set(range(1, n)) for p in part.parts})
    c, _ = congestion(sc)
    assert c == 5
    participants = {(part.part_of[v], v): v for v in range(n)}
    sim = Simulator(g)
    res, rep = block_route(tree, blocks(sc), participants, "max", c=c, sim=sim)
    assert res == {(p, 0): max(part.parts[p]) for p in part.parts}
    assert rep.rounds <= K1 * (tree.depth_bound + 5)


def test_shortcut_file_roundtrip(tmp_path):
    g = gen_random_connected(30, 0.1, seed=1)
    part = gen_random_connected_partition(g, 3, seed=1)
    tree, _ = build_bfs_tree(g, 0)
    H = _random_shortcut(g, part, tree, random.Random(1))
    sc = TreeRestrictedShortcut(tree, part, H)
    sc.write(tmp_path / "h.txt")
    back = TreeRestrictedShortcut.read(tmp_path / "h.txt", tree, part)
    assert back.H == sc.H

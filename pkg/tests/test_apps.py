import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from congestpa.apps import component_labels, decode_edge, encode_edge, mst
from congestpa.graphs import NetworkGraph, gen_random_connected, gen_random_tree
from congestpa.oracle import mst_weight, oracle_component_labels, oracle_mst


def test_triangle_keeps_two_lightest():
    g = NetworkGraph(3, [(0, 1), (1, 2), (0, 2)], weights=[1, 2, 3])
    state, _ = mst(g)
    assert state.edges() == {(0, 1), (1, 2)}


@pytest.mark.parametrize("mode", ["det", "rand"])
def test_tree_input_is_its_own_mst(mode):
    g = gen_random_tree(40, seed=3)
    state, _ = mst(g, mode, seed=3)
    assert state.edges() == {(min(u, v), max(u, v)) for u, v in g.edges}


@pytest.mark.parametrize("mode", ["det", "rand"])
@pytest.mark.parametrize("seed", [1, 2])
def test_random_weighted_mst(mode, seed):
    g = gen_random_connected(80, 0.08, seed=seed, weighted=True, max_weight=20)
    state, rep = mst(g, mode, seed=seed)
    assert state.edges() == oracle_mst(g)
    assert mst_weight(g, state.edges()) == mst_weight(g, oracle_mst(g))
    assert state.phases <= math.ceil(math.log2(g.n))
    hist = state.fragments_per_phase
    assert hist[-1] == 1 and all(a > b for a, b in zip(hist, hist[1:]))
    assert sum(rep.messages_by_phase.values()) == rep.messages


def test_edge_key_roundtrip():
    g = gen_random_connected(30, 0.2, seed=1, weighted=True, max_weight=9)
    for u, v in g.edges:
        assert decode_edge(g, encode_edge(g, u, v)) == (min(u, v), max(u, v))


def test_mst_writes_edge_list(tmp_path):
    g = gen_random_connected(20, 0.2, seed=4, weighted=True, max_weight=5)
    state, _ = mst(g)
    state.write(tmp_path / "mst.txt")
    rows = (tmp_path / "mst.txt").read_text().split("\n")
    assert len([r for r in rows if r]) == g.n - 1


def test_labels_h_equals_g():
    g = gen_random_connected(50, 0.05, seed=2)
    lab, _ = component_labels(g, g.edges)
    assert lab.label == [0] * g.n


def test_labels_empty_h():
    g = gen_random_connected(30, 0.05, seed=2)
    lab, _ = component_labels(g, [])
    assert lab.label == list(range(g.n))


def test_labels_reject_foreign_edge():
    g = NetworkGraph(3, [(0, 1), (1, 2)])
    with pytest.raises(ValueError):
        component_labels(g, [(0, 2)])


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 200), st.floats(0.0, 1.0), st.sampled_from(["det", "rand"]), st.integers(0, 10**6))
def test_labels_random_h(n, prob, mode, seed):
    g = gen_random_connected(n, 0.03, seed=seed)
    rng = random.Random(seed)
    h = [e for e in g.edges if rng.random() < prob]
    lab, _ = component_labels(g, h, mode, seed)
    assert lab.label == oracle_component_labels(n, h)


def test_labels_file(tmp_path):
    g = NetworkGraph(4, [(0, 1), (1, 2), (2, 3)])
    lab, _ = component_labels(g, [(2, 3)])
    lab.write(tmp_path / "l.txt")
    assert (tmp_path / "l.txt").read_text() == "0 0\n1 1\n2 2\n3 2\n"

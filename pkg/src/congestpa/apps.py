"""Applications of part-wise aggregation: Boruvka MST and component labels."""
from __future__ import annotations

from dataclasses import dataclass

from .casting import exchange
from .graphs import Partition, build_bfs_tree
from .oracle import UnionFind
from .pa import pa_pipeline
from .sim import WORD_MASK, Simulator

_NONE = WORD_MASK


@dataclass
class MSTState:
    fragment: list  # node -> fragment id (its leader's id)
    marked: list  # node -> set of neighbours whose edge is in the MST
    phases: int = 0
    fragments_per_phase: list = None

    def edges(self) -> set:
        return {(min(u, v), max(u, v)) for u, ws in enumerate(self.marked) for v in ws}

    def write(self, path):
        with open(path, "w") as fh:
            for u, v in sorted(self.edges()):
                fh.write(f"{u} {v}\n")


def encode_edge(graph, u, v) -> int:
    """(weight, min endpoint, max endpoint) as one comparable word."""
    a, b = min(u, v), max(u, v)
    n = graph.n
    key = (graph.weight(a, b) * n + a) * n + b
    if key >= _NONE:
        raise OverflowError("edge key does not fit in a word; lower the weight cap")
    return key


def decode_edge(graph, key):
    n = graph.n
    b = key % n
    a = (key // n) % n
    return a, b


def _components(n, part_of, edges):
    uf = UnionFind(n)
    groups: dict = {}
    for v, p in enumerate(part_of):
        groups.setdefault(p, []).append(v)
    for vs in groups.values():
        for v in vs[1:]:
            uf.union(vs[0], v)
    for u, v in edges:
        uf.union(u, v)
    return [uf.find(v) for v in range(n)]


def mst(graph, mode: str = "det", seed: int = 0, sim=None):
    """Boruvka phases, each two PA calls: the minimum outgoing edge key per
    fragment, then the minimum fragment id over each merged fragment.
    Returns (MSTState, report)."""
    own = sim is None
    sim = sim or Simulator(graph, seed=seed)
    mark = sim.mark()
    n = graph.n
    frag = list(range(n))
    marked = [set() for _ in range(n)]
    tree, _ = build_bfs_tree(graph, 0, sim=sim)
    history = [n]
    phase = 0
    while True:
        # learn the neighbours' fragment ids
        got = exchange(sim, {v: [(w, (frag[v],)) for w in graph.adj[v]] for v in range(n)},
                       range(n), "mst")
        nfrag = [{src: pl[0] for src, pl in got[v]} for v in range(n)]
        cand = []
        for v in range(n):
            best = _NONE
            for w, f in nfrag[v].items():
                if f != frag[v]:
                    best = min(best, encode_edge(graph, v, w))
            cand.append(best)
        if all(x == _NONE for x in cand):
            break
        phase += 1
        known = [(v, w) for v in range(n) for w in nfrag[v] if nfrag[v][w] == frag[v] and v < w]
        part = Partition(frag, known_edges=known)
        res = pa_pipeline(graph, part, cand, "min", mode, seed + phase, tree=tree, sim=sim)
        # the fragment's endpoint of its chosen edge marks it and tells the other side
        sends = {}
        for v in range(n):
            key = res.values[v]
            if key == _NONE:
                continue
            a, b = decode_edge(graph, key)
            if v in (a, b):
                w = b if v == a else a
                if frag[w] != frag[v]:
                    marked[v].add(w)
                    sends.setdefault(v, []).append((w, (1,)))
        got = exchange(sim, sends, range(n), "mst")
        for w, msgs in got.items():
            for src, _ in msgs:
                marked[w].add(src)
        # merged fragments take their smallest fragment id
        chosen = {(min(u, v), max(u, v)) for u in range(n) for v in marked[u]}
        comp = _components(n, frag, chosen)
        inside = [(u, v) for u, v in known] + sorted(chosen)
        inside = [(u, v) for u, v in inside if comp[u] == comp[v]]
        part = Partition(comp, known_edges=inside)
        res = pa_pipeline(graph, part, frag, "min", mode, seed + 1000 + phase, tree=tree, sim=sim)
        frag = list(res.values)
        history.append(len(set(frag)))
    state = MSTState(frag, marked, phase, history)
    return state, sim.report(mark if not own else None)


@dataclass
class ComponentLabels:
    label: list

    def write(self, path):
        with open(path, "w") as fh:
            for v, x in enumerate(self.label):
                fh.write(f"{v} {x}\n")


def component_labels(graph, h_edges, mode: str = "det", seed: int = 0, sim=None):
    """Label every node with the smallest id in its H-component, by PA over
    the partition into H-components.  Only H-edges are known to be inside a
    part; communication may use all of G."""
    own = sim is None
    sim = sim or Simulator(graph, seed=seed)
    mark = sim.mark()
    h = set()
    for u, v in h_edges:
        if not graph.has_edge(u, v):
            raise ValueError(f"{u}-{v} is not an edge of the graph")
        h.add((min(u, v), max(u, v)))
    comp = _components(graph.n, list(range(graph.n)), h)
    part = Partition(comp, known_edges=h)
    res = pa_pipeline(graph, part, list(range(graph.n)), "min", mode, seed, sim=sim)
    return ComponentLabels(list(res.values)), sim.report(mark if not own else None)

"""Graphs, rooted trees, partitions, generators, and the distributed BFS and
heavy-path programs that run on them."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .sim import NodeProgram, Simulator


class DisconnectedGraph(ValueError):
    pass


class InfeasiblePartCount(ValueError):
    pass


class NetworkGraph:
    """Simple connected undirected graph on nodes 0..n-1, optionally weighted."""

    def __init__(self, n: int, edges: Iterable[Sequence[int]], weights=None):
        if n < 1:
            raise ValueError("graph needs at least one node")
        self.n = n
        es = []
        seen = set()
        for e in edges:
            u, v = int(e[0]), int(e[1])
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge {u}-{v} out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"parallel edge {key}")
            seen.add(key)
            es.append(key)
        self.edges = sorted(es)
        self.weights = None
        if weights is not None:
            if isinstance(weights, dict):
                w = {(min(u, v), max(u, v)): int(x) for (u, v), x in weights.items()}
            else:
                w = {e: int(x) for e, x in zip([(min(a, b), max(a, b)) for a, b, *_ in edges], weights)}
            if set(w) != seen:
                raise ValueError("weights must cover exactly the edge set")
            if any(x < 1 for x in w.values()):
                raise ValueError("weights must be >= 1")
            self.weights = w
        adj = [[] for _ in range(n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        self.adj = [sorted(a) for a in adj]
        self._edge_set = seen

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def weighted(self) -> bool:
        return self.weights is not None

    def has_edge(self, u, v) -> bool:
        return (min(u, v), max(u, v)) in self._edge_set

    def weight(self, u, v) -> int:
        if self.weights is None:
            return 1
        return self.weights[(min(u, v), max(u, v))]

    def is_connected(self) -> bool:
        return len(bfs_distances(self, 0)) == self.n

    def __repr__(self):
        return f"NetworkGraph(n={self.n}, m={self.m}, weighted={self.weighted})"

    # -- file format: "n m [weighted]" then "u v [w]" -------------------------
    def dumps(self) -> str:
        head = f"{self.n} {self.m}" + (" weighted" if self.weighted else "")
        lines = [head]
        for u, v in self.edges:
            lines.append(f"{u} {v} {self.weights[(u, v)]}" if self.weighted else f"{u} {v}")
        return "\n".join(lines) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "NetworkGraph":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        head = rows[0]
        n, m = int(head[0]), int(head[1])
        weighted = len(head) > 2 and head[2] == "weighted"
        body = rows[1:]
        if len(body) != m:
            raise ValueError(f"header says {m} edges, found {len(body)}")
        edges = [(int(r[0]), int(r[1])) for r in body]
        weights = {(int(r[0]), int(r[1])): int(r[2]) for r in body} if weighted else None
        return cls(n, edges, weights)

    @classmethod
    def read(cls, path) -> "NetworkGraph":
        with open(path) as fh:
            return cls.loads(fh.read())


def bfs_distances(graph: NetworkGraph, src: int, allowed=None) -> dict:
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        for w in graph.adj[u]:
            if w not in dist and (allowed is None or w in allowed):
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


@dataclass
class RootedTree:
    root: int
    parent: list  # parent[root] is None
    depth: list
    children: list = field(default=None)

    def __post_init__(self):
        if self.children is None:
            ch = [[] for _ in self.parent]
            for v, p in enumerate(self.parent):
                if p is not None:
                    ch[p].append(v)
            self.children = [sorted(c) for c in ch]

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def depth_bound(self) -> int:
        """D_T, the maximum depth."""
        return max(self.depth)

    def edges(self) -> list:
        """Tree edges as (child, parent) pairs."""
        return [(v, p) for v, p in enumerate(self.parent) if p is not None]

    def edge_key(self, u, v):
        """Normalise a tree edge to its child endpoint; raises if not a tree edge."""
        if self.parent[u] == v:
            return u
        if self.parent[v] == u:
            return v
        raise ValueError(f"{u}-{v} is not a tree edge")

    def validate(self, graph: NetworkGraph):
        assert self.parent[self.root] is None and self.depth[self.root] == 0
        assert sum(p is not None for p in self.parent) == graph.n - 1
        for v, p in enumerate(self.parent):
            if p is not None:
                assert graph.has_edge(v, p)
                assert self.depth[v] == self.depth[p] + 1

    def subtree_sizes(self) -> list:
        order = sorted(range(self.n), key=lambda v: -self.depth[v])
        size = [1] * self.n
        for v in order:
            p = self.parent[v]
            if p is not None:
                size[p] += size[v]
        return size


class Partition:
    """Disjoint connected parts covering V.  ``part_of[v]`` is v's part label.

    ``known_edges`` optionally lists the edges a node can tell are inside its
    part; by default every edge between two nodes of one part counts.
    """

    def __init__(self, part_of: Sequence[int], leaders: dict | None = None, known_edges=None):
        self.part_of = [int(x) for x in part_of]
        parts: dict[int, list] = {}
        for v, p in enumerate(self.part_of):
            parts.setdefault(p, []).append(v)
        self.parts = dict(sorted(parts.items()))
        self.leaders = dict(leaders) if leaders else None
        self.known_edges = None
        if known_edges is not None:
            ke = set()
            for u, v in known_edges:
                if self.part_of[u] != self.part_of[v]:
                    raise ValueError(f"known edge {u}-{v} joins two parts")
                ke.add((min(u, v), max(u, v)))
            self.known_edges = ke

    def with_leaders(self, leaders: dict) -> "Partition":
        return Partition(self.part_of, leaders, self.known_edges)

    def part_nbrs(self, graph) -> list:
        """Per node, the neighbours it knows to share its part."""
        po = self.part_of
        if self.known_edges is None:
            return [[w for w in graph.adj[v] if po[w] == po[v]] for v in range(graph.n)]
        out = [[] for _ in range(graph.n)]
        for u, v in sorted(self.known_edges):
            out[u].append(v)
            out[v].append(u)
        return [sorted(x) for x in out]

    @property
    def n(self) -> int:
        return len(self.part_of)

    @property
    def N(self) -> int:
        return len(self.parts)

    def with_min_leaders(self) -> "Partition":
        return self.with_leaders({p: min(vs) for p, vs in self.parts.items()})

    def leader_of(self, v):
        return self.leaders[self.part_of[v]]

    def check_connected(self, graph: NetworkGraph) -> bool:
        if self.known_edges is not None:
            graph = NetworkGraph(graph.n, sorted(self.known_edges))
        for vs in self.parts.values():
            allowed = set(vs)
            if len(bfs_distances(graph, vs[0], allowed)) != len(vs):
                return False
        return True

    def dumps(self) -> str:
        return "".join(f"{v} {p}\n" for v, p in enumerate(self.part_of))

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Partition":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        mapping = {int(r[0]): int(r[1]) for r in rows}
        n = len(mapping)
        if sorted(mapping) != list(range(n)):
            raise ValueError("partition must list every node 0..n-1 once")
        return cls([mapping[v] for v in range(n)])

    @classmethod
    def read(cls, path) -> "Partition":
        with open(path) as fh:
            return cls.loads(fh.read())

    def __eq__(self, other):
        return isinstance(other, Partition) and self.part_of == other.part_of

    def __repr__(self):
        return f"Partition(n={self.n}, N={self.N})"


# ---------------------------------------------------------------------------
# centralized BFS tree (oracle side lives in oracle.py; this one is used by
# generators and as the canonical reference)
# ---------------------------------------------------------------------------

def bfs_tree_central(graph: NetworkGraph, root: int) -> RootedTree:
    dist = bfs_distances(graph, root)
    if len(dist) != graph.n:
        raise DisconnectedGraph(f"{graph.n - len(dist)} nodes unreachable from {root}")
    parent = [None] * graph.n
    for v in range(graph.n):
        if v != root:
            parent[v] = min(u for u in graph.adj[v] if dist[u] == dist[v] - 1)
    return RootedTree(root, parent, [dist[v] for v in range(graph.n)])


# ---------------------------------------------------------------------------
# distributed BFS
# ---------------------------------------------------------------------------

class _BFSFlood(NodeProgram):
    """On first contact, adopt the smallest-ID sender as parent and announce
    (depth, parent) to every neighbour."""

    def __init__(self, node, nbrs, is_root):
        super().__init__(node)
        self.nbrs = nbrs
        self.is_root = is_root
        self.depth = 0 if is_root else None
        self.parent = None
        self.children = []
        self.halted = not is_root

    def step(self, rnd, inbox):
        out = []
        if self.is_root and rnd == 1:
            out = [(w, (0, -1)) for w in self.nbrs]
        fresh = self.depth is None and inbox
        for env in inbox:
            d, par = env.payload
            if par == self.node:
                self.children.append(env.src)
            if fresh and self.parent is None:
                self.parent = env.src  # inbox is sorted by source
                self.depth = d + 1
        if fresh:
            out = [(w, (self.depth, self.parent)) for w in self.nbrs]
        self.halted = True
        return out


class _Convergecast(NodeProgram):
    """Single-tree convergecast of a word-tuple with a combining function,
    followed by a broadcast of the root's result.  Used for D_T discovery."""

    def __init__(self, node, parent, children, value, combine):
        super().__init__(node)
        self.parent = parent
        self.children = children
        self.acc = value
        self.combine = combine
        self.waiting = len(children)
        self.result = None
        self.sent_up = False

    def step(self, rnd, inbox):
        out = []
        for env in inbox:
            if env.payload[0] == 0:
                self.acc = self.combine(self.acc, env.payload[1:])
                self.waiting -= 1
            else:
                self.result = env.payload[1:]
                out += [(c, env.payload) for c in self.children]
        if not self.sent_up and self.waiting == 0:
            self.sent_up = True
            if self.parent is None:
                self.result = self.acc
                out += [(c, (1,) + tuple(self.acc)) for c in self.children]
            else:
                out.append((self.parent, (0,) + tuple(self.acc)))
        self.halted = self.sent_up
        return out


def build_bfs_tree(graph: NetworkGraph, root: int = 0, sim: Simulator | None = None):
    """Distributed BFS from ``root`` plus an echo that tells every node D_T.

    Returns ``(tree, report)``.  The flood uses exactly 2m messages; the echo
    adds 2(n-1).
    """
    if not graph.is_connected():
        raise DisconnectedGraph("graph is not connected")
    own = sim is None
    sim = sim or Simulator(graph)
    mark = sim.mark()
    progs = {v: _BFSFlood(v, graph.adj[v], v == root) for v in range(graph.n)}
    with sim.phase_scope("bfs"):
        sim.execute(progs)
    parent = [progs[v].parent for v in range(graph.n)]
    depth = [progs[v].depth for v in range(graph.n)]
    children = [sorted(progs[v].children) for v in range(graph.n)]
    echo = {
        v: _Convergecast(v, parent[v], children[v], (depth[v],), lambda a, b: (max(a[0], b[0]),))
        for v in range(graph.n)
    }
    with sim.phase_scope("bfs-echo"):
        sim.execute(echo)
    tree = RootedTree(root, parent, depth, children)
    tree.known_depth_bound = [echo[v].result[0] for v in range(graph.n)]
    return tree, sim.report(mark if not own else None)


# ---------------------------------------------------------------------------
# heavy path decomposition
# ---------------------------------------------------------------------------

@dataclass
class HeavyPathDecomposition:
    heavy: set  # child endpoints v whose edge (v, parent(v)) is heavy
    path_of: list  # node -> path id (the path's sink)
    paths: dict  # path id -> nodes ordered source (deepest) .. sink (highest)
    pos: list  # 1-based position from the source
    rank: dict  # path id -> wave index (1 = no light edges enter from below)

    def light_edges_on_root_paths(self, tree: RootedTree) -> int:
        """Maximum number of light edges on any root-to-leaf path."""
        best = 0
        cnt = [0] * tree.n
        order = sorted(range(tree.n), key=lambda v: tree.depth[v])
        for v in order:
            p = tree.parent[v]
            if p is not None:
                cnt[v] = cnt[p] + (0 if v in self.heavy else 1)
            best = max(best, cnt[v])
        return best


def _assemble_hpd(tree, heavy_child, pos, rank_down):
    heavy = {c for c in heavy_child if c is not None}
    path_of = [None] * tree.n
    paths = {}
    rank = {}
    for v in range(tree.n):
        if tree.parent[v] is None or v not in heavy:
            # v is a sink: walk down heavy children
            seq = [v]
            w = v
            while heavy_child[w] is not None:
                w = heavy_child[w]
                seq.append(w)
            seq.reverse()
            paths[v] = seq
            rank[v] = rank_down[v]
            for x in seq:
                path_of[x] = v
    return HeavyPathDecomposition(heavy, path_of, paths, list(pos), rank)


class _HPDProgram(NodeProgram):
    """Convergecast (subtree size, heavy-chain position, path rank) then a
    broadcast telling each child whether it is heavy along with the path's
    length and rank."""

    def __init__(self, node, parent, children):
        super().__init__(node)
        self.parent = parent
        self.children = children
        self.reports = {}
        self.heavy_child = None
        self.size = 1
        self.pos = 1
        self.val = 1
        self.L = None
        self.rank = None
        self.sent_up = False

    def _summarise(self):
        self.size = 1 + sum(r[0] for r in self.reports.values())
        for c in self.children:
            if 2 * self.reports[c][0] > self.size:
                self.heavy_child = c
        if self.heavy_child is not None:
            self.pos = self.reports[self.heavy_child][1] + 1
            self.val = self.reports[self.heavy_child][2]
        for c in self.children:
            if c != self.heavy_child:
                self.val = max(self.val, self.reports[c][2] + 1)

    def _down(self):
        out = []
        for c in self.children:
            if c == self.heavy_child:
                out.append((c, (1, self.L, self.rank)))
            else:
                out.append((c, (0, 0, 0)))
        return out

    def step(self, rnd, inbox):
        out = []
        for env in inbox:
            if env.src in self.children:
                self.reports[env.src] = env.payload
            else:
                is_heavy, L, rank = env.payload
                if is_heavy:
                    self.L, self.rank = L, rank
                else:
                    self.L, self.rank = self.pos, self.val
                out += self._down()
        if not self.sent_up and len(self.reports) == len(self.children):
            self.sent_up = True
            self._summarise()
            if self.parent is None:
                self.L, self.rank = self.pos, self.val
                out += self._down()
            else:
                out.append((self.parent, (self.size, self.pos, self.val)))
        self.halted = self.sent_up
        return out


def heavy_path_decomposition(tree: RootedTree, graph: NetworkGraph | None = None,
                             sim: Simulator | None = None):
    """Distributed heavy path decomposition.

    Returns ``(hpd, report)``; ``report`` is None when no graph is given, in
    which case the same program runs on the tree's own edge set.
    """
    if graph is None:
        graph = NetworkGraph(tree.n, tree.edges())
    own = sim is None
    sim = sim or Simulator(graph)
    mark = sim.mark()
    progs = {v: _HPDProgram(v, tree.parent[v], tree.children[v]) for v in range(tree.n)}
    with sim.phase_scope("heavy-path"):
        sim.execute(progs)
    heavy_child = [progs[v].heavy_child for v in range(tree.n)]
    pos = [progs[v].pos for v in range(tree.n)]
    rank_down = {v: progs[v].rank for v in range(tree.n)}
    hpd = _assemble_hpd(tree, heavy_child, pos, rank_down)
    hpd.path_len = [progs[v].L for v in range(tree.n)]
    hpd.node_rank = [progs[v].rank for v in range(tree.n)]
    return hpd, sim.report(mark if not own else None)


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def gen_grid_with_apex(D: int, w: int):
    """D rows by w columns, node r*w+c, plus an apex (id D*w) joined to the
    top row.  Each row is a part; the apex is a singleton part of its own."""
    if D < 1 or w < 1:
        raise ValueError("D and w must be >= 1")
    edges = []
    for r in range(D):
        for c in range(w):
            v = r * w + c
            if c + 1 < w:
                edges.append((v, v + 1))
            if r + 1 < D:
                edges.append((v, v + w))
    apex = D * w
    edges += [(apex, c) for c in range(w)]
    graph = NetworkGraph(D * w + 1, edges)
    part_of = [v // w for v in range(D * w)] + [D]
    return graph, Partition(part_of)


def gen_random_connected(n: int, p_extra: float = 0.05, seed: int = 0, weighted: bool = False,
                         max_weight: int | None = None) -> NetworkGraph:
    """Random spanning tree (random attachment over a shuffled order) plus
    each remaining pair independently with probability ``p_extra``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a, b = int(order[i]), int(order[j])
        edges.add((min(a, b), max(a, b)))
    if p_extra > 0 and n > 2:
        iu, ju = np.triu_indices(n, k=1)
        mask = rng.random(len(iu)) < p_extra
        for a, b in zip(iu[mask], ju[mask]):
            edges.add((int(a), int(b)))
    edges = sorted(edges)
    weights = None
    if weighted:
        cap = max_weight or max(1, min(n ** 3, 2**31))
        weights = {e: int(x) for e, x in zip(edges, rng.integers(1, cap + 1, size=len(edges)))}
    return NetworkGraph(n, edges, weights)


def gen_random_connected_partition(graph: NetworkGraph, parts: int, seed: int = 0) -> Partition:
    """Grow ``parts`` connected parts from random seeds by seeded multi-source
    flooding; every node joins the part of a neighbour that reached it first."""
    if parts > graph.n:
        raise InfeasiblePartCount(f"{parts} parts > {graph.n} nodes")
    if parts < 1:
        raise InfeasiblePartCount("need at least one part")
    rng = np.random.default_rng(seed)
    seeds = [int(x) for x in rng.choice(graph.n, size=parts, replace=False)]
    part_of = [-1] * graph.n
    frontier = []
    for i, s in enumerate(seeds):
        part_of[s] = i
        frontier.append(s)
    while frontier:
        rng.shuffle(frontier)
        nxt = []
        for u in frontier:
            cand = [w for w in graph.adj[u] if part_of[w] < 0]
            for w in cand:
                if part_of[w] < 0:
                    part_of[w] = part_of[u]
                    nxt.append(w)
        frontier = nxt
    return Partition(part_of)


def gen_path(n: int) -> NetworkGraph:
    return NetworkGraph(n, [(i, i + 1) for i in range(n - 1)])


def gen_ring(n: int) -> NetworkGraph:
    if n < 3:
        return gen_path(n)
    return NetworkGraph(n, [(i, (i + 1) % n) for i in range(n)])


def gen_random_tree(n: int, seed: int = 0) -> NetworkGraph:
    return gen_random_connected(n, 0.0, seed)


def ceil_log2(x: int) -> int:
    return max(0, math.ceil(math.log2(x))) if x > 1 else 0

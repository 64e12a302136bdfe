"""Centralized reference implementations.

Nothing here touches the simulator or the distributed code paths.  Shared
imports are limited to the plain graph containers.
"""
from __future__ import annotations

import heapq
import math
from collections import deque

WORD = (1 << 64) - 1


def fold(op: str, items):
    """Fold (node, value) pairs under a named operator."""
    items = sorted(items)
    vals = [v & WORD for _, v in items]
    if op == "min":
        return min(vals)
    if op == "max":
        return max(vals)
    if op == "sum":
        return sum(vals) % (1 << 64)
    if op == "or":
        out = 0
        for x in vals:
            out |= x
        return out
    if op == "and":
        out = WORD
        for x in vals:
            out &= x
        return out
    if op == "first":
        return vals[0]
    raise ValueError(op)


def oracle_pa(part_of, values, op: str) -> dict:
    """Per-part aggregate keyed by part label."""
    groups: dict = {}
    for v, p in enumerate(part_of):
        groups.setdefault(p, []).append((v, values[v]))
    return {p: fold(op, items) for p, items in groups.items()}


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if ra > rb:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True


def edge_order_key(graph, e):
    u, v = min(e), max(e)
    return (graph.weight(u, v), u, v)


def oracle_mst(graph) -> set:
    """Kruskal over the (weight, min endpoint, max endpoint) order."""
    uf = UnionFind(graph.n)
    out = set()
    for u, v in sorted(graph.edges, key=lambda e: edge_order_key(graph, e)):
        if uf.union(u, v):
            out.add((u, v))
    return out


def oracle_mst_prim(graph) -> set:
    """Prim from node 0 under the same order; the cut rule picks each edge."""
    seen = [False] * graph.n
    seen[0] = True
    heap = [(edge_order_key(graph, (0, w)), 0, w) for w in graph.adj[0]]
    heapq.heapify(heap)
    out = set()
    while heap:
        _, a, b = heapq.heappop(heap)
        if seen[b]:
            continue
        seen[b] = True
        out.add((min(a, b), max(a, b)))
        for w in graph.adj[b]:
            if not seen[w]:
                heapq.heappush(heap, (edge_order_key(graph, (b, w)), b, w))
    return out


def mst_weight(graph, edges) -> int:
    return sum(graph.weight(u, v) for u, v in edges)


def oracle_bfs(graph, root):
    """Depths and min-ID parents by a plain queue BFS."""
    depth = [None] * graph.n
    depth[root] = 0
    q = deque([root])
    while q:
        u = q.popleft()
        for w in graph.adj[u]:
            if depth[w] is None:
                depth[w] = depth[u] + 1
                q.append(w)
    parent = [None] * graph.n
    for v in range(graph.n):
        if v != root:
            parent[v] = min(u for u in graph.adj[v] if depth[u] == depth[v] - 1)
    return parent, depth


def oracle_heavy_edges(parent) -> set:
    """Child endpoints of heavy edges, by explicit descendant counting."""
    n = len(parent)
    children = [[] for _ in range(n)]
    for v, p in enumerate(parent):
        if p is not None:
            children[p].append(v)

    def count(v):
        total = 0
        stack = [v]
        while stack:
            x = stack.pop()
            total += 1
            stack.extend(children[x])
        return total

    size = [count(v) for v in range(n)]
    return {v for v, p in enumerate(parent) if p is not None and size[v] > size[p] / 2}


def oracle_path_shortcut(L: int, S: dict, c: int):
    """Sequential run of the doubling path algorithm on positions 1..L.

    Returns (S_f, broken) where ``broken`` holds positions whose parent edge
    was broken.  The top node applies the same size test after the last
    iteration, and a transmission's target is clamped to the top node.
    """
    cur = {v: set(S.get(v, ())) for v in range(1, L + 1)}
    broken = set()
    iters = max(1, math.ceil(math.log2(L))) if L > 1 else 0
    for i in range(iters):
        step = 1 << i
        moves = []
        for v in range(1, L):
            if v % (step << 1) != step:
                continue
            if len(cur[v]) >= 2 * c:
                broken.add(v)
                cur[v] = set()
                continue
            u = min(v + step, L)
            if any(w in broken for w in range(v + 1, u)):
                continue
            moves.append((v, u))
        for v, u in moves:
            cur[u] |= cur[v]
    if len(cur[L]) >= 2 * c:
        broken.add(L)
        cur[L] = set()
    return cur, broken


def oracle_congestion(tree_parent, H: dict) -> dict:
    """Per tree edge (child endpoint) -> number of parts using it."""
    load: dict = {}
    for part, edges in H.items():
        for child in set(edges):
            load[child] = load.get(child, 0) + 1
    return load


def oracle_blocks(tree_parent, part_nodes, H_edges) -> list:
    """Components of (P ∪ V(H), H) as sorted node lists, by union-find.

    ``H_edges`` holds child endpoints (edge child-parent)."""
    nodes = set(part_nodes)
    for ch in H_edges:
        nodes.add(ch)
        nodes.add(tree_parent[ch])
    idx = {v: i for i, v in enumerate(sorted(nodes))}
    uf = UnionFind(len(idx))
    for ch in H_edges:
        uf.union(idx[ch], idx[tree_parent[ch]])
    groups: dict = {}
    for v, i in idx.items():
        groups.setdefault(uf.find(i), []).append(v)
    return sorted(sorted(g) for g in groups.values())


def oracle_rep_block_count(tree_parent, part_nodes, H_edges, reps) -> int:
    """Number of blocks holding at least one representative."""
    blocks = oracle_blocks(tree_parent, part_nodes, H_edges)
    reps = set(reps)
    return sum(1 for b in blocks if reps.intersection(b))


def oracle_component_labels(n, h_edges) -> list:
    uf = UnionFind(n)
    for u, v in h_edges:
        uf.union(u, v)
    return [uf.find(v) for v in range(n)]


def oracle_distances_to_set(graph, sources) -> list:
    dist = [None] * graph.n
    q = deque()
    for s in sources:
        dist[s] = 0
        q.append(s)
    while q:
        u = q.popleft()
        for w in graph.adj[u]:
            if dist[w] is None:
                dist[w] = dist[u] + 1
                q.append(w)
    return dist


def tree_diameter(nodes, parent_of) -> int:
    """Diameter (in edges) of the tree on ``nodes`` given child->parent links."""
    nodes = list(nodes)
    if len(nodes) <= 1:
        return 0
    adj = {v: [] for v in nodes}
    for v in nodes:
        p = parent_of[v]
        if p is not None and p >= 0:
            adj[v].append(p)
            adj[p].append(v)

    def far(src):
        dist = {src: 0}
        q = deque([src])
        while q:
            u = q.popleft()
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    q.append(w)
        if len(dist) != len(nodes):
            raise ValueError("not a spanning tree of the node set")
        end = max(dist, key=lambda x: (dist[x], -x))
        return end, dist[end]

    a, _ = far(nodes[0])
    _, d = far(a)
    return d

"""Small builders shared by the test modules."""
import random
from collections import deque

from congestpa.graphs import build_bfs_tree, gen_random_connected, gen_random_connected_partition
from congestpa.shortcuts import TreeRestrictedShortcut
from congestpa.subparts import SubPartDivision

# acceptance lines, printed in the terminal summary by conftest
ACCEPTANCE: list = []


def division_from_groups(graph, partition, groups, depth_bound):
    """A division whose sub-parts are the given connected node groups,
    each spanned by a BFS tree from its smallest node."""
    rows = []
    for grp in groups:
        grp = set(grp)
        rep = min(grp)
        seen = {rep: -1}
        q = deque([rep])
        while q:
            u = q.popleft()
            for w in graph.adj[u]:
                if w in grp and w not in seen:
                    seen[w] = u
                    q.append(w)
        assert len(seen) == len(grp), "group must be connected"
        rows += [f"{v} {rep} {rep} {p}" for v, p in seen.items()]
    return SubPartDivision.loads("\n".join(rows), partition, depth_bound)


def crafted_verify_instance(seed, n_lo=30, n_hi=70, parts=5):
    """Random graph, 5 parts cut into random connected chunks, random H."""
    rng = random.Random(seed)
    g = gen_random_connected(rng.randrange(n_lo, n_hi), 0.06, seed=seed)
    part = gen_random_connected_partition(g, parts, seed=seed).with_min_leaders()
    tree, _ = build_bfs_tree(g, 0)
    # sub-parts: random connected chunks of each part
    groups = []
    for vs in part.parts.values():
        left = set(vs)
        while left:
            start = min(left)
            grp, frontier = {start}, [start]
            cap = rng.randrange(1, 6)
            while frontier and len(grp) < cap:
                u = frontier.pop(rng.randrange(len(frontier)))
                for w in g.adj[u]:
                    if w in left and w not in grp and len(grp) < cap:
                        grp.add(w)
                        frontier.append(w)
            groups.append(grp)
            left -= grp
    div = division_from_groups(g, part, groups, tree.depth_bound)
    tedges = [v for v in range(g.n) if tree.parent[v] is not None]
    H = {p: {e for e in tedges if rng.random() < 0.35} for p in part.parts}
    return g, part, tree, div, TreeRestrictedShortcut(tree, part, H)

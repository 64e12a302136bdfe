"""Symmetry breaking and sub-part divisions.

Cole-Vishkin 3-colouring, star joinings (coin-flip and deterministic),
cluster merging by repeated star joinings, the two sub-part division
algorithms, and k-dominating sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .casting import TreeAggregator, exchange
from .graphs import NetworkGraph, Partition
from .ops import get_op
from .sim import WORD_BITS, NodeProgram, Simulator

C_P = 4     # sampling constant for random representatives
C_IT = 3    # merge iterations per log2 n
C_DIV = 8   # sub-part count constant
C_CV = 6    # slack on Cole-Vishkin reduction rounds

_OR = get_op("or")
_SUM = get_op("sum")
_MIN = get_op("min")
_NONE = (1 << 64) - 1


class OutDegreeViolation(ValueError):
    pass


class CoverageFailure(RuntimeError):
    pass


class Stalled(RuntimeError):
    pass


class CoarseningIncomplete(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Cole-Vishkin
# ---------------------------------------------------------------------------

def cv_reduction_rounds(bits: int = WORD_BITS) -> int:
    """Reduction rounds needed to bring colours below 2**bits down to {0..5}."""
    bound = (1 << bits) - 1
    rounds = 0
    while bound > 5:
        bound = 2 * (bound.bit_length() - 1) + 1
        rounds += 1
    return rounds


def log_star(x: float) -> int:
    k = 0
    while x > 1:
        x = math.log2(x)
        k += 1
    return k


def cv_reduce(c: int, succ_c: int | None) -> int:
    """New colour: twice the lowest bit index where c differs from its
    successor's colour, plus c's bit there.  Roots use index 0."""
    if succ_c is None:
        i = 0
    else:
        x = c ^ succ_c
        i = (x & -x).bit_length() - 1
    return 2 * i + ((c >> i) & 1)


def cv_shift(c: int, succ_c: int | None) -> int:
    if succ_c is not None:
        return succ_c
    return min({0, 1, 2} - {c})


def cv_recolor(c: int, x: int, succ_c: int | None, prev_c: int) -> int:
    if c != x:
        return c
    return min({0, 1, 2} - {succ_c, prev_c})


def cv_schedule(bits: int = WORD_BITS):
    """Sequence of steps ("reduce", None) / ("shift", x) / ("recolor", x)."""
    steps = [("reduce", None)] * cv_reduction_rounds(bits)
    for x in (5, 4, 3):
        steps += [("shift", x), ("recolor", x)]
    return steps


def cv_apply(step, c, succ_c, prev_c):
    kind, x = step
    if kind == "reduce":
        return cv_reduce(c, succ_c)
    if kind == "shift":
        return cv_shift(c, succ_c)
    return cv_recolor(c, x, succ_c, prev_c)


class _CVProgram(NodeProgram):
    def __init__(self, node, succ, color, steps):
        super().__init__(node)
        self.succ = succ
        self.color = color
        self.prev = color
        self.steps = steps
        self.preds = []

    def step(self, rnd, inbox):
        if rnd == 1:
            return [(self.succ, (0,))] if self.succ is not None else []
        if rnd == 2:
            self.preds = sorted(e.src for e in inbox)
        else:
            j = rnd - 3
            succ_c = inbox[0].payload[0] if inbox else None
            before = self.color
            self.color = cv_apply(self.steps[j], self.color, succ_c, self.prev)
            self.prev = before
            if j + 1 == len(self.steps):
                self.halted = True
                return []
        return [(p, (self.color,)) for p in self.preds]


def cole_vishkin_3color(succ: dict, ids: dict | None = None, bits: int = WORD_BITS):
    """3-colour an orientation with out-degree at most one.

    ``succ`` maps every node label to its successor label or None; a list of
    arcs (u, v) is accepted too.  Initial colours are ``ids`` (default: the
    labels).  Returns (colours, report, reduction_rounds).
    """
    if not isinstance(succ, dict):
        arcs = list(succ)
        d: dict = {}
        for u, v in arcs:
            if u in d and d[u] is not None:
                raise OutDegreeViolation(f"node {u} has two out-arcs")
            d[u] = v
            d.setdefault(v, None)
        succ = d
    labels = sorted(succ)
    idx = {x: i for i, x in enumerate(labels)}
    edges = set()
    for u, v in succ.items():
        if v is None:
            continue
        if v == u or v not in idx:
            raise OutDegreeViolation(f"bad arc {u}->{v}")
        a, b = idx[u], idx[v]
        edges.add((min(a, b), max(a, b)))
    ids = ids or {x: x for x in labels}
    if len(set(ids.values())) != len(ids):
        raise ValueError("initial colours must be distinct")
    graph = NetworkGraph(len(labels), sorted(edges))
    steps = cv_schedule(bits)
    progs = {
        idx[x]: _CVProgram(idx[x], None if succ[x] is None else idx[succ[x]], ids[x], steps)
        for x in labels
    }
    sim = Simulator(graph)
    with sim.phase_scope("cole-vishkin"):
        sim.execute(progs)
    colors = {x: progs[idx[x]].color for x in labels}
    return colors, sim.report(), cv_reduction_rounds(bits)


# ---------------------------------------------------------------------------
# star joinings over clusters
# ---------------------------------------------------------------------------

@dataclass
class StarJoining:
    designation: dict  # cluster id -> "receiver" | "joiner" | "untouched"
    edge: dict  # joiner cluster id -> (u, x) with u inside, x in a receiver
    participants: int = 0

    @property
    def joiners(self) -> int:
        return sum(1 for d in self.designation.values() if d == "joiner")

    @property
    def merged_fraction(self) -> float:
        return self.joiners / self.participants if self.participants else 0.0

    def validate(self, cluster_of):
        for cid, (u, x) in self.edge.items():
            assert self.designation[cid] == "joiner"
            assert cluster_of[u] == cid
            assert self.designation[cluster_of[x]] == "receiver"


class _Clusters:
    """What a star joining sees: each node's cluster id, the exit edge its
    cluster chose (known to every member), and a PA solver over clusters."""

    def __init__(self, graph, cluster, exit_edge, solver, nodes):
        self.graph = graph
        self.cluster = cluster
        self.exit = exit_edge
        self.solver = solver
        self.nodes = nodes

    def ends(self, nodes):
        """Nodes u that own their cluster's exit edge (u, x)."""
        return [u for u in nodes if self.exit.get(u) is not None and self.exit[u][0] == u]

    def query(self, sim, nodes, answer, phase="star-join"):
        """Each exit-edge owner asks across its edge; returns {u: reply word}."""
        asks = {u: [(self.exit[u][1], (0,))] for u in self.ends(nodes)}
        targets = {x for u in asks for x, _ in asks[u]}
        got = exchange(sim, asks, set(asks) | targets, phase)
        replies = {x: [(src, (answer(x),)) for src, _ in got[x]] for x in targets if got[x]}
        back = exchange(sim, replies, set(replies) | set(asks), phase)
        return {u: back[u][0][1][0] for u in asks if back.get(u)}

    def spread(self, sim, nodes, contrib: dict, op=_OR):
        values = {v: contrib.get(v, 0) for v in nodes}
        return self.solver.solve(sim, values, op, nodes)


def _star_join_det(sim, cl: _Clusters, nodes) -> StarJoining:
    cid = cl.cluster
    # stage 1: in-degree >= 2 makes a receiver; parts pointing at one join it
    owners = cl.ends(nodes)
    got = exchange(sim, {u: [(cl.exit[u][1], (1,))] for u in owners},
                   set(nodes) | {cl.exit[u][1] for u in owners}, "star-join")
    indeg = cl.spread(sim, nodes, {v: len(got[v]) for v in nodes}, _SUM)
    desig = {v: ("R" if indeg[v] >= 2 else None) for v in nodes}
    rep = cl.query(sim, nodes, lambda x: 1 if desig.get(x) == "R" else 0)
    t_r = cl.spread(sim, nodes, rep)
    for v in nodes:
        if desig[v] is None and t_r[v]:
            desig[v] = "J"
    # stage 2: Cole-Vishkin on what is left (paths and cycles)
    rest = [v for v in nodes if desig[v] is None]
    rep = cl.query(sim, rest, lambda x: 1 if desig.get(x, "X") is None else 0)
    succ_in = cl.spread(sim, rest, rep)
    color = {v: cid[v] for v in rest}
    prev = dict(color)
    for step in cv_schedule():
        rep = cl.query(sim, [v for v in rest if succ_in[v]], lambda x: color[x])
        sc = cl.spread(sim, rest, rep)
        for v in rest:
            before = color[v]
            color[v] = cv_apply(step, color[v], sc[v] if succ_in[v] else None, prev[v])
            prev[v] = before
    for k in (0, 1, 2):
        live = [v for v in rest if desig[v] is None]
        rep = cl.query(sim, [v for v in live if succ_in[v] and color[v] == k],
                       lambda x: 1 if x in desig and desig[x] is None else 0)
        go = cl.spread(sim, live, rep)
        joiners = [v for v in live if go[v] and color[v] == k and succ_in[v]]
        for v in joiners:
            desig[v] = "J"
        owners = cl.ends(joiners)
        got = exchange(sim, {u: [(cl.exit[u][1], (1,))] for u in owners},
                       set(live) | {cl.exit[u][1] for u in owners}, "star-join")
        live2 = [v for v in live if desig[v] is None]
        hit = cl.spread(sim, live2, {v: 1 for v in live2 if got.get(v)})
        for v in live2:
            if hit[v]:
                desig[v] = "R"
    return _collect(cl, nodes, desig)


def _collect(cl, nodes, desig):
    names = {"R": "receiver", "J": "joiner", None: "untouched"}
    designation, edge = {}, {}
    for v in nodes:
        c = cl.cluster[v]
        designation[c] = names[desig[v]]
        if desig[v] == "J":
            edge[c] = cl.exit[v]
    return StarJoining(designation, edge, participants=len(designation))


def _star_join_rand(sim, cl: _Clusters, nodes, salt) -> StarJoining:
    cid = cl.cluster
    coins = {}
    for v in nodes:
        if cid[v] == v:
            coins[v] = int(sim.rng(v, salt).integers(0, 2))
    heads = cl.spread(sim, nodes, coins)
    rep = cl.query(sim, nodes, lambda x: heads.get(x, 0))
    t_heads = cl.spread(sim, nodes, rep)
    desig = {}
    for v in nodes:
        if heads[v]:
            desig[v] = "R"
        elif t_heads[v]:
            desig[v] = "J"
        else:
            desig[v] = None
    return _collect(cl, nodes, desig)


def _default_solver(sim, graph, partition):
    """Aggregation over each part's BFS tree from its leader."""
    leaders = partition.leaders or {p: min(vs) for p, vs in partition.parts.items()}
    roots = {leaders[p]: leaders[p] for p in partition.parts}
    par, ch, _, lab = part_bfs_forest(sim, graph, partition.part_of, roots,
                                      nbrs=partition.part_nbrs(graph))
    return TreeAggregator(lab, par, ch)


def _prepare(graph, partition, exit_edges):
    leaders = partition.leaders or {p: min(vs) for p, vs in partition.parts.items()}
    cluster = {v: leaders[partition.part_of[v]] for v in range(graph.n)}
    exit_of = {}
    for v in range(graph.n):
        e = exit_edges.get(partition.part_of[v])
        exit_of[v] = tuple(e) if e is not None else None
    for p, e in exit_edges.items():
        if e is None:
            continue
        u, x = e
        if partition.part_of[u] != p or partition.part_of[x] == p or not graph.has_edge(u, x):
            raise ValueError(f"part {p}: {e} is not an exiting edge")
    return cluster, exit_of


def star_joining_det(graph, partition, exit_edges: dict, solver=None, sim=None):
    """Deterministic star joining of the parts of ``partition``.

    ``exit_edges`` maps part label -> (u, x), u inside the part.  ``solver``
    is any object with ``solve(sim, values, op, nodes)`` solving PA over the
    parts (default: BFS trees from each leader).  Returns
    (StarJoining keyed by leader id, report).
    """
    own = sim is None
    sim = sim or Simulator(graph)
    mark = sim.mark()
    solver = solver or _default_solver(sim, graph, partition)
    cluster, exit_of = _prepare(graph, partition, exit_edges)
    nodes = [v for v in range(graph.n) if exit_of[v] is not None]
    sj = _star_join_det(sim, _Clusters(graph, cluster, exit_of, solver, nodes), nodes)
    return sj, sim.report(mark if not own else None)


def star_joining_random(graph, partition, exit_edges: dict, solver=None, seed: int = 0, sim=None):
    """Coin-flip star joining: heads receive, tails pointing at heads join."""
    own = sim is None
    sim = sim or Simulator(graph, seed=seed)
    mark = sim.mark()
    solver = solver or _default_solver(sim, graph, partition)
    cluster, exit_of = _prepare(graph, partition, exit_edges)
    nodes = [v for v in range(graph.n) if exit_of[v] is not None]
    sj = _star_join_rand(sim, _Clusters(graph, cluster, exit_of, solver, nodes), nodes, salt=1)
    return sj, sim.report(mark if not own else None)


# ---------------------------------------------------------------------------
# part-restricted BFS forests (used for small parts and random claiming)
# ---------------------------------------------------------------------------

class _ClaimFlood(NodeProgram):
    """Multi-source flood restricted to the node's part.  A node adopts the
    smallest (label, sender) pair heard in its first round with any message,
    then announces (label, depth, parent) to its part neighbours once."""

    def __init__(self, node, nbrs, label, max_depth):
        super().__init__(node)
        self.nbrs = nbrs
        self.label = label
        self.depth = 0 if label is not None else None
        self.parent = None
        self.children = []
        self.max_depth = max_depth
        self.halted = label is None

    def step(self, rnd, inbox):
        fresh = False
        if rnd == 1 and self.depth == 0:
            fresh = True
        best = None
        for env in inbox:
            lab, d, par = env.payload
            if par == self.node:
                self.children.append(env.src)
            if self.depth is None and d < self.max_depth:
                cand = (lab, env.src, d)
                if best is None or cand < best:
                    best = cand
        if best is not None:
            self.label, self.parent, self.depth = best[0], best[1], best[2] + 1
            fresh = True
        self.halted = True
        if fresh:
            par = -1 if self.parent is None else self.parent
            return [(w, (self.label, self.depth, par)) for w in self.nbrs]
        return []


def _same_part(graph, part_of):
    return [[w for w in graph.adj[v] if part_of[w] == part_of[v]] for v in range(graph.n)]


def part_bfs_forest(sim, graph, part_of, roots: dict, max_depth: int | None = None, nodes=None,
                    phase="part-bfs", nbrs=None):
    """Flood from ``roots`` (node -> label) inside parts.  Returns
    (parent, children, depth, label) lists; unreached nodes keep None."""
    n = graph.n
    nodes = range(n) if nodes is None else nodes
    md = max_depth if max_depth is not None else n + 1
    nbrs = nbrs if nbrs is not None else _same_part(graph, part_of)
    progs = {}
    for v in nodes:
        progs[v] = _ClaimFlood(v, nbrs[v], roots.get(v), md)
    with sim.phase_scope(phase):
        sim.execute(progs)
    parent = [None] * n
    children = [[] for _ in range(n)]
    depth = [None] * n
    label = [None] * n
    for v, p in progs.items():
        parent[v] = p.parent
        children[v] = sorted(p.children)
        depth[v] = p.depth
        label[v] = p.label
    return parent, children, depth, label


# ---------------------------------------------------------------------------
# sub-part divisions
# ---------------------------------------------------------------------------

@dataclass
class SubPartDivision:
    part_of: list
    sub: list  # node -> sub-part id (= its representative's id)
    parent: list  # node -> sub-part tree parent, None at the representative
    children: list
    size: list  # node -> size of its sub-part
    small: list  # node -> part handled without shortcuts (single sub-part, < D_T nodes)
    depth_bound: int
    retries: int = 0
    nbr_sub: list = field(default=None)  # node -> {same-part neighbour: its sub-part}

    @property
    def reps(self) -> set:
        return {v for v, s in enumerate(self.sub) if s == v}

    def rep(self, v):
        return self.sub[v]

    def members(self) -> dict:
        out: dict = {}
        for v, s in enumerate(self.sub):
            out.setdefault(s, []).append(v)
        return out

    def counts(self) -> dict:
        """Part label -> number of sub-parts."""
        out: dict = {}
        for r in self.reps:
            p = self.part_of[r]
            out[p] = out.get(p, 0) + 1
        return out

    def validate(self, graph):
        from .oracle import tree_diameter
        for s, vs in self.members().items():
            assert self.sub[s] == s, "representative lies in its sub-part"
            parts = {self.part_of[v] for v in vs}
            assert len(parts) == 1
            for v in vs:
                p = self.parent[v]
                assert (p is None) == (v == s)
                if p is not None:
                    assert graph.has_edge(v, p) and self.sub[p] == s
            tree_diameter(vs, self.parent)
        return True

    def learn_neighbours(self, sim, graph, nbrs=None):
        """One exchange of sub-part ids with same-part neighbours; a division
        read from a file lacks this knowledge until it runs."""
        nbrs = nbrs if nbrs is not None else _same_part(graph, self.part_of)
        sends = {v: [(w, (self.sub[v],)) for w in nbrs[v]] for v in range(graph.n)}
        got = exchange(sim, sends, range(graph.n), "division")
        self.nbr_sub = [{src: pl[0] for src, pl in got[v]} for v in range(graph.n)]
        return self

    def diameters(self) -> dict:
        from .oracle import tree_diameter
        return {s: tree_diameter(vs, self.parent) for s, vs in self.members().items()}

    def dumps(self) -> str:
        return "".join(
            f"{v} {self.sub[v]} {self.sub[v]} {-1 if self.parent[v] is None else self.parent[v]}\n"
            for v in range(len(self.sub))
        )

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text, partition: Partition, depth_bound: int) -> "SubPartDivision":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        n = partition.n
        sub = [None] * n
        parent = [None] * n
        for r in rows:
            v, s, rep, par = (int(x) for x in r)
            if s != rep:
                raise ValueError("sub-part id must equal its representative id")
            sub[v] = s
            parent[v] = None if par < 0 else par
        children = [[] for _ in range(n)]
        for v, p in enumerate(parent):
            if p is not None:
                children[p].append(v)
        return _finish_static(partition.part_of, sub, parent, children, depth_bound)

    @classmethod
    def read(cls, path, partition, depth_bound):
        with open(path) as fh:
            return cls.loads(fh.read(), partition, depth_bound)


def _finish_static(part_of, sub, parent, children, depth_bound, retries=0, small=None):
    """Fill sizes and small flags without simulation; neighbour sub-part ids
    are learned on first use via learn_neighbours."""
    n = len(sub)
    sizes: dict = {}
    for s in sub:
        sizes[s] = sizes.get(s, 0) + 1
    if small is None:
        per_part: dict = {}
        for v in range(n):
            per_part.setdefault(part_of[v], set()).add(sub[v])
        psize: dict = {}
        for v in range(n):
            psize[part_of[v]] = psize.get(part_of[v], 0) + 1
        small = [len(per_part[part_of[v]]) == 1 and psize[part_of[v]] < depth_bound for v in range(n)]
    return SubPartDivision(list(part_of), list(sub), list(parent), [sorted(c) for c in children],
                           [sizes[sub[v]] for v in range(n)], list(small), depth_bound, retries)


def _finalize_division(sim, graph, part_of, sub, parent, children, depth_bound, small, retries=0,
                       nbrs=None):
    """Sub-part sizes by aggregation on the sub-part trees, then one exchange
    of sub-part ids with same-part neighbours."""
    agg = TreeAggregator(sub, parent, children, phase="division")
    size = agg.solve(sim, {v: 1 for v in range(graph.n)}, _SUM)
    nbrs = nbrs if nbrs is not None else _same_part(graph, part_of)
    sends = {v: [(w, (sub[v],)) for w in nbrs[v]] for v in range(graph.n)}
    got = exchange(sim, sends, range(graph.n), "division")
    nbr_sub = [{src: pl[0] for src, pl in got[v]} for v in range(graph.n)]
    return SubPartDivision(list(part_of), list(sub), list(parent), [sorted(c) for c in children],
                           [size[v] for v in range(graph.n)], list(small), depth_bound, retries, nbr_sub)


class ClusterState:
    """Per-node cluster bookkeeping for repeated star-joining merges."""

    def __init__(self, n):
        self.cid = list(range(n))
        self.parent = [None] * n
        self.children = [[] for _ in range(n)]
        self.tree_nbrs = [set() for _ in range(n)]
        self.size = [1] * n


class _Reroot(NodeProgram):
    """Flood the new cluster id through a joining cluster's old tree, making
    the flood's arrival edges the new parent pointers."""

    def __init__(self, node, tree_nbrs, start_parent=None, new_cid=None):
        super().__init__(node)
        self.tree_nbrs = tree_nbrs
        self.new_cid = new_cid
        self.parent = start_parent
        self.children = None
        self.start = start_parent is not None
        self.halted = not self.start

    def step(self, rnd, inbox):
        self.halted = True
        if self.start and rnd == 1:
            self.children = sorted(self.tree_nbrs)
            return [(w, (self.new_cid,)) for w in self.children]
        if inbox and self.children is None:
            src = inbox[0].src
            self.new_cid = inbox[0].payload[0]
            self.parent = src
            self.children = sorted(self.tree_nbrs - {src})
            return [(w, (self.new_cid,)) for w in self.children]
        return []


def _pack_edge(pref, u, x):
    return (pref << 42) | (u << 21) | x


def _unpack_edge(key):
    return (key >> 42) & 1, (key >> 21) & ((1 << 21) - 1), key & ((1 << 21) - 1)


def merge_clusters(sim, graph, part_of, threshold, mode="det", max_iters=None,
                   on_stall=Stalled, salt=7, nbrs=None):
    """Grow clusters inside parts by repeated star joinings.

    Clusters with at least ``threshold`` nodes become complete and stop
    initiating merges, but still accept joiners.  Returns (state, complete,
    iterations).  Raises ``on_stall`` if incomplete clusters with an exit edge
    remain after the iteration cap.
    """
    n = graph.n
    nbrs = nbrs if nbrs is not None else _same_part(graph, part_of)
    st = ClusterState(n)
    complete = [1 >= threshold] * n
    iters = max_iters if max_iters is not None else C_IT * max(1, math.ceil(math.log2(max(n, 2))))
    used = 0
    for it in range(iters):
        # neighbours learn each other's cluster id and completeness
        sends = {v: [(w, (st.cid[v], int(complete[v]))) for w in nbrs[v]] for v in range(n)}
        got = exchange(sim, sends, range(n), "cluster-merge")
        cand = {}
        for v in range(n):
            if complete[v]:
                continue
            best = _NONE
            for src, (c, comp) in got[v]:
                if c != st.cid[v]:
                    best = min(best, _pack_edge(comp, v, src))
            cand[v] = best
        active = [v for v in range(n) if not complete[v]]
        agg = TreeAggregator(st.cid, st.parent, st.children, phase="cluster-merge")
        choice = agg.solve(sim, cand, _MIN, active)
        live = [v for v in active if choice[v] != _NONE]
        if not live:
            break
        used = it + 1
        exit_of = {}
        into_complete = []
        for v in live:
            pref, u, x = _unpack_edge(choice[v])
            exit_of[v] = (u, x)
            if pref:
                into_complete.append(v)
        sj_nodes = [v for v in live if not _unpack_edge(choice[v])[0]]
        cl = _Clusters(graph, st.cid, exit_of, agg, sj_nodes)
        if mode == "det":
            sj = _star_join_det(sim, cl, sj_nodes)
        else:
            sj = _star_join_rand(sim, cl, sj_nodes, salt=salt * 1000 + it)
        joiners = {st.cid[v] for v in into_complete}
        joiners |= {c for c, d in sj.designation.items() if d == "joiner"}
        # the owner u of each joiner's edge hooks onto x and re-roots its cluster
        owners = [v for v in live if st.cid[v] in joiners and exit_of[v][0] == v]
        hook = exchange(sim, {u: [(exit_of[u][1], (st.cid[u],))] for u in owners},
                        set(owners) | {exit_of[u][1] for u in owners}, "cluster-merge")
        progs = {}
        for v in range(n):
            if st.cid[v] in joiners:
                if v in owners:
                    x = exit_of[v][1]
                    progs[v] = _Reroot(v, set(st.tree_nbrs[v]), start_parent=x, new_cid=got_cid(got[v], x))
                else:
                    progs[v] = _Reroot(v, set(st.tree_nbrs[v]))
        with sim.phase_scope("cluster-merge"):
            sim.execute(progs)
        for v, p in progs.items():
            st.cid[v] = p.new_cid
            st.parent[v] = p.parent
            st.children[v] = list(p.children)
            st.tree_nbrs[v] = set(p.children) | {p.parent}
        for x, msgs in hook.items():
            for src, _ in msgs:
                st.children[x] = sorted(set(st.children[x]) | {src})
                st.tree_nbrs[x].add(src)
        # merged clusters recount their size and completeness
        agg = TreeAggregator(st.cid, st.parent, st.children, phase="cluster-merge")
        size = agg.solve(sim, {v: 1 for v in range(n)}, _SUM)
        for v in range(n):
            st.size[v] = size[v]
            complete[v] = size[v] >= threshold
    else:
        # cap reached: anything still able to merge is a failure
        sends = {v: [(w, (st.cid[v],)) for w in nbrs[v]] for v in range(n)}
        got = exchange(sim, sends, range(n), "cluster-merge")
        stuck = any(not complete[v] and any(c != st.cid[v] for _, (c,) in got[v]) for v in range(n))
        if stuck:
            raise on_stall(f"clusters still merging after {iters} iterations")
    return st, complete, used


def got_cid(msgs, x):
    for src, pl in msgs:
        if src == x:
            return pl[0]
    raise RuntimeError(f"no cluster id heard from {x}")


def subpart_division_det(graph, partition: Partition, depth_bound: int, sim=None):
    """Merge singletons by deterministic star joinings until sub-parts reach
    ``depth_bound`` nodes.  Returns (division, report)."""
    own = sim is None
    sim = sim or Simulator(graph)
    mark = sim.mark()
    threshold = max(1, depth_bound)
    nbrs = partition.part_nbrs(graph)
    st, complete, _ = merge_clusters(sim, graph, partition.part_of, threshold, "det", nbrs=nbrs)
    small = [not complete[v] and st.size[v] < depth_bound for v in range(graph.n)]
    div = _finalize_division(sim, graph, partition.part_of, st.cid, st.parent, st.children,
                             depth_bound, small, nbrs=nbrs)
    return div, sim.report(mark if not own else None)


def subpart_division_random(graph, partition: Partition, depth_bound: int, seed: int = 0, sim=None):
    """Small parts: one sub-part from a BFS at the leader.  Large parts:
    random representatives claim part-restricted balls of radius D_T; one
    retry with doubled probability if some node stays unclaimed."""
    own = sim is None
    sim = sim or Simulator(graph, seed=seed)
    mark = sim.mark()
    n = graph.n
    part_of = partition.part_of
    leaders = partition.leaders or {p: min(vs) for p, vs in partition.parts.items()}
    D = max(1, depth_bound)
    # leader BFS bounded to D hops, then count and decide smallness
    roots = {leaders[p]: leaders[p] for p in partition.parts}
    nbrs = partition.part_nbrs(graph)
    par, ch, dep, lab = part_bfs_forest(sim, graph, part_of, roots, max_depth=D, nbrs=nbrs)
    reached = [v for v in range(n) if lab[v] is not None]
    agg = TreeAggregator(lab, par, ch, phase="division")
    count = agg.solve(sim, {v: 1 for v in reached}, _SUM, reached)
    small_part = {part_of[v]: count[v] <= D for v in reached}
    sub, parent, children = [None] * n, [None] * n, [[] for _ in range(n)]
    small = [False] * n
    for v in range(n):
        if small_part.get(part_of[v]):
            sub[v], parent[v], children[v] = lab[v], par[v], ch[v]
            small[v] = count.get(v, 0) < depth_bound
    large = [v for v in range(n) if not small_part.get(part_of[v])]
    p = min(1.0, C_P * math.log(max(n, 2)) / D)
    retries = 0
    for attempt in range(2):
        reps = {}
        for v in large:
            if sim.rng(v, 11 + attempt).random() < p:
                reps[v] = v
        cp, cc, cd, cl = part_bfs_forest(sim, graph, part_of, reps, max_depth=D, nodes=large,
                                         phase="division", nbrs=nbrs)
        if all(cl[v] is not None for v in large):
            for v in large:
                sub[v], parent[v], children[v] = cl[v], cp[v], cc[v]
            break
        if attempt == 0:
            retries = 1
            p = min(1.0, 2 * p)
    else:
        raise CoverageFailure("some node unclaimed after the retry")
    div = _finalize_division(sim, graph, part_of, sub, parent, children, depth_bound, small, retries,
                             nbrs=nbrs)
    return div, sim.report(mark if not own else None)


def k_dominating_set(graph, k: int, sim=None):
    """Representatives of a deterministic division of V with completion
    threshold k/6.  Returns (sorted node list, report)."""
    if not 1 <= k <= graph.n:
        raise ValueError("need 1 <= k <= n")
    own = sim is None
    sim = sim or Simulator(graph)
    mark = sim.mark()
    threshold = max(1, math.ceil(k / 6))
    st, _, _ = merge_clusters(sim, graph, [0] * graph.n, threshold, "det")
    out = sorted({st.cid[v] for v in range(graph.n)})
    return out, sim.report(mark if not own else None)


def sub_bound(part_size: int, n: int, depth_bound: int) -> float:
    return C_DIV * (1 + part_size * math.log(max(n, 2)) / max(1, depth_bound))

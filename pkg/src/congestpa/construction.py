"""Shortcut construction.

Deterministic: heavy paths, the doubling path algorithm on each path in
waves, and verification that freezes parts whose block count is small.
Randomized: representatives claim tree edges upward; an edge stops taking
new parts once it carries 2c - 1 of them.  Plus the (b, c) doubling search
and the trivial shortcut.
"""
from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field

from .casting import TreeAggregator
from .graphs import NetworkGraph, Partition, heavy_path_decomposition
from .ops import get_op
from .pa import verify_block_parameter
from .shortcuts import TreeRestrictedShortcut, congestion
from .sim import NodeProgram, Simulator


class TargetsInfeasible(RuntimeError):
    """Parts stayed active after every construction iteration."""


class SearchExhausted(RuntimeError):
    pass


def ceil_log2(x: int) -> int:
    return max(0, math.ceil(math.log2(x))) if x > 1 else 0


def path_iterations(L: int) -> int:
    return ceil_log2(L)


def window_starts(c: int, iters: int) -> list:
    """First round of each doubling iteration; iteration i lasts 2c-1+2^i rounds."""
    starts, r = [], 1
    for i in range(iters + 1):
        starts.append(r)
        r += 2 * c - 1 + (1 << i)
    return starts


def det_congestion_ceiling(c: int, depth_bound: int, n_parts: int) -> int:
    """Paths hold at most depth_bound + 1 nodes."""
    return 2 * c * max(1, ceil_log2(depth_bound + 1)) * (ceil_log2(n_parts) + 1)


def det_iterations(n_parts: int) -> int:
    return ceil_log2(n_parts) + 1


def rand_iterations(n_parts: int) -> int:
    return max(1, 4 * ceil_log2(n_parts))


# ---------------------------------------------------------------------------
# doubling path algorithm
# ---------------------------------------------------------------------------

class _PathNode(NodeProgram):
    """One node of a directed path (positions 1..L from the source).

    In iteration i, nodes at positions = 2^i mod 2^(i+1) either break their
    upward edge (2c or more ids held) or stream their ids up, one per round;
    relays forward at once, ids stop at a broken edge, and the node at the
    next multiple of 2^(i+1) (or the top node) keeps them.  After the last
    iteration the top node applies the same size test and, when ``up`` is
    given, streams what it holds across its upward light edge.
    """

    def __init__(self, node, pos, L, up, ids, c, starts, iters_all):
        super().__init__(node)
        self.pos = pos
        self.L = L
        self.up = up  # next node upward (on the path, or across the light edge at the top)
        self.cur = set(ids)
        self.c = c
        self.starts = starts
        self.iters = path_iterations(L)
        self.iters_all = iters_all
        self.broken = False
        self.crossed = set()
        self.outbox = []
        self.incoming = set()
        self.end = starts[iters_all]
        # awake while a send duty lies ahead
        self.halted = False

    def _sender_iter(self):
        if self.pos >= self.L or self.pos == 0:
            return None
        i = (self.pos & -self.pos).bit_length() - 1
        return i if i < self.iters else None

    def _dest(self, i):
        return self.pos % (1 << (i + 1)) == 0 or self.pos == self.L

    def _iter_of(self, rnd):
        for i in range(self.iters_all):
            if self.starts[i] <= rnd < self.starts[i + 1]:
                return i
        return None

    def step(self, rnd, inbox):
        out = []
        for env in inbox:
            pid = env.payload[0]
            i = self._iter_of(rnd - 1)
            if self.pos == 0 or i is None:
                self.incoming.add(pid)
            elif self._dest(i):
                self.cur.add(pid)
            elif not self.broken:
                out.append((self.up, (pid,)))
                self.crossed.add(pid)
        si = self._sender_iter()
        if si is not None and rnd == self.starts[si]:
            if len(self.cur) >= 2 * self.c:
                self.broken = True
                self.cur = set()
            else:
                self.outbox = sorted(self.cur)
        if rnd == self.end and self.pos == self.L:
            if len(self.cur) >= 2 * self.c:
                self.broken = True
                self.cur = set()
            elif self.up is not None:
                self.outbox = sorted(self.cur)
        if self.outbox:
            pid = self.outbox.pop(0)
            out.append((self.up, (pid,)))
            self.crossed.add(pid)
        duty = (si is not None and rnd < self.starts[si]) or (self.pos == self.L and rnd < self.end)
        self.halted = not (self.outbox or duty)
        return out

    def _merge(self):
        self.cur |= self.incoming
        self.incoming = set()

    def finish(self):
        self._merge()


def _run_paths(sim, graph_paths, S, c, phase="path-shortcut"):
    """Run the doubling algorithm on several disjoint paths at once.

    ``graph_paths`` is a list of (nodes source..sink, upward node after the
    sink or None).  Returns (final sets, broken nodes, crossed sets, sets
    delivered across light edges)."""
    iters_all = max([path_iterations(len(p)) for p, _ in graph_paths] + [0])
    starts = window_starts(c, iters_all)
    progs = {}
    for path, up in graph_paths:
        L = len(path)
        for k, v in enumerate(path):
            nxt = path[k + 1] if k + 1 < L else up
            progs[v] = _PathNode(v, k + 1, L, nxt, S.get(v, ()), c, starts, iters_all)
    receivers = {up for _, up in graph_paths if up is not None and up not in progs}
    for r in receivers:
        progs[r] = _PathNode(r, 0, 0, None, (), c, starts, iters_all)
        progs[r].halted = True
    with sim.phase_scope(phase):
        sim.execute(progs)
    final, broken, crossed, delivered = {}, set(), {}, {}
    for v, p in progs.items():
        p.finish()
        if p.pos == 0:
            delivered[v] = set(p.cur)
            continue
        final[v] = set(p.cur)
        if p.broken:
            broken.add(v)
        if p.crossed:
            crossed[v] = set(p.crossed)
    return final, broken, crossed, delivered


@dataclass
class PathClaimState:
    final: dict  # node -> S_f(v)
    broken: set  # nodes whose upward edge broke
    crossed: dict  # node -> ids sent over its upward edge


def path_shortcut(path, S: dict, c: int, sim=None):
    """Run the doubling path algorithm on ``path`` (source first).

    Returns (PathClaimState, report).  A fresh path graph is simulated unless
    ``sim`` already covers the path's edges.
    """
    if c < 1:
        raise ValueError("c must be at least 1")
    path = list(path)
    own = sim is None
    if own:
        idx = {v: k for k, v in enumerate(path)}
        g = NetworkGraph(len(path), [(k, k + 1) for k in range(len(path) - 1)])
        sim = Simulator(g)
        S2 = {idx[v]: set(s) for v, s in S.items()}
        final, broken, crossed, _ = _run_paths(sim, [(list(range(len(path))), None)], S2, c)
        final = {path[k]: s for k, s in final.items()}
        broken = {path[k] for k in broken}
        crossed = {path[k]: s for k, s in crossed.items()}
        return PathClaimState(final, broken, crossed), sim.report()
    mark = sim.mark()
    final, broken, crossed, _ = _run_paths(sim, [(path, None)], S, c)
    return PathClaimState(final, broken, crossed), sim.report(mark)


# ---------------------------------------------------------------------------
# shared construction scaffolding
# ---------------------------------------------------------------------------

@dataclass
class ActivePartLedger:
    active: dict  # part label -> bool
    frozen_iteration: dict = field(default_factory=dict)
    b_actual: dict = field(default_factory=dict)
    frozen_edges: dict = field(default_factory=dict)

    def to_json(self) -> str:
        rows = [{"part_id": p, "frozen_iteration": self.frozen_iteration.get(p),
                 "b_actual": self.b_actual.get(p)} for p in sorted(self.active)]
        return json.dumps(rows)

    def freeze(self, p, it, b_actual, edges):
        if not self.active[p]:
            raise RuntimeError(f"part {p} already frozen")
        self.active[p] = False
        self.frozen_iteration[p] = it
        self.b_actual[p] = b_actual
        self.frozen_edges[p] = frozenset(edges)


def _single_subpart_parts(sim, graph, partition, division):
    """Parts whose division has one sub-part, found by an OR over each
    sub-part tree of "some neighbour sits in another sub-part", then a
    part-wide decision is not needed: a part with one sub-part has exactly
    one tree, so the tree-wide OR already speaks for the whole part."""
    op = get_op("or")
    flag = {}
    for v in range(graph.n):
        nb = division.nbr_sub[v] if division.nbr_sub is not None else {}
        flag[v] = 1 if any(s != division.sub[v] for s in nb.values()) else 0
    agg = TreeAggregator(division.sub, division.parent, division.children, phase="construction")
    res = agg.solve(sim, flag, op)
    out = set()
    for p, vs in partition.parts.items():
        if all(res[v] == 0 for v in vs):
            out.add(p)
    return out


def _verify_and_freeze(sim, graph, tree, partition, division, frozen_H, cur_H, ledger, b, it, mode, seed):
    """Verify active parts on frozen edges plus this iteration's edges and
    freeze those whose representative-block count is below 3b."""
    active = [p for p, a in ledger.active.items() if a]
    H = {p: set(frozen_H.get(p, ())) for p in partition.parts}
    for p in active:
        H[p] = set(cur_H.get(p, ()))
    sc = TreeRestrictedShortcut(tree, partition, H)
    thr = 3 * b - 1
    verdict, _, counts, _ = verify_block_parameter(graph, tree, partition, division, sc, thr,
                                                   threshold=thr, mode=mode, seed=seed + it,
                                                   parts=active, sim=sim)
    for p in active:
        if verdict[p]:
            ledger.freeze(p, it, counts[p], H[p])
            frozen_H[p] = set(H[p])


def _start(graph, tree, partition, division, sim, seed):
    own = sim is None
    sim = sim or Simulator(graph, seed=seed)
    mark = sim.mark()
    ledger = ActivePartLedger({p: True for p in partition.parts})
    frozen_H: dict = {}
    if division.nbr_sub is None:
        division.learn_neighbours(sim, graph, partition.part_nbrs(graph))
    with sim.phase_scope("construction"):
        trivial = _single_subpart_parts(sim, graph, partition, division)
    for p in sorted(trivial):
        ledger.freeze(p, 1, 1, ())
        frozen_H[p] = set()
    return own, sim, mark, ledger, frozen_H


def _finish(tree, partition, frozen_H, ledger, b, iters, ceiling, sim, mark, own):
    left = [p for p, a in ledger.active.items() if a]
    if left:
        err = TargetsInfeasible(f"{len(left)} parts still active after {iters} iterations")
        err.ledger = ledger
        raise err
    sc = TreeRestrictedShortcut(tree, partition, frozen_H, b=b)
    c_meas, _ = congestion(sc)
    assert c_meas <= ceiling, (c_meas, ceiling)
    return sc, ledger, sim.report(mark if not own else None)


# ---------------------------------------------------------------------------
# deterministic construction
# ---------------------------------------------------------------------------

def deterministic_shortcut(graph, tree, partition: Partition, division, b: int, c: int, sim=None, hpd=None):
    """Heavy-path based construction.  Returns (shortcut, ledger, report);
    raises TargetsInfeasible when parts remain active at the end."""
    if b < 1 or c < 1:
        raise ValueError("targets must be at least 1")
    own, sim, mark, ledger, frozen_H = _start(graph, tree, partition, division, sim, 0)
    if hpd is None:
        hpd, _ = heavy_path_decomposition(tree, graph, sim=sim)
    waves: dict = {}
    for pid, nodes in hpd.paths.items():
        waves.setdefault(hpd.rank[pid], []).append(pid)
    reps = division.reps
    iters = det_iterations(len(partition.parts))
    for it in range(1, iters + 1):
        active = {p for p, a in ledger.active.items() if a}
        if not active:
            break
        S = {r: {partition.part_of[r]} for r in reps if partition.part_of[r] in active}
        crossed_all: dict = {}
        for w in sorted(waves):
            runs = []
            for pid in waves[w]:
                nodes = hpd.paths[pid]
                runs.append((nodes, tree.parent[nodes[-1]]))
            _, _, crossed, delivered = _run_paths(sim, runs, S, c)
            for v, ids in crossed.items():
                crossed_all.setdefault(v, set()).update(ids)
            for v, ids in delivered.items():
                S.setdefault(v, set()).update(ids)
        cur_H: dict = {}
        for v, ids in crossed_all.items():
            for p in ids:
                cur_H.setdefault(p, set()).add(v)
        _verify_and_freeze(sim, graph, tree, partition, division, frozen_H, cur_H, ledger, b, it,
                           "det", 0)
    ceiling = det_congestion_ceiling(c, tree.depth_bound, len(partition.parts))
    return _finish(tree, partition, frozen_H, ledger, b, iters, ceiling, sim, mark, own)


# ---------------------------------------------------------------------------
# randomized construction
# ---------------------------------------------------------------------------

class _Claim(NodeProgram):
    """Forward distinct (rank, part) claims up the tree, lowest rank first,
    until 2c - 1 parts have crossed the upward edge."""

    def __init__(self, node, parent, claims, cap):
        super().__init__(node)
        self.parent = parent
        self.cap = cap
        self.seen = set()
        self.queue = []
        self.crossed = set()
        for rank, p in claims:
            self._offer(rank, p)
        self.halted = not self.queue

    def _offer(self, rank, p):
        if p in self.seen or self.parent is None:
            self.seen.add(p)
            return
        self.seen.add(p)
        heapq.heappush(self.queue, (rank, p))

    def step(self, rnd, inbox):
        for env in inbox:
            self._offer(*env.payload)
        out = []
        if self.queue and len(self.crossed) < self.cap:
            rank, p = heapq.heappop(self.queue)
            self.crossed.add(p)
            out.append((self.parent, (rank, p)))
        if len(self.crossed) >= self.cap:
            self.queue = []
        self.halted = not self.queue
        return out


def randomized_shortcut(graph, tree, partition: Partition, division, b: int, c: int, seed: int = 0,
                        sim=None):
    """Claiming-based construction.  Each iteration, representatives of
    active parts claim their way up the tree with a fresh random rank per
    part; a tree edge accepts at most 2c - 1 parts.  Returns (shortcut,
    ledger, report)."""
    if b < 1 or c < 1:
        raise ValueError("targets must be at least 1")
    own, sim, mark, ledger, frozen_H = _start(graph, tree, partition, division, sim, seed)
    leaders = partition.leaders or {p: min(vs) for p, vs in partition.parts.items()}
    reps = division.reps
    iters = rand_iterations(len(partition.parts))
    for it in range(1, iters + 1):
        active = {p for p, a in ledger.active.items() if a}
        if not active:
            break
        claims: dict = {}
        for r in reps:
            p = partition.part_of[r]
            if p in active:
                # every representative of a part derives the same rank from the leader's stream
                rank = int(sim.rng(leaders[p], 5000 + it).integers(0, 1 << 62))
                claims.setdefault(r, []).append((rank, p))
        progs = {v: _Claim(v, tree.parent[v], claims.get(v, ()), 2 * c - 1) for v in range(graph.n)}
        with sim.phase_scope("claim"):
            sim.execute(progs)
        cur_H: dict = {}
        for v, prog in progs.items():
            for p in prog.crossed:
                cur_H.setdefault(p, set()).add(v)
        _verify_and_freeze(sim, graph, tree, partition, division, frozen_H, cur_H, ledger, b, it,
                           "rand", seed)
    ceiling = 2 * c * iters
    return _finish(tree, partition, frozen_H, ledger, b, iters, ceiling, sim, mark, own)


# ---------------------------------------------------------------------------
# search and baselines
# ---------------------------------------------------------------------------

def doubling_grid(n: int) -> list:
    top = 1
    while top < n:
        top *= 2
    vals = [1 << k for k in range(top.bit_length())]
    grid = [(b, c) for b in vals for c in vals]
    grid.sort(key=lambda bc: (bc[0] + int(math.log2(bc[1])), bc[0]))
    return grid


def doubling_search(graph, tree, partition, division, mode="det", seed: int = 0, sim=None):
    """Try (b, c) pairs in increasing b + log2 c order until a construction
    succeeds.  Returns (b_hat, c_hat, shortcut) with b_hat the largest
    verified block count and c_hat the measured congestion."""
    sim = sim or Simulator(graph, seed=seed)
    hpd = None
    if mode == "det":
        hpd, _ = heavy_path_decomposition(tree, graph, sim=sim)
    for b, c in doubling_grid(graph.n):
        try:
            if mode == "det":
                sc, ledger, _ = deterministic_shortcut(graph, tree, partition, division, b, c, sim=sim, hpd=hpd)
            else:
                sc, ledger, _ = randomized_shortcut(graph, tree, partition, division, b, c, seed=seed, sim=sim)
        except TargetsInfeasible:
            continue
        b_hat = max([x for x in ledger.b_actual.values() if x is not None] + [1])
        return b_hat, max(1, congestion(sc)[0]), sc
    raise SearchExhausted("no (b, c) on the doubling grid succeeded")


def trivial_shortcut(graph, tree, partition) -> TreeRestrictedShortcut:
    """Parts of at least sqrt(n) nodes get every tree edge; smaller parts get
    the tree edges inside the part."""
    root_n = math.sqrt(graph.n)
    full = {v for v in range(tree.n) if tree.parent[v] is not None}
    H = {}
    for p, vs in partition.parts.items():
        if len(vs) >= root_n:
            H[p] = set(full)
        else:
            inside = set(vs)
            H[p] = {v for v in vs if tree.parent[v] is not None and tree.parent[v] in inside}
    return TreeRestrictedShortcut(tree, partition, H)

"""Pipelined forwarding over families of rooted trees.

One ``Relay`` program per node handles many independent flows ("jobs"), each
identified by a key of one or two words.  A job collects ``need`` inputs (its
own contribution counts as one), combines them, and then fires: the combined
value is queued towards every target.  Queues are drained one envelope per
edge per round in priority order, or, in meta-round mode, everything queued
at a meta-round boundary is spread over the next ``beta`` physical rounds.

Convergecasts, broadcasts, first-arrival floods and block routing are all
instances of this one program.
"""
from __future__ import annotations

import heapq
from collections import defaultdict

from .sim import CapacityExceeded, NodeProgram, SimulationError


class CongestionContractViolated(SimulationError):
    """An edge had to carry more distinct flows than the declared congestion."""


class Job:
    __slots__ = ("targets", "need", "got", "acc", "prio", "delay", "senders", "fired", "first")

    def __init__(self, targets=(), need=1, acc=None, prio=(0,), delay=0, first=False):
        self.targets = list(targets)
        self.need = need
        self.got = 0 if acc is None else 1
        self.acc = acc
        self.prio = prio
        self.delay = delay
        self.senders = []
        self.fired = False
        self.first = first


class Relay(NodeProgram):
    def __init__(self, node, jobs: dict, combine, pack, unpack, klen=1, beta=1,
                 declared_c=None, on_unknown="error"):
        super().__init__(node)
        self.jobs = jobs
        self.combine = combine
        self.pack = pack
        self.unpack = unpack
        self.klen = klen
        self.beta = beta
        self.declared_c = declared_c
        self.on_unknown = on_unknown
        self.queues = defaultdict(list)  # dst -> heap of (prio, key, payload)
        self.pending = defaultdict(list)  # meta mode: fired since last boundary
        self.flows = defaultdict(set)
        self.waiting_delay = any(j.delay > 0 for j in jobs.values())
        self.halted = not jobs
        self.busy = False

    def _fire(self, key, job):
        job.fired = True
        if not job.targets:
            return
        payload = key + self.pack(job.acc)
        for dst in job.targets:
            if self.beta == 1:
                heapq.heappush(self.queues[dst], (job.prio, key, payload))
            else:
                self.pending[dst].append((job.prio, key, payload))
            if self.declared_c is not None:
                fl = self.flows[dst]
                fl.add(key)
                if len(fl) > self.declared_c:
                    raise CongestionContractViolated(
                        f"edge {self.node}->{dst} carries {len(fl)} flows > c={self.declared_c}"
                    )

    def _ready(self, job, meta):
        return not job.fired and job.got >= job.need and meta >= job.delay

    def step(self, rnd, inbox):
        beta = self.beta
        boundary = (rnd - 1) % beta == 0
        if not inbox and not boundary and not self.busy:
            return []
        meta = (rnd - 1) // beta
        kl = self.klen
        for env in inbox:
            p = env.payload
            key = p[:kl]
            job = self.jobs.get(key)
            if job is None:
                if self.on_unknown == "ignore":
                    continue
                raise SimulationError(f"node {self.node}: no job for key {key} from {env.src}")
            job.senders.append(env.src)
            if job.fired:
                if job.first:
                    continue
                raise SimulationError(f"node {self.node}: input after firing for key {key}")
            val = self.unpack(p[kl:])
            job.acc = val if job.acc is None else self.combine(job.acc, val)
            job.got += 1
            if self._ready(job, meta):
                self._fire(key, job)
        if rnd == 1 or (self.waiting_delay and boundary):
            still = False
            for key, job in self.jobs.items():
                if self._ready(job, meta):
                    self._fire(key, job)
                elif not job.fired and job.got >= job.need:
                    still = True
            self.waiting_delay = still
        out = []
        if beta == 1:
            for dst, q in self.queues.items():
                if q:
                    out.append((dst, heapq.heappop(q)[2]))
        else:
            if boundary:
                for dst, items in self.pending.items():
                    if items:
                        if len(items) + len(self.queues[dst]) > beta:
                            raise CapacityExceeded(
                                f"node {self.node}: {len(items)} flows for {dst} in one meta-round (beta={beta})"
                            )
                        items.sort()
                        self.queues[dst].extend(items)
                        items.clear()
            for dst, q in self.queues.items():
                if q:
                    out.append((dst, q.pop(0)[2]))
        self.busy = any(self.queues.values()) or any(self.pending.values())
        self.halted = not (self.busy or self.waiting_delay)
        # only delays pending: nothing to do before the next meta boundary
        self.sleep_until = 0 if self.busy else (meta + 1) * beta + 1
        return out


def run_relay(sim, jobs_by_node: dict, op=None, *, combine=None, pack=None, unpack=None,
              klen=1, beta=1, declared_c=None, phase=None, on_unknown="error") -> dict:
    """Run one relay stage; returns the per-node job tables after quiescence."""
    if op is not None:
        combine, pack, unpack = op.combine, op.pack, op.unpack
    progs = {
        v: Relay(v, jobs, combine, pack, unpack, klen=klen, beta=beta,
                 declared_c=declared_c, on_unknown=on_unknown)
        for v, jobs in jobs_by_node.items()
    }
    if phase is None:
        sim.execute(progs)
    else:
        with sim.phase_scope(phase):
            sim.execute(progs)
    return {v: p.jobs for v, p in progs.items()}


# ---------------------------------------------------------------------------
# aggregation over rooted spanning trees of disjoint clusters
# ---------------------------------------------------------------------------

class TreeAggregator:
    """Part-wise aggregation over disjoint clusters that each carry a rooted
    spanning tree: convergecast to the root, then broadcast back.

    ``cluster[v]`` names v's cluster (the root's id), ``parent[v]`` is v's
    tree parent (None at the root), ``children[v]`` its tree children.
    """

    def __init__(self, cluster, parent, children, phase="cluster-agg"):
        self.cluster = cluster
        self.parent = parent
        self.children = children
        self.phase = phase

    def solve(self, sim, values: dict, op, nodes=None) -> dict:
        nodes = list(range(len(self.cluster))) if nodes is None else nodes
        up = {}
        for v in nodes:
            key = (self.cluster[v],)
            p = self.parent[v]
            up[v] = {key: Job([] if p is None else [p], need=1 + len(self.children[v]),
                              acc=op.lift(v, values[v]))}
        tables = run_relay(sim, up, op, phase=self.phase)
        down = {}
        for v in nodes:
            key = (self.cluster[v],)
            if self.parent[v] is None:
                down[v] = {key: Job(self.children[v], need=1, acc=tables[v][key].acc)}
            else:
                down[v] = {key: Job(self.children[v], need=1, first=True)}
        tables = run_relay(sim, down, op, phase=self.phase)
        return {v: op.finish(tables[v][(self.cluster[v],)].acc) for v in nodes}


class _OneHop(NodeProgram):
    def __init__(self, node, sends):
        super().__init__(node)
        self.sends = sends
        self.got = []

    def step(self, rnd, inbox):
        self.got.extend((e.src, e.payload) for e in inbox)
        out = self.sends if rnd == 1 else None
        self.halted = True
        return out


def exchange(sim, sends: dict, nodes, phase=None) -> dict:
    """Every node in ``nodes`` sends its listed (dst, payload) envelopes in one
    round; returns what each node received as [(src, payload)]."""
    progs = {v: _OneHop(v, sends.get(v, [])) for v in nodes}
    for v in nodes:
        progs[v].halted = not progs[v].sends
    if phase is None:
        sim.execute(progs)
    else:
        with sim.phase_scope(phase):
            sim.execute(progs)
    return {v: p.got for v, p in progs.items()}

"""Synchronous CONGEST round simulator with exact message accounting.

Node programs run in lockstep.  Everything a program emits in round ``r`` is
delivered at the start of round ``r + 1``.  The simulator checks that every
envelope travels along a graph edge, respects the payload word budget and
the per-edge multiplicity of the round, and tallies rounds and messages,
optionally split by phase label.
"""
from __future__ import annotations

import heapq
import json
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

DEFAULT_WORD_BUDGET = 3
WORD_BITS = 64
WORD_MASK = (1 << WORD_BITS) - 1


class SimulationError(RuntimeError):
    """Base class for protocol violations detected by the simulator."""


class CapacityExceeded(SimulationError):
    pass


class NonAdjacentSend(SimulationError):
    pass


class PayloadTooLarge(SimulationError):
    pass


class RoundLimitExceeded(SimulationError):
    def __init__(self, message, states=None, report=None):
        super().__init__(message)
        self.states = states
        self.report = report


@dataclass(frozen=True)
class Envelope:
    src: int
    dst: int
    payload: tuple
    round: int


@dataclass(frozen=True)
class SimReport:
    rounds: int = 0
    messages: int = 0
    messages_by_phase: Mapping[str, int] = field(default_factory=lambda: MappingProxyType({}))
    max_edge_load: int = 0
    halted: bool = True

    def to_dict(self) -> dict:
        return {
            "rounds": self.rounds,
            "messages": self.messages,
            "messages_by_phase": dict(sorted(self.messages_by_phase.items())),
            "max_edge_load": self.max_edge_load,
            "halted": self.halted,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __add__(self, other: "SimReport") -> "SimReport":
        phases = defaultdict(int, self.messages_by_phase)
        for k, v in other.messages_by_phase.items():
            phases[k] += v
        return SimReport(
            rounds=self.rounds + other.rounds,
            messages=self.messages + other.messages,
            messages_by_phase=MappingProxyType(dict(phases)),
            max_edge_load=max(self.max_edge_load, other.max_edge_load),
            halted=self.halted and other.halted,
        )


class NodeProgram:
    """A node's state machine.

    Subclasses override :meth:`step`.  ``halted`` marks a passive node: the
    simulator stops stepping it until a message arrives for it.
    ``sleep_until`` lets an awake node skip rounds before that round number
    unless a message arrives.
    """

    sleep_until = 0

    def __init__(self, node: int):
        self.node = node
        self.halted = False

    def step(self, rnd: int, inbox: Sequence[Envelope]) -> list[tuple[int, tuple]] | None:
        raise NotImplementedError

    @property
    def state(self):
        return {k: v for k, v in vars(self).items() if k not in ("node", "halted", "sleep_until")}


def node_rng(seed: int, node: int, salt: int = 0) -> np.random.Generator:
    """Per-node generator split deterministically from the run seed."""
    return np.random.default_rng([seed & WORD_MASK, salt, node])


class Simulator:
    """Runs protocol stages over one graph and keeps cumulative accounting.

    Composite algorithms execute as a sequence of stages; rounds add up across
    stages, messages add up, and ``max_edge_load`` is the maximum seen.
    """

    def __init__(self, graph, word_budget: int = DEFAULT_WORD_BUDGET, seed: int = 0):
        self.graph = graph
        self.word_budget = word_budget
        self.seed = seed
        self._adj = [set(a) for a in graph.adj]
        self._phase: list[str] = []
        self.rounds = 0
        self.messages = 0
        self.max_edge_load = 0
        self.by_phase: dict[str, int] = defaultdict(int)
        self.stages = 0

    # -- accounting ---------------------------------------------------------
    @contextmanager
    def phase_scope(self, label: str):
        self._phase.append(label)
        try:
            yield self
        finally:
            self._phase.pop()

    def mark(self) -> tuple:
        return (self.rounds, self.messages, dict(self.by_phase), self.max_edge_load)

    def report(self, since: tuple | None = None) -> SimReport:
        if since is None:
            since = (0, 0, {}, 0)
        r0, m0, p0, _ = since
        phases = {k: v - p0.get(k, 0) for k, v in self.by_phase.items() if v - p0.get(k, 0)}
        return SimReport(
            rounds=self.rounds - r0,
            messages=self.messages - m0,
            messages_by_phase=MappingProxyType(phases),
            max_edge_load=self.max_edge_load,
            halted=True,
        )

    def rng(self, node: int, salt: int = 0) -> np.random.Generator:
        return node_rng(self.seed, node, salt)

    # -- execution ----------------------------------------------------------
    def execute(
        self,
        programs: Mapping[int, NodeProgram],
        round_limit: int = 10**7,
        multiplicity: Callable[[int], int] | Mapping[int, int] | None = None,
    ) -> int:
        """Run one stage until every program halts and nothing is in flight.

        ``programs`` may cover a subset of nodes; sending to a node without a
        program is an error.  Returns the number of rounds the stage used
        (the last round in which anything was sent).
        """
        if isinstance(multiplicity, Mapping):
            sched = multiplicity
            mult_of = lambda r: sched.get(r, 1)  # noqa: E731
        elif multiplicity is None:
            mult_of = lambda r: 1  # noqa: E731
        else:
            mult_of = multiplicity
        adj = self._adj
        budget = self.word_budget
        label = self._phase[-1] if self._phase else None
        awake = {v for v, p in programs.items() if not p.halted}
        asleep: dict[int, int] = {}  # node -> round it wants to be stepped again
        wake_heap: list = []
        inflight: dict[int, list[Envelope]] = {}
        rnd = 0
        last = 0
        stage_messages = 0
        stage_load = 0
        while awake or inflight or asleep:
            if not awake and not inflight:
                # only sleepers left: skip the idle rounds
                while asleep.get(wake_heap[0][1]) != wake_heap[0][0]:
                    heapq.heappop(wake_heap)
                rnd = max(rnd, min(wake_heap[0][0], round_limit + 1) - 1)
            rnd += 1
            if rnd > round_limit:
                self._commit(last, stage_messages, stage_load, label)
                raise RoundLimitExceeded(
                    f"round limit {round_limit} reached",
                    states={v: p.state for v, p in programs.items()},
                    report=self.report(),
                )
            while wake_heap and wake_heap[0][0] <= rnd:
                r, v = heapq.heappop(wake_heap)
                if asleep.get(v) == r:
                    del asleep[v]
                    awake.add(v)
            mult = mult_of(rnd)
            deliveries = inflight
            inflight = {}
            active = awake.union(deliveries)
            for v in sorted(active):
                prog = programs.get(v)
                if prog is None:
                    raise NonAdjacentSend(f"no program at node {v}")
                asleep.pop(v, None)
                inbox = deliveries.get(v, ())
                if len(inbox) > 1:
                    inbox.sort(key=lambda e: e.src)
                out = prog.step(rnd, inbox)
                if out:
                    per_edge: dict[int, int] = defaultdict(int)
                    nbrs = adj[v]
                    for dst, payload in out:
                        if dst not in nbrs:
                            raise NonAdjacentSend(f"{v} -> {dst} is not an edge")
                        if len(payload) > budget:
                            raise PayloadTooLarge(f"{len(payload)} words > {budget}")
                        per_edge[dst] += 1
                        inflight.setdefault(dst, []).append(Envelope(v, dst, tuple(payload), rnd))
                    load = max(per_edge.values())
                    if load > mult:
                        raise CapacityExceeded(
                            f"node {v} sent {load} envelopes on one edge in round {rnd} (cap {mult})"
                        )
                    stage_load = max(stage_load, load)
                    stage_messages += len(out)
                    last = rnd
                if prog.halted:
                    awake.discard(v)
                elif prog.sleep_until > rnd + 1:
                    awake.discard(v)
                    asleep[v] = prog.sleep_until
                    heapq.heappush(wake_heap, (prog.sleep_until, v))
                else:
                    awake.add(v)
        self._commit(last, stage_messages, stage_load, label)
        return last

    def _commit(self, rounds, messages, load, label):
        self.rounds += rounds
        self.messages += messages
        self.max_edge_load = max(self.max_edge_load, load)
        if label is not None and messages:
            self.by_phase[label] += messages
        self.stages += 1


def run(
    graph,
    programs: Mapping[int, NodeProgram] | Iterable[NodeProgram],
    round_limit: int = 10**7,
    multiplicity_schedule: Mapping[int, int] | None = None,
    word_budget: int = DEFAULT_WORD_BUDGET,
) -> tuple[dict, SimReport]:
    """Run one program per node to quiescence; return final states and report."""
    if not isinstance(programs, Mapping):
        programs = {p.node: p for p in programs}
    if sorted(programs) != list(range(graph.n)):
        raise ValueError("exactly one program per node is required")
    if round_limit < 1:
        raise ValueError("round_limit must be >= 1")
    sim = Simulator(graph, word_budget=word_budget)
    sim.execute(programs, round_limit=round_limit, multiplicity=multiplicity_schedule)
    states = {v: programs[v].state for v in range(graph.n)}
    return states, sim.report()

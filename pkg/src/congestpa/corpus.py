"""Seeded instance families shared by the tests, the acceptance suite and the demos."""
from __future__ import annotations

from dataclasses import dataclass

from .graphs import (NetworkGraph, Partition, gen_grid_with_apex, gen_path, gen_random_connected,
                     gen_random_connected_partition, gen_ring)


@dataclass
class Instance:
    name: str
    graph: NetworkGraph
    partition: Partition
    root: int = 0


def ring_of_parts(parts: int, size: int = 3) -> Instance:
    """A ring cut into ``parts`` arcs of ``size`` consecutive nodes."""
    g = gen_ring(parts * size)
    return Instance(f"ring-{parts}x{size}", g, Partition([v // size for v in range(g.n)]))


def path_of_parts(parts: int, size: int = 3) -> Instance:
    g = gen_path(parts * size)
    return Instance(f"path-{parts}x{size}", g, Partition([v // size for v in range(g.n)]))


def grid_apex(D: int, w: int | None = None) -> Instance:
    g, part = gen_grid_with_apex(D, w or D)
    return Instance(f"grid-apex-{D}x{w or D}", g, part, g.n - 1)


def random_instance(n: int, parts: int, seed: int, p_extra: float = 0.03, weighted=False) -> Instance:
    g = gen_random_connected(n, p_extra, seed=seed, weighted=weighted)
    return Instance(f"random-{n}-{parts}-s{seed}", g,
                    gen_random_connected_partition(g, parts, seed=seed))


def standard_corpus() -> list:
    """The fixed instance list used for corpus-wide checks."""
    out = [grid_apex(D) for D in (4, 8, 12)]
    out += [ring_of_parts(k, s) for k, s in ((12, 4), (30, 2))]
    out += [path_of_parts(10, 5)]
    sizes = [(60, 5), (120, 10), (200, 8), (250, 20), (300, 15)]
    for i, (n, k) in enumerate(sizes):
        out.append(random_instance(n, k, seed=100 + i))
        out.append(random_instance(n, k, seed=200 + i, p_extra=0.005))
    return out


def min_exit_edges(graph, partition) -> dict:
    """Each part's lexicographically smallest edge leaving it."""
    out = {}
    for p, vs in partition.parts.items():
        best = None
        for u in vs:
            for x in graph.adj[u]:
                if partition.part_of[x] != p and (best is None or (u, x) < best):
                    best = (u, x)
        if best is not None:
            out[p] = best
    return out

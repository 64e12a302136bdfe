"""Boruvka MST driven by part-wise aggregation.

Each phase treats the current fragments as parts: one PA call finds every
fragment's lightest outgoing edge, a second one spreads the new fragment id.
Run:  python3 demos/mst_walkthrough.py [n] [seed]
"""
import sys

from congestpa.apps import mst
from congestpa.graphs import gen_random_connected
from congestpa.oracle import mst_weight, oracle_mst


def main(n=120, seed=3):
    g = gen_random_connected(n, 0.04, seed=seed, weighted=True, max_weight=100)
    print(f"graph: n={g.n} m={g.m}")
    for mode in ("det", "rand"):
        state, rep = mst(g, mode, seed=seed)
        same = state.edges() == oracle_mst(g)
        print(f"[{mode}] fragments per phase: {state.fragments_per_phase}")
        print(f"[{mode}] weight {mst_weight(g, state.edges())}, matches Kruskal: {same}")
        print(f"[{mode}] rounds {rep.rounds}, messages {rep.messages}")
        top = sorted(rep.messages_by_phase.items(), key=lambda kv: -kv[1])[:4]
        print(f"[{mode}] busiest phases: " + ", ".join(f"{k}={v}" for k, v in top))


if __name__ == "__main__":
    main(*(int(x) for x in sys.argv[1:3]))

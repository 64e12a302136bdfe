"""Build a tree-restricted shortcut and look inside it.

Shows the doubling search's (b, c), the per-part block counts seen from the
sub-part representatives, the heaviest tree edges and the ledger of when
each part froze.  Run:  python3 demos/shortcut_anatomy.py [det|rand]
"""
import sys
from collections import Counter

from congestpa.construction import deterministic_shortcut, doubling_search, randomized_shortcut
from congestpa.corpus import random_instance
from congestpa.graphs import build_bfs_tree
from congestpa.shortcuts import blocks, congestion
from congestpa.subparts import subpart_division_det, subpart_division_random


def main(mode="det", seed=11):
    inst = random_instance(250, 12, seed=seed, p_extra=0.01)
    g = inst.graph
    part = inst.partition.with_min_leaders()
    tree, _ = build_bfs_tree(g, inst.root)
    D = tree.depth_bound
    if mode == "det":
        div, _ = subpart_division_det(g, part, D)
    else:
        div, _ = subpart_division_random(g, part, D, seed=seed)
    print(f"n={g.n} parts={part.N} tree depth={D} sub-parts={len(div.reps)}")
    b, c, _ = doubling_search(g, tree, part, div, mode, seed=seed)
    print(f"doubling search settled on b={b} c={c}")
    if mode == "det":
        sc, ledger, rep = deterministic_shortcut(g, tree, part, div, b, c)
    else:
        sc, ledger, rep = randomized_shortcut(g, tree, part, div, b, c, seed=seed)
    cong, load = congestion(sc)
    bs = blocks(sc, reps=div.reps)
    print(f"construction: {rep.rounds} rounds, {rep.messages} messages")
    print(f"congestion {cong}; representative blocks per part (max {bs.b_rep}):")
    for p in sorted(part.parts):
        print(f"  part {p:>2}: size {len(part.parts[p]):>3}  |H| {len(sc.H[p]):>3}  "
              f"rep blocks {bs.rep_counts[p]}  frozen at iteration {ledger.frozen_iteration.get(p)}")
    hist = Counter(load.values())
    print("edges by load: " + ", ".join(f"{k}:{v}" for k, v in sorted(hist.items())))


if __name__ == "__main__":
    main(*sys.argv[1:2])

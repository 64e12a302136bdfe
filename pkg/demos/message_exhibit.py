"""Grid with an apex: rows are the parts, the apex makes the diameter tiny.

A naive aggregation sends every value up the whole BFS tree, so its message
count grows like n*D.  Shortcut-based PA keeps each part's traffic inside a
few short blocks.  Run:  python3 demos/message_exhibit.py
"""
import math

from congestpa.construction import doubling_search
from congestpa.corpus import grid_apex
from congestpa.graphs import build_bfs_tree
from congestpa.oracle import oracle_pa
from congestpa.pa import naive_block_aggregation_baseline, pa_solve
from congestpa.subparts import subpart_division_det


def main():
    print(f"{'D':>3} {'n':>5} {'baseline':>9} {'pa':>7} {'ratio':>6}  n*ln(n)^2")
    for D in (8, 16, 32):
        inst = grid_apex(D, D)
        g = inst.graph
        part = inst.partition.with_min_leaders()
        tree, _ = build_bfs_tree(g, inst.root)
        div, _ = subpart_division_det(g, part, tree.depth_bound)
        b, c, sc = doubling_search(g, tree, part, div, "det")
        vals = list(range(g.n))
        pa = pa_solve(g, tree, part, vals, "sum", div, sc, b, c=c)
        base = naive_block_aggregation_baseline(g, tree, part, vals, "sum")
        assert pa.by_part() == base.by_part() == oracle_pa(part.part_of, vals, "sum")
        bm, pm = base.report.messages, pa.report.messages
        print(f"{D:>3} {g.n:>5} {bm:>9} {pm:>7} {bm / pm:>6.2f}  {g.n * math.log(g.n) ** 2:.0f}")
        # where the PA messages went
        for phase, k in sorted(pa.report.messages_by_phase.items()):
            print(f"      {phase:<16} {k}")


if __name__ == "__main__":
    main()

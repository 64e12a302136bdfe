"""Command line: generate instances, run algorithms, sweep a parameter.

    congestpa gen --grid-apex 8 8 --out-prefix inst/grid
    congestpa run --alg pa --mode det --graph inst/grid.graph --partition inst/grid.part
    congestpa sweep --alg baseline,pa --grid-apex-D 8,16,32
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import random
import sys

from .graphs import (NetworkGraph, Partition, build_bfs_tree, gen_grid_with_apex,
                     gen_random_connected, gen_random_connected_partition)
from .sim import Simulator

CSV_HEADER = ["algorithm", "mode", "seed", "n", "m", "D", "b", "c", "rounds", "messages",
              "max_edge_load", "ok"]
ALGORITHMS = ("pa", "mst", "labels", "kdom", "shortcut-det", "shortcut-rand", "baseline")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------

def _load_instance(cfg):
    """Build (graph, partition, tree root) from exactly one source."""
    sources = [k for k in ("graph", "grid_apex", "random") if cfg.get(k) is not None]
    if len(sources) != 1:
        raise UsageError("give exactly one graph source: --graph, --grid-apex or --random")
    seed = cfg.get("seed") or 0
    src = sources[0]
    if src == "graph":
        g = NetworkGraph.read(cfg["graph"])
        if cfg.get("partition"):
            part = Partition.read(cfg["partition"])
        else:
            part = gen_random_connected_partition(g, cfg.get("parts") or 1, seed=seed)
        return g, part, cfg.get("root") or 0
    if src == "grid_apex":
        D, w = (int(x) for x in cfg["grid_apex"])
        g, part = gen_grid_with_apex(D, w)
        return g, part, g.n - 1
    n = int(cfg["random"])
    g = gen_random_connected(n, cfg.get("p_extra") or 0.03, seed=seed,
                             weighted=cfg.get("alg") == "mst")
    part = gen_random_connected_partition(g, cfg.get("parts") or max(1, n // 20), seed=seed)
    return g, part, 0


def _values(n, seed):
    rng = random.Random(seed)
    return [rng.randrange(1 << 32) for _ in range(n)]


# ---------------------------------------------------------------------------
# algorithms; each returns (b, c, ok)
# ---------------------------------------------------------------------------

def _run_pa(sim, g, part, tree, cfg):
    from .oracle import oracle_pa
    from .pa import pa_solve_leaderless
    op = cfg.get("op") or "sum"
    vals = _values(g.n, cfg["seed"])
    res = pa_solve_leaderless(g, part, vals, op, cfg["mode"], cfg["seed"], tree=tree, sim=sim,
                              targets=_targets(cfg))
    ok = res.by_part() == oracle_pa(part.part_of, vals, op)
    return res.b, res.c, ok


def _run_baseline(sim, g, part, tree, cfg):
    from .oracle import oracle_pa
    from .pa import naive_block_aggregation_baseline
    op = cfg.get("op") or "sum"
    vals = _values(g.n, cfg["seed"])
    res = naive_block_aggregation_baseline(g, tree, part, vals, op, sim=sim)
    return 1, part.N, res.by_part() == oracle_pa(part.part_of, vals, op)


def _run_mst(sim, g, part, tree, cfg):
    from .apps import mst
    from .oracle import oracle_mst
    st, _ = mst(g, cfg["mode"], cfg["seed"], sim=sim)
    if cfg.get("out_edges"):
        st.write(cfg["out_edges"])
    return None, None, st.edges() == oracle_mst(g)


def _run_labels(sim, g, part, tree, cfg):
    from .apps import component_labels
    from .oracle import oracle_component_labels
    rng = random.Random(cfg["seed"])
    prob = cfg.get("h_prob")
    prob = 0.5 if prob is None else prob
    h = [e for e in g.edges if rng.random() < prob]
    lab, _ = component_labels(g, h, cfg["mode"], cfg["seed"], sim=sim)
    return None, None, lab.label == oracle_component_labels(g.n, h)


def _run_kdom(sim, g, part, tree, cfg):
    from .oracle import oracle_distances_to_set
    from .subparts import k_dominating_set
    k = cfg.get("k") or 4
    out, _ = k_dominating_set(g, k, sim=sim)
    dist = oracle_distances_to_set(g, out)
    return None, None, len(out) <= 6 * g.n / k and max(dist) <= k


def _targets(cfg):
    if cfg.get("b") is None and cfg.get("c") is None:
        return None
    return (cfg.get("b") or 1, cfg.get("c") or 1)


def _run_shortcut(sim, g, part, tree, cfg, mode):
    from .construction import (det_congestion_ceiling, deterministic_shortcut, doubling_search,
                               rand_iterations, randomized_shortcut)
    from .pa import coarsen_leaders
    from .shortcuts import blocks, congestion
    from .subparts import subpart_division_det, subpart_division_random
    leaders, _ = coarsen_leaders(g, part, "det", sim)
    part = part.with_leaders(leaders)
    D = tree.depth_bound
    if mode == "det":
        div, _ = subpart_division_det(g, part, D, sim=sim)
    else:
        div, _ = subpart_division_random(g, part, D, seed=cfg["seed"], sim=sim)
    tg = _targets(cfg)
    if tg is None:
        b, _, sc = doubling_search(g, tree, part, div, mode, seed=cfg["seed"], sim=sim)
        b_target = b
        c_target = None
    else:
        b_target, c_target = tg
        if mode == "det":
            sc, _, _ = deterministic_shortcut(g, tree, part, div, b_target, c_target, sim=sim)
        else:
            sc, _, _ = randomized_shortcut(g, tree, part, div, b_target, c_target, seed=cfg["seed"], sim=sim)
    if cfg.get("out_shortcut"):
        sc.write(cfg["out_shortcut"])
    c_meas, _ = congestion(sc)
    bs = blocks(sc, reps=div.reps)
    ok = bs.b_rep <= 3 * b_target - 1
    if c_target is not None:
        if mode == "det":
            ceiling = det_congestion_ceiling(c_target, D, part.N)
        else:
            ceiling = 2 * c_target * rand_iterations(part.N)
        ok = ok and c_meas <= ceiling
    return bs.b_rep, c_meas, ok


_RUNNERS = {
    "pa": _run_pa,
    "baseline": _run_baseline,
    "mst": _run_mst,
    "labels": _run_labels,
    "kdom": _run_kdom,
    "shortcut-det": lambda *a: _run_shortcut(*a, mode="det"),
    "shortcut-rand": lambda *a: _run_shortcut(*a, mode="rand"),
}


def run_one(cfg) -> dict:
    """Execute one configuration; returns a CSV row dict.  Algorithm errors
    produce a row with ok=false and an ``error`` entry."""
    alg = cfg["alg"]
    if alg not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {alg!r}; choose from {', '.join(ALGORITHMS)}")
    if alg.startswith("shortcut-"):
        cfg = dict(cfg, mode=alg.split("-")[1])
    g, part, root = _load_instance(cfg)
    sim = Simulator(g, seed=cfg["seed"])
    row = {"algorithm": alg, "mode": cfg["mode"], "seed": cfg["seed"], "n": g.n, "m": g.m,
           "D": "", "b": "", "c": "", "ok": "false"}
    try:
        tree, _ = build_bfs_tree(g, root, sim=sim)
        row["D"] = tree.depth_bound
        b, c, ok = _RUNNERS[alg](sim, g, part, tree, cfg)
        row.update(b="" if b is None else b, c="" if c is None else c, ok="true" if ok else "false")
    except Exception as exc:  # noqa: BLE001 - reported in the row, exit code set by caller
        row["error"] = f"{type(exc).__name__}: {exc}"
    rep = sim.report()
    row.update(rounds=rep.rounds, messages=rep.messages, max_edge_load=rep.max_edge_load)
    if cfg.get("report_json"):
        with open(cfg["report_json"], "w") as fh:
            fh.write(rep.to_json())
    return row


def _emit(rows, cfg, out=None):
    fmt = cfg.get("format") or "csv"
    buf = io.StringIO()
    if fmt == "csv":
        wr = csv.DictWriter(buf, fieldnames=CSV_HEADER, extrasaction="ignore", lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow(r)
    elif fmt == "json":
        buf.write(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    else:
        raise UsageError(f"unknown format {fmt!r}")
    path = cfg.get("out")
    if path:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())
    else:
        (out or sys.stdout).write(buf.getvalue())


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

_DEFAULTS = {"mode": "det", "format": "csv"}


def _common(p):
    p.add_argument("--config", help="JSON file with option values; flags override it")
    p.add_argument("--graph", help="graph file ('n m [weighted]' header, then 'u v [w]')")
    p.add_argument("--partition", help="partition file ('v part_id' per line)")
    p.add_argument("--grid-apex", nargs=2, type=int, metavar=("D", "W"), dest="grid_apex")
    p.add_argument("--random", type=int, metavar="N", help="random connected graph on N nodes")
    p.add_argument("--p-extra", type=float, dest="p_extra")
    p.add_argument("--parts", type=int, help="number of parts for generated partitions")
    p.add_argument("--root", type=int, help="BFS tree root for --graph (default 0)")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("det", "rand"))


def _parser():
    ap = argparse.ArgumentParser(prog="congestpa", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    g = sub.add_parser("gen", help="write graph and partition files")
    _common(g)
    g.add_argument("--out-prefix", dest="out_prefix", default="instance")
    r = sub.add_parser("run", help="run one algorithm")
    _common(r)
    r.add_argument("--alg", help=",".join(ALGORITHMS))
    r.add_argument("--op")
    r.add_argument("--b", type=int)
    r.add_argument("--c", type=int)
    r.add_argument("--k", type=int)
    r.add_argument("--h-prob", type=float, dest="h_prob")
    r.add_argument("--out")
    r.add_argument("--format", choices=("csv", "json"))
    r.add_argument("--report-json", dest="report_json")
    r.add_argument("--out-shortcut", dest="out_shortcut")
    r.add_argument("--out-edges", dest="out_edges")
    s = sub.add_parser("sweep", help="vary one parameter, one row per run")
    _common(s)
    s.add_argument("--alg", help="comma separated algorithms")
    s.add_argument("--grid-apex-D", dest="grid_apex_D", help="comma separated D values (w = D)")
    s.add_argument("--random-n", dest="random_n", help="comma separated node counts")
    s.add_argument("--seeds", help="comma separated seeds")
    s.add_argument("--op")
    s.add_argument("--k", type=int)
    s.add_argument("--out")
    s.add_argument("--format", choices=("csv", "json"))
    return ap


def _config(args) -> dict:
    cfg = dict(_DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            for k, v in json.load(fh).items():
                cfg[k.replace("-", "_")] = v
    seed_given = args.seed is not None or "seed" in cfg
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "cmd"):
            cfg[k] = v
    if cfg.get("mode") == "rand" and not seed_given:
        raise UsageError("--seed is required with --mode rand")
    cfg.setdefault("seed", 0)
    if cfg.get("seed") is None:
        cfg["seed"] = 0
    return cfg


def _cmd_gen(cfg):
    g, part, _ = _load_instance(cfg)
    prefix = cfg["out_prefix"]
    g.write(prefix + ".graph")
    part.write(prefix + ".part")
    print(f"wrote {prefix}.graph (n={g.n}, m={g.m}) and {prefix}.part (N={part.N})")
    return 0


def _cmd_run(cfg):
    if not cfg.get("alg"):
        raise UsageError("--alg is required")
    row = run_one(cfg)
    _emit([row], cfg)
    if "error" in row:
        print(row["error"], file=sys.stderr)
    return 0 if row["ok"] == "true" else 1


def _split(text, conv=int):
    return [conv(x) for x in str(text).split(",") if x.strip()]


def _cmd_sweep(cfg):
    if not cfg.get("alg"):
        raise UsageError("--alg is required")
    algs = _split(cfg["alg"], str)
    seeds = _split(cfg["seeds"]) if cfg.get("seeds") else [cfg["seed"]]
    base = {k: v for k, v in cfg.items() if k not in ("grid_apex", "random", "graph")}
    points = []
    if cfg.get("grid_apex_D"):
        points = [{"grid_apex": (d, d)} for d in _split(cfg["grid_apex_D"])]
    elif cfg.get("random_n"):
        points = [{"random": n} for n in _split(cfg["random_n"])]
    else:
        raise UsageError("sweep needs --grid-apex-D or --random-n")
    rows = []
    for pt in points:
        for seed in seeds:
            for alg in algs:
                c = dict(base, alg=alg, seed=seed, **pt)
                rows.append(run_one(c))
    _emit(rows, cfg)
    return 0 if all(r["ok"] == "true" for r in rows) else 1


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _config(args)
        return {"gen": _cmd_gen, "run": _cmd_run, "sweep": _cmd_sweep}[args.cmd](cfg)
    except UsageError as exc:
        print(f"congestpa: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"congestpa: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

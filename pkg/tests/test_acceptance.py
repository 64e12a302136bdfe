"""The twelve acceptance criteria.  Each test records one PASS/FAIL line,
printed at the end of the run by conftest."""
import functools
import math
import random
import time

from congestpa.apps import mst
from congestpa.construction import (TargetsInfeasible, ceil_log2, det_iterations, deterministic_shortcut,
                                    doubling_search, path_shortcut, rand_iterations, randomized_shortcut)
from congestpa.corpus import grid_apex, min_exit_edges, random_instance, ring_of_parts, standard_corpus
from congestpa.graphs import (build_bfs_tree, gen_path, gen_random_connected, gen_random_tree, gen_ring,
                              heavy_path_decomposition)
from congestpa.ops import OPERATORS
from congestpa.oracle import (oracle_distances_to_set, oracle_heavy_edges, oracle_mst, oracle_pa,
                              oracle_path_shortcut, oracle_rep_block_count)
from congestpa.pa import (K_M, naive_block_aggregation_baseline, pa_solve, pa_solve_leaderless,
                          verify_block_parameter)
from congestpa.shortcuts import blocks, congestion
from congestpa.sim import WORD_BITS, CapacityExceeded, Simulator
from congestpa.subparts import (cole_vishkin_3color, k_dominating_set, log_star, star_joining_det,
                                star_joining_random, sub_bound, subpart_division_det,
                                subpart_division_random)

from helpers import ACCEPTANCE, crafted_verify_instance

MODES = ("det", "rand")


def criterion(num, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*a, **kw):
            try:
                detail = fn(*a, **kw)
            except BaseException as exc:
                line = f"AC{num:<2} FAIL  {title}: {type(exc).__name__}: {str(exc)[:120]}"
                ACCEPTANCE.append(line)
                print(line)
                raise
            line = f"AC{num:<2} PASS  {title}" + (f" ({detail})" if detail else "")
            ACCEPTANCE.append(line)
            print(line)
        return run
    return wrap


def _division(g, part, D, mode, seed):
    if mode == "det":
        return subpart_division_det(g, part, D)[0]
    return subpart_division_random(g, part, D, seed=seed)[0]


# -- 1 --------------------------------------------------------------------------------

def _ac1_sizes(rng):
    # mostly desk-sized graphs, with a tail up to the stated maximum
    if rng.random() < 0.06:
        return rng.randrange(300, 501)
    return rng.randrange(2, 151)


@criterion(1, "PA correctness, 200 instances x both modes, leaderful and leaderless")
def test_ac1_pa_correctness():
    rng = random.Random(2024)
    t0 = time.perf_counter()
    runs = wrong = 0
    for i in range(200):
        n = _ac1_sizes(rng)
        inst = random_instance(n, rng.randint(1, min(20, n)), seed=1000 + i, p_extra=rng.choice([0.005, 0.03]))
        g = inst.graph
        op = OPERATORS[i % len(OPERATORS)]
        vals = [rng.getrandbits(WORD_BITS) for _ in range(g.n)]
        want = oracle_pa(inst.partition.part_of, vals, op)
        for mode in MODES:
            seed = 7 * i + (mode == "rand")
            if i % 2 == 0:
                res = pa_solve_leaderless(g, inst.partition, vals, op, mode, seed)
            else:
                part = inst.partition.with_min_leaders()
                tree, _ = build_bfs_tree(g, inst.root)
                div = _division(g, part, tree.depth_bound, mode, seed)
                b, c, sc = doubling_search(g, tree, part, div, mode, seed=seed)
                res = pa_solve(g, tree, part, vals, op, div, sc, b, mode, seed, c=c)
            runs += 1
            wrong += res.by_part() != want
    elapsed = time.perf_counter() - t0
    assert wrong == 0, f"{wrong} of {runs} runs disagree with the oracle"
    assert elapsed < 120, f"took {elapsed:.1f}s"
    return f"{runs} runs, 0 wrong, {elapsed:.1f}s"


# -- 2 --------------------------------------------------------------------------------

@criterion(2, "message-optimality exhibit on grid-with-apex")
def test_ac2_message_exhibit():
    ratios, rows = [], []
    for D in (8, 16, 32):
        inst = grid_apex(D, D)
        g = inst.graph
        part = inst.partition.with_min_leaders()
        tree, _ = build_bfs_tree(g, inst.root)
        div = subpart_division_det(g, part, tree.depth_bound)[0]
        b, c, sc = doubling_search(g, tree, part, div, "det")
        vals = [v % 97 for v in range(g.n)]
        res = pa_solve(g, tree, part, vals, "sum", div, sc, b, c=c)
        base = naive_block_aggregation_baseline(g, tree, part, vals, "sum")
        want = oracle_pa(part.part_of, vals, "sum")
        assert res.by_part() == want and base.by_part() == want
        n = g.n
        assert base.report.messages >= D * D * D / 4, (D, base.report.messages)
        assert res.report.messages <= K_M * n * math.log(n) ** 2, (D, res.report.messages)
        ratios.append(base.report.messages / res.report.messages)
        rows.append(f"D={D}: {base.report.messages}/{res.report.messages}")
    assert ratios[0] < ratios[1] < ratios[2], ratios
    return "; ".join(rows) + " ratios " + ", ".join(f"{r:.2f}" for r in ratios)


# -- 3 --------------------------------------------------------------------------------

def _spec_det_ceiling(c, D, N):
    return 2 * c * max(1, ceil_log2(D)) * det_iterations(N)


@criterion(3, "shortcut quality on the full corpus, both modes")
def test_ac3_shortcut_quality():
    checked = 0
    for k, inst in enumerate(standard_corpus()):
        g = inst.graph
        part = inst.partition.with_min_leaders()
        tree, _ = build_bfs_tree(g, inst.root)
        tree_edges = {v for v in range(g.n) if tree.parent[v] is not None}
        D, N = tree.depth_bound, part.N
        for mode in MODES:
            seed = 31 + k
            div = _division(g, part, D, mode, seed)
            b_hat, c_hat, _ = doubling_search(g, tree, part, div, mode, seed=seed)
            for b, c in {(b_hat, c_hat), (1, 1), (2, 2), (1, 4), (4, 1)}:
                try:
                    if mode == "det":
                        sc, led, _ = deterministic_shortcut(g, tree, part, div, b, c)
                        ceiling = _spec_det_ceiling(c, D, N)
                    else:
                        sc, led, _ = randomized_shortcut(g, tree, part, div, b, c, seed=seed)
                        ceiling = 2 * c * rand_iterations(N)
                except TargetsInfeasible:
                    assert (b, c) != (b_hat, c_hat), "the searched point must succeed"
                    continue
                assert all(H <= tree_edges for H in sc.H.values())
                cong, _ = congestion(sc)
                assert cong <= ceiling, (inst.name, mode, b, c, cong, ceiling)
                bs = blocks(sc, reps=div.reps)
                for p in part.parts:
                    if not led.active[p]:
                        assert bs.rep_counts[p] <= 3 * b, (inst.name, mode, p, bs.rep_counts[p], b)
                        checked += 1
    return f"{checked} frozen parts checked"


# -- 4 --------------------------------------------------------------------------------

@criterion(4, "path_shortcut equals its oracle on 500 instances")
def test_ac4_path_shortcut():
    rng = random.Random(4)
    for _ in range(500):
        L = rng.randint(1, 256)
        c = rng.randint(1, 6)
        k = rng.randint(1, 12)
        dens = rng.random()
        S = {v: {rng.randrange(k) for _ in range(rng.randint(1, 3))} for v in range(1, L + 1)
             if rng.random() < dens}
        st_, _ = path_shortcut(list(range(1, L + 1)), S, c)
        f, broken = oracle_path_shortcut(L, S, c)
        assert st_.final == f and st_.broken == broken
        cap = 2 * c * max(1, ceil_log2(L))
        assert all(len(s) <= cap for s in st_.final.values())
    return "500 instances"


# -- 5 --------------------------------------------------------------------------------

def _division_ok(div, g, part, D):
    counts = div.counts()
    for p, vs in part.parts.items():
        assert counts[p] <= sub_bound(len(vs), g.n, D), (p, counts[p])
    for s, d in div.diameters().items():
        assert d <= 4 * D, (s, d, D)


@criterion(5, "sub-part divisions: diameter and count bounds, retries")
def test_ac5_divisions():
    corpus = standard_corpus()
    worst = 0
    for inst in corpus:
        g = inst.graph
        part = inst.partition.with_min_leaders()
        D = build_bfs_tree(g, inst.root)[0].depth_bound
        div = subpart_division_det(g, part, D)[0]
        div.validate(g)
        _division_ok(div, g, part, D)
    for seed in range(100):
        inst = corpus[seed % len(corpus)]
        g = inst.graph
        part = inst.partition.with_min_leaders()
        D = build_bfs_tree(g, inst.root)[0].depth_bound
        div = subpart_division_random(g, part, D, seed=seed)[0]
        div.validate(g)
        _division_ok(div, g, part, D)
        assert div.retries <= 1
        worst = max(worst, div.retries)
    return f"det on {len(corpus)} instances; rand 100 seeds, max retries {worst}"


# -- 6 --------------------------------------------------------------------------------

@criterion(6, "star joinings: det >= 1/3 on the corpus, rand mean in [0.15, 0.35]")
def test_ac6_star_joinings():
    low = 1.0
    for inst in standard_corpus():
        if inst.partition.N < 2:
            continue
        sj, _ = star_joining_det(inst.graph, inst.partition, min_exit_edges(inst.graph, inst.partition))
        lead = {q: min(vs) for q, vs in inst.partition.parts.items()}
        sj.validate([lead[q] for q in inst.partition.part_of])
        low = min(low, sj.merged_fraction)
    assert low >= 1 / 3, low
    ring = ring_of_parts(100, 1)
    exits = {p: (p, (p + 1) % 100) for p in range(100)}
    fr = [star_joining_random(ring.graph, ring.partition, exits, seed=s)[0].merged_fraction for s in range(200)]
    mean = sum(fr) / len(fr)
    assert 0.15 <= mean <= 0.35, mean
    return f"det min {low:.2f}; rand mean {mean:.3f}"


# -- 7 --------------------------------------------------------------------------------

@criterion(7, "Cole-Vishkin 3-colouring on rings and paths up to 4096")
def test_ac7_cole_vishkin():
    rng = random.Random(7)
    limit = log_star(2.0 ** WORD_BITS) + 6
    worst = 0
    for n in (2, 3, 5, 16, 100, 511, 1024, 4096):
        for ring in (True, False):
            ids = list({rng.getrandbits(WORD_BITS) for _ in range(n)})
            succ = {ids[i]: (ids[(i + 1) % len(ids)] if ring or i + 1 < len(ids) else None)
                    for i in range(len(ids))}
            colors, _, rounds = cole_vishkin_3color(succ)
            assert set(colors.values()) <= {0, 1, 2}
            assert all(v is None or colors[u] != colors[v] for u, v in succ.items())
            assert rounds <= limit
            worst = max(worst, rounds)
    return f"max reduction rounds {worst} <= {limit}"


# -- 8 --------------------------------------------------------------------------------

@criterion(8, "heavy path decomposition on 100 random trees")
def test_ac8_heavy_paths():
    rng = random.Random(8)
    for i in range(100):
        n = rng.randint(1, 2000) if i % 10 else rng.randint(1, 60)
        g = gen_random_tree(n, seed=i)
        tree, _ = build_bfs_tree(g, rng.randrange(n))
        hpd, _ = heavy_path_decomposition(tree)
        assert hpd.heavy == oracle_heavy_edges(tree.parent)
        assert hpd.light_edges_on_root_paths(tree) <= math.floor(math.log2(n))
    return "100 trees"


# -- 9 --------------------------------------------------------------------------------

@criterion(9, "MST equals the oracle on 40 weighted graphs, both modes")
def test_ac9_mst():
    rng = random.Random(9)
    for i in range(40):
        n = rng.randint(2, 150)
        g = gen_random_connected(n, rng.choice([0.02, 0.06]), seed=500 + i, weighted=True,
                                 max_weight=rng.choice([3, 50, 1000]))
        want = oracle_mst(g)
        for mode in MODES:
            state, _ = mst(g, mode, seed=i)
            assert state.edges() == want, (i, mode)
            assert state.phases <= max(1, math.ceil(math.log2(n))), (i, mode, state.phases)
    return "80 runs"


# -- 10 -------------------------------------------------------------------------------

@criterion(10, "k-dominating sets: size and radius")
def test_ac10_k_domination():
    graphs = [gen_path(n) for n in (30, 120, 300)]
    graphs += [gen_random_connected(n, 0.01, seed=n) for n in (50, 200, 300)]
    runs = 0
    for g in graphs:
        for k in (4, 10, 30):
            if k > g.n:
                continue
            out, _ = k_dominating_set(g, k)
            assert len(out) <= 6 * g.n / k, (g.n, k, len(out))
            assert max(oracle_distances_to_set(g, out)) <= k
            runs += 1
    return f"{runs} instances"


# -- 11 -------------------------------------------------------------------------------

@criterion(11, "verify_block_parameter on 50 crafted instances at b-1, b, b+1")
def test_ac11_verify():
    checks = passes = 0
    for seed in range(50):
        g, part, tree, div, sc = crafted_verify_instance(1000 + seed, 20, 45, 4)
        reps = div.reps
        for p, vs in part.parts.items():
            k = oracle_rep_block_count(tree.parent, vs, sc.H[p], reps & set(vs))
            for b in (k - 1, k, k + 1):
                if b < 1:
                    continue
                verdict, _, _, _ = verify_block_parameter(g, tree, part, div, sc, b, parts=[p])
                assert verdict[p] == (k <= b), (seed, p, k, b)
                checks += 1
                passes += verdict[p]
    return f"{checks} verdicts, {passes} pass / {checks - passes} fail"


# -- 12 -------------------------------------------------------------------------------

def _transcript(inst, mode, seed):
    sim = Simulator(inst.graph, seed=seed)
    vals = [(v * 2654435761) % (1 << 32) for v in range(inst.graph.n)]
    res = pa_solve_leaderless(inst.graph, inst.partition, vals, "min", mode, seed, sim=sim)
    return res.to_json().encode() + sim.report().to_json().encode()


@criterion(12, "simulator discipline: no capacity violations, byte-identical reruns")
def test_ac12_simulator_discipline():
    violations = 0
    runs = 0
    for k, inst in enumerate(standard_corpus()):
        for mode in MODES:
            try:
                a = _transcript(inst, mode, 40 + k)
                b = _transcript(inst, mode, 40 + k)
            except CapacityExceeded:
                violations += 1
                continue
            assert a == b, (inst.name, mode)
            runs += 1
    g = gen_random_connected(60, 0.05, seed=3, weighted=True, max_weight=9)
    for mode in MODES:
        s1, r1 = mst(g, mode, seed=5)
        s2, r2 = mst(g, mode, seed=5)
        assert sorted(s1.edges()) == sorted(s2.edges()) and r1.to_json() == r2.to_json()
    ring = gen_ring(40)
    assert k_dominating_set(ring, 4) == k_dominating_set(ring, 4)
    assert violations == 0
    return f"{runs} corpus reruns identical, 0 CapacityExceeded"

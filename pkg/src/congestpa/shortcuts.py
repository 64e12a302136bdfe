"""Tree-restricted shortcuts, their quality metrics, and block routing."""
from __future__ import annotations

from dataclasses import dataclass, field

from .casting import Job, run_relay
from .ops import get_op
from .sim import Simulator

K1 = 4  # block routing rounds <= K1 * (D_T + c)
K2 = 2  # block routing messages <= K2 * |S| * D_T


class TreeRestrictedShortcut:
    """Per-part sets of tree edges.  An edge is named by its child endpoint.

    ``H[p]`` is the set of child endpoints whose parent edge part ``p`` may
    use.  Parts missing from ``H`` have no shortcut edges.
    """

    def __init__(self, tree, partition, H: dict | None = None, b=None):
        self.tree = tree
        self.partition = partition
        self.H = {p: set(H.get(p, ())) if H else set() for p in partition.parts}
        self.b = b
        for p, es in self.H.items():
            for ch in es:
                if not (0 <= ch < tree.n) or tree.parent[ch] is None:
                    raise ValueError(f"part {p}: {ch} does not name a tree edge")

    def edges_of(self, p):
        return {(ch, self.tree.parent[ch]) for ch in self.H[p]}

    def local_up(self) -> list:
        """For each node, the parts whose H contains the node's parent edge."""
        up = [set() for _ in range(self.tree.n)]
        for p, es in self.H.items():
            for ch in es:
                up[ch].add(p)
        return up

    def merged(self, other: dict) -> "TreeRestrictedShortcut":
        H = {p: set(self.H[p]) | set(other.get(p, ())) for p in self.H}
        return TreeRestrictedShortcut(self.tree, self.partition, H, self.b)

    # -- file format: "part_id u v" per edge -------------------------------
    def dumps(self) -> str:
        lines = []
        for p in sorted(self.H):
            for ch in sorted(self.H[p]):
                lines.append(f"{p} {ch} {self.tree.parent[ch]}")
        return "".join(ln + "\n" for ln in lines)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text, tree, partition) -> "TreeRestrictedShortcut":
        H: dict = {}
        for ln in text.splitlines():
            if not ln.strip():
                continue
            p, u, v = (int(x) for x in ln.split())
            if p not in partition.parts:
                raise ValueError(f"unknown part {p}")
            H.setdefault(p, set()).add(tree.edge_key(u, v))
        return cls(tree, partition, H)

    @classmethod
    def read(cls, path, tree, partition):
        with open(path) as fh:
            return cls.loads(fh.read(), tree, partition)


def congestion(shortcut: TreeRestrictedShortcut):
    """(c, {child endpoint: number of parts using that tree edge})."""
    load: dict = {}
    for es in shortcut.H.values():
        for ch in es:
            load[ch] = load.get(ch, 0) + 1
    return (max(load.values()) if load else 0), load


@dataclass
class Block:
    part: int
    members: list
    root: int


@dataclass
class BlockStructure:
    blocks: dict  # part -> list[Block]
    block_of: dict  # (part, node) -> block root
    counts: dict  # part -> number of blocks
    rep_counts: dict = field(default_factory=dict)  # part -> blocks holding a representative

    @property
    def b(self) -> int:
        return max(self.counts.values()) if self.counts else 0

    @property
    def b_rep(self) -> int:
        return max(self.rep_counts.values()) if self.rep_counts else 0


def blocks(shortcut: TreeRestrictedShortcut, reps=None) -> BlockStructure:
    """Connected components of (P_i ∪ V(H_i), H_i) for every part.

    A block's root is its member of least depth (unique, since a block is a
    subtree).  With ``reps`` (a set of representative nodes), also counts the
    blocks of each part that contain one of the part's representatives.
    """
    tree = shortcut.tree
    out, block_of, counts, rep_counts = {}, {}, {}, {}
    for p, members in shortcut.partition.parts.items():
        es = shortcut.H[p]
        nodes = set(members)
        for ch in es:
            nodes.add(ch)
            nodes.add(tree.parent[ch])
        # walking up H-edges reaches the block root
        root_of = {}
        for v in sorted(nodes, key=lambda x: tree.depth[x]):
            root_of[v] = root_of[tree.parent[v]] if v in es else v
        groups: dict = {}
        for v, r in root_of.items():
            groups.setdefault(r, []).append(v)
            block_of[(p, v)] = r
        out[p] = [Block(p, sorted(g), r) for r, g in sorted(groups.items())]
        counts[p] = len(groups)
        if reps is not None:
            rep_counts[p] = len({root_of[v] for v in members if v in reps})
    return BlockStructure(out, block_of, counts, rep_counts)


# ---------------------------------------------------------------------------
# block routing
# ---------------------------------------------------------------------------

def _participant_paths(tree, bs: BlockStructure, participants):
    """kappa for every block node on a participant-to-root path, and the
    children through which participants are reached."""
    down: dict = {}
    on_path = set()
    for (p, v) in participants:
        on_path.add((p, v))
        x, root = v, bs.block_of[(p, v)]
        while x != root:
            par = tree.parent[x]
            down.setdefault((p, par), set()).add(x)
            if (p, par) in on_path:
                break
            on_path.add((p, par))
            x = par
    kappa = {key: (1 if key in participants else 0) + len(down.get(key, ())) for key in on_path}
    return kappa, down


def block_route(tree, bs: BlockStructure, participants: dict, op="min", direction="convergecast",
                beta: int = 1, c: int | None = None, graph=None, sim: Simulator | None = None,
                delays: dict | None = None):
    """Convergecast (or broadcast) within blocks.

    ``participants`` maps (part, node) to a value.  Convergecast returns
    {(part, block root): aggregate}; broadcast returns {(part, node): value of
    the node's block root}, where the root's value is the aggregate of the
    block's participants.  Returns (result, report).

    Deterministic mode (beta=1) forwards, per edge and round, the packet whose
    block root is shallowest, then smallest id.  With beta > 1 each logical
    round is a meta-round of beta physical rounds and per-part ``delays`` (in
    meta-rounds) may be given.
    """
    op = get_op(op)
    own = sim is None
    if graph is None and sim is None:
        from .graphs import NetworkGraph
        graph = NetworkGraph(tree.n, tree.edges())
    sim = sim or Simulator(graph)
    mark = sim.mark()
    kappa, down = _participant_paths(tree, bs, participants)
    delays = delays or {}

    def prio(p, v):
        r = bs.block_of[(p, v)]
        return (tree.depth[r], r, p)

    up_jobs: dict = {}
    for (p, v), k in kappa.items():
        root = bs.block_of[(p, v)]
        acc = op.lift(v, participants[(p, v)]) if (p, v) in participants else None
        targets = [] if v == root else [tree.parent[v]]
        up_jobs.setdefault(v, {})[(p,)] = Job(targets, need=k, acc=acc, prio=prio(p, v),
                                             delay=delays.get(p, 0))
    with sim.phase_scope("block-route"):
        tables = run_relay(sim, up_jobs, op, beta=beta, declared_c=c if beta == 1 else None)
    roots = {}
    for (p, v) in kappa:
        if bs.block_of[(p, v)] == v:
            roots[(p, v)] = tables[v][(p,)].acc
    if direction == "convergecast":
        return {k: op.finish(a) for k, a in roots.items()}, sim.report(mark if not own else None)
    down_jobs: dict = {}
    for (p, v) in kappa:
        kids = sorted(down.get((p, v), ()))
        if (p, v) in roots:
            down_jobs.setdefault(v, {})[(p,)] = Job(kids, need=1, acc=roots[(p, v)], prio=prio(p, v))
        else:
            down_jobs.setdefault(v, {})[(p,)] = Job(kids, need=1, prio=prio(p, v), first=True)
    with sim.phase_scope("block-route"):
        tables = run_relay(sim, down_jobs, op, beta=beta, declared_c=c if beta == 1 else None)
    res = {(p, v): op.finish(tables[v][(p,)].acc) for (p, v) in participants}
    return res, sim.report(mark if not own else None)

"""Graph-level simulation of a payment channel network.

Each channel of capacity ``c`` is a knapsack with ``B_e = c / 2`` and a signed
balance in ``[-B_e, B_e]``; moving funds from ``node_a`` to ``node_b`` adds the
amount to the balance. Routing is hop-count BFS over the channels whose HTLC
window admits the amount, with no knowledge of balances. A transfer is
applied only if every hop's policy accepts it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .core import MIN_CAPACITY, PolicyKind, validate_config, decide
from .errors import DataError, EmptyGraph, MissingColumn, ParseError

EDGE_COLUMNS = ("node_a", "node_b", "scid", "capacity", "htlc_min", "htlc_max")
STATS_COLUMNS = ("policy", "range_mode", "seed", "attempted", "routed", "accepted", "resample_exhausted")
# Smallest capacity whose half clears the EXP capacity floor.
MIN_EDGE_CAPACITY = math.ceil(2 * MIN_CAPACITY)


@dataclass(frozen=True)
class ChannelEdge:
    node_a: str
    node_b: str
    scid: str
    capacity: int
    htlc_min: int
    htlc_max: int

    @property
    def B_e(self) -> float:
        return self.capacity / 2

    @property
    def pair(self) -> tuple[str, str]:
        return tuple(sorted((self.node_a, self.node_b)))


def load_edges(path) -> list[ChannelEdge]:
    """Parse the edge CSV. Only type checks; see :func:`prune_merge` for the rest."""
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_edges(fh)


def parse_edges(lines) -> list[ChannelEdge]:
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise MissingColumn("empty edge file (no header)") from None
    missing = [c for c in EDGE_COLUMNS if c not in header]
    if missing:
        raise MissingColumn(f"edge file lacks columns: {', '.join(missing)}")
    idx = {c: header.index(c) for c in EDGE_COLUMNS}
    edges = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line)
        values = {c: row[i].strip() for c, i in idx.items()}
        try:
            nums = {c: int(values[c]) for c in ("capacity", "htlc_min", "htlc_max")}
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
        edges.append(ChannelEdge(values["node_a"], values["node_b"], values["scid"], **nums))
    return edges


def write_edges(edges, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGE_COLUMNS)
        for e in edges:
            w.writerow([e.node_a, e.node_b, e.scid, e.capacity, e.htlc_min, e.htlc_max])


@dataclass
class PruneStats:
    input_records: int = 0
    merged: int = 0
    narrowed: int = 0
    multi_edges_removed: int = 0
    undersized_removed: int = 0
    output_edges: int = 0


class NetworkGraph:
    """Undirected channel graph with compact adjacency arrays for the kernels.

    Node indices follow the sorted order of node ids, so the smallest index
    sequence is also the lexicographically smallest id sequence.
    """

    def __init__(self, edges: list[ChannelEdge]):
        seen = set()
        pairs = set()
        for e in edges:
            if e.scid in seen:
                raise DataError(f"duplicate scid {e.scid}")
            if e.pair in pairs:
                raise DataError(f"parallel edges between {e.pair}")
            if e.node_a == e.node_b:
                raise DataError(f"self-loop on {e.node_a} ({e.scid})")
            seen.add(e.scid)
            pairs.add(e.pair)
        self.edges = list(edges)
        self.nodes = sorted({n for e in edges for n in (e.node_a, e.node_b)})
        self.index = {n: i for i, n in enumerate(self.nodes)}
        m = len(self.edges)
        self.node_a = np.array([self.index[e.node_a] for e in edges], dtype=np.int64)
        self.node_b = np.array([self.index[e.node_b] for e in edges], dtype=np.int64)
        self.capacity = np.array([e.capacity for e in edges], dtype=np.int64)
        self.htlc_min = np.array([e.htlc_min for e in edges], dtype=np.int64)
        self.htlc_max = np.array([e.htlc_max for e in edges], dtype=np.int64)
        self.htlc_lim = np.minimum(self.htlc_max, self.capacity)
        self.B_e = self.capacity / 2.0
        self.b_e = self.B_e / np.log(self.B_e) if m else np.zeros(0)
        self.balances = np.zeros(m, dtype=np.int64)
        self._build_csr()

    def _build_csr(self):
        n = len(self.nodes)
        ends = np.concatenate([self.node_a, self.node_b])
        others = np.concatenate([self.node_b, self.node_a])
        eids = np.concatenate([np.arange(len(self.edges))] * 2)
        order = np.lexsort((others, ends))
        self.nbr = others[order].astype(np.int64)
        self.eid = eids[order].astype(np.int64)
        counts = np.bincount(ends, minlength=n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    def __len__(self):
        return len(self.edges)

    def copy(self) -> "NetworkGraph":
        g = NetworkGraph(self.edges)
        g.balances = self.balances.copy()
        return g

    def reset(self):
        self.balances[:] = 0

    def balance(self, scid: str) -> int:
        return int(self.balances[self._scid_index()[scid]])

    def _scid_index(self):
        if not hasattr(self, "_scids"):
            self._scids = {e.scid: i for i, e in enumerate(self.edges)}
        return self._scids


def prune_merge(raw: list[ChannelEdge]) -> tuple[NetworkGraph, PruneStats]:
    """Merge same-SCID duplicates, then keep one edge per node pair.

    Duplicates take the largest HTLC minimum and the smallest HTLC maximum.
    Among parallel channels the highest capacity wins (ties: smallest scid).
    Channels too small to host EXP are dropped.
    """
    stats = PruneStats(input_records=len(raw))
    by_scid: dict[str, ChannelEdge] = {}
    for e in raw:
        prev = by_scid.get(e.scid)
        if prev is None:
            by_scid[e.scid] = e
            continue
        if prev.capacity != e.capacity:
            raise DataError(f"scid {e.scid}: capacities disagree ({prev.capacity} vs {e.capacity})")
        if prev.pair != e.pair:
            raise DataError(f"scid {e.scid}: endpoints disagree ({prev.pair} vs {e.pair})")
        merged = ChannelEdge(prev.node_a, prev.node_b, e.scid, e.capacity,
                             max(prev.htlc_min, e.htlc_min), min(prev.htlc_max, e.htlc_max))
        if merged.htlc_min > merged.htlc_max:
            raise DataError(f"scid {e.scid}: merged htlc_min {merged.htlc_min} > htlc_max {merged.htlc_max}")
        stats.merged += 1
        if (merged.htlc_min, merged.htlc_max) != (prev.htlc_min, prev.htlc_max):
            stats.narrowed += 1
        by_scid[e.scid] = merged

    best: dict[tuple[str, str], ChannelEdge] = {}
    for e in by_scid.values():
        if not 1 <= e.htlc_min <= e.htlc_max <= e.capacity:
            raise DataError(f"scid {e.scid}: need 1 <= htlc_min <= htlc_max <= capacity")
        cur = best.get(e.pair)
        if cur is None:
            best[e.pair] = e
            continue
        stats.multi_edges_removed += 1
        if e.capacity > cur.capacity or (e.capacity == cur.capacity and e.scid < cur.scid):
            best[e.pair] = e

    kept = []
    for e in sorted(best.values(), key=lambda e: e.scid):
        if e.capacity < MIN_EDGE_CAPACITY:
            stats.undersized_removed += 1
            continue
        kept.append(e)
    stats.output_edges = len(kept)
    return NetworkGraph(kept), stats


def route(graph: NetworkGraph, src: str, dst: str, amount: int) -> Optional[list[ChannelEdge]]:
    """Fewest-hop path admitting ``amount``; ``None`` if there is none."""
    if amount < 1:
        raise ValueError("amount must be >= 1")
    nodes, edges = _route_idx(graph, graph.index[src], graph.index[dst], amount)
    if edges is None:
        return None
    return [graph.edges[e] for e in edges]


def _route_idx(graph, s, d, amount):
    n = len(graph.nodes)
    path_nodes = np.empty(max(n, 1), dtype=np.int64)
    path_edges = np.empty(max(n, 1), dtype=np.int64)
    k = kernels.K.bfs_route(graph.indptr, graph.nbr, graph.eid, graph.htlc_min, graph.htlc_lim,
                            s, d, int(amount), path_nodes, path_edges)
    if k < 0:
        return None, None
    return path_nodes[: k + 1].copy(), path_edges[:k].copy()


@dataclass(frozen=True)
class TransferRequest:
    src: str
    dst: str
    amount: int

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("src and dst must differ")
        if self.amount < 1:
            raise ValueError("amount must be >= 1")


@dataclass(frozen=True)
class TransferOutcome:
    status: str  # "accepted" | "rejected" | "unroutable"
    hop: Optional[int] = None
    path: tuple = ()


def edge_config(graph: NetworkGraph, e: int, range_mode: str = "guarantee"):
    B = graph.B_e[e]
    cap = graph.b_e[e] if range_mode == "guarantee" else B
    m = max(1.0, min(float(graph.htlc_max[e]), cap))
    return validate_config(B=B, m=m, s0=0.0)


def attempt_transfer(graph: NetworkGraph, request: TransferRequest, policy: PolicyKind | str,
                     range_mode: str = "guarantee") -> TransferOutcome:
    """Route and atomically admit one transfer using the scalar policy code."""
    nodes, edges = _route_idx(graph, graph.index[request.src], graph.index[request.dst], request.amount)
    if edges is None:
        return TransferOutcome("unroutable")
    signed = []
    for k, e in enumerate(edges):
        x = request.amount if graph.node_a[e] == nodes[k] else -request.amount
        d = decide(policy, int(graph.balances[e]), x, edge_config(graph, e, range_mode))
        if not d.accepted:
            return TransferOutcome("rejected", hop=k + 1, path=tuple(int(i) for i in edges))
        signed.append(x)
    for e, x in zip(edges, signed):
        graph.balances[e] += x
    return TransferOutcome("accepted", path=tuple(int(i) for i in edges))


@dataclass
class NetworkStats:
    policy: str
    range_mode: str
    seed: int
    attempted: int = 0
    routed: int = 0
    accepted: int = 0
    resample_exhausted: int = 0
    # per-request detail, for invariant checks
    outcome: Optional[np.ndarray] = field(default=None, repr=False)
    amounts: Optional[np.ndarray] = field(default=None, repr=False)
    path_lengths: Optional[np.ndarray] = field(default=None, repr=False)
    reject_hop: Optional[np.ndarray] = field(default=None, repr=False)

    def row(self) -> dict:
        return {c: getattr(self, c) for c in STATS_COLUMNS}


def request_uniforms(count: int, seed: int, resample_limit: int) -> np.ndarray:
    """Uniform draws per request: src, dst, then one per amount attempt."""
    return np.random.default_rng(seed).random((count, 3 + resample_limit))


def simulate_network(graph: NetworkGraph, count: int, policy: PolicyKind | str,
                     range_mode: str = "guarantee", seed: int = 0, resample_limit: int = 10,
                     reset: bool = True) -> NetworkStats:
    """Draw ``count`` random requests and push them through the network.

    Per request: endpoints uniform over distinct nodes; cap
    ``U = floor(min(sender, receiver))`` with sender = best over src channels of
    ``min(htlc_max, B_e - dir * balance)`` and receiver = best over dst channels
    of ``min(htlc_max, B_e)``; amount uniform on ``1..U`` (full) or
    ``1..ceil(U / ln U)`` (guarantee, clipped to ``U``); up to
    ``resample_limit`` redraws when no route exists.
    """
    if len(graph) == 0 or len(graph.nodes) < 2:
        raise EmptyGraph("network needs at least one channel")
    if range_mode not in ("full", "guarantee"):
        raise ValueError(f"unknown range_mode {range_mode!r}")
    policy = PolicyKind(policy)
    if reset:
        graph.reset()
    stats = NetworkStats(policy.value, range_mode, seed)
    if count == 0:
        return stats
    u = request_uniforms(count, seed, resample_limit)
    outcome, amounts, lengths, hops, exhausted = kernels.K.simulate(
        graph.indptr, graph.nbr, graph.eid, graph.node_a, graph.htlc_min,
        graph.htlc_max.astype(np.float64), graph.htlc_lim, graph.B_e, graph.b_e,
        graph.balances, u, policy.code, range_mode == "guarantee", resample_limit)
    stats.attempted = count
    stats.routed = int(np.sum(outcome != kernels.OUT_UNROUTABLE))
    stats.accepted = int(np.sum(outcome == kernels.OUT_ACCEPTED))
    stats.resample_exhausted = int(exhausted.sum())
    stats.outcome, stats.amounts, stats.path_lengths, stats.reject_hop = outcome, amounts, lengths, hops
    return stats


# -- synthetic fixtures -------------------------------------------------------

def _node(i, width):
    return f"n{i:0{width}d}"


def synthetic_edges(spec: str, capacity: int = 100_000) -> list[ChannelEdge]:
    """Fixture topologies: ``path:N``, ``star:N``, ``ring:N``, ``random:N:DEG[:SEED]``."""
    kind, *args = spec.split(":")
    try:
        n = int(args[0])
    except (IndexError, ValueError):
        raise ValueError(f"bad synthetic spec {spec!r}") from None
    width = len(str(max(n - 1, 0)))
    pairs = []
    if kind == "path":
        pairs = [(i, i + 1) for i in range(n - 1)]
    elif kind == "star":
        pairs = [(0, i) for i in range(1, n)]
    elif kind == "ring":
        pairs = [(i, (i + 1) % n) for i in range(n)] if n > 2 else [(0, 1)]
    elif kind == "random":
        if len(args) < 2:
            raise ValueError("random spec needs N:DEG")
        return random_graph_edges(n, float(args[1]), int(args[2]) if len(args) > 2 else 0)
    else:
        raise ValueError(f"unknown synthetic topology {kind!r}")
    return [ChannelEdge(_node(a, width), _node(b, width), f"{kind}-{k}", capacity, 1, capacity)
            for k, (a, b) in enumerate(pairs)]


def random_graph_edges(n: int, mean_degree: float, seed: int = 0,
                       cap_range: tuple[int, int] = (10_000, 1_000_000)) -> list[ChannelEdge]:
    """Uniform random simple graph with ``round(n * deg / 2)`` edges.

    Capacities are log-uniform integers in ``cap_range``; ``htlc_min`` is 1 and
    ``htlc_max`` equals the capacity.
    """
    rng = np.random.default_rng(seed)
    target = int(round(n * mean_degree / 2))
    if target > n * (n - 1) // 2:
        raise ValueError("mean degree too high for a simple graph")
    width = len(str(n - 1))
    chosen = set()
    edges = []
    lo, hi = np.log(cap_range[0]), np.log(cap_range[1])
    while len(edges) < target:
        a, b = rng.integers(0, n, size=2)
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key in chosen:
            continue
        chosen.add(key)
        cap = int(np.exp(rng.uniform(lo, hi)))
        edges.append(ChannelEdge(_node(key[0], width), _node(key[1], width),
                                 f"rnd-{len(edges)}", cap, 1, cap))
    return edges


def synthetic_graph(spec: str) -> NetworkGraph:
    graph, _ = prune_merge(synthetic_edges(spec))
    return graph


def load_graph(path) -> tuple[NetworkGraph, PruneStats]:
    return prune_merge(load_edges(Path(path)))

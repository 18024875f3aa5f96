"""Quasi unit disk graph instances and subgraphs.

A QUDG over points in the plane has every pair at distance <= alpha as a
mandatory edge, no pair beyond distance 1, and an adversary-chosen subset
of the pairs in between.  All structural tie-breaking in the package goes
through the (length, id, id) edge order defined here, so floating-point
equal lengths never cause nondeterminism.
"""

from __future__ import annotations

import heapq
import math
import random
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .geometry import Point, dist

__all__ = [
    "GraphError",
    "EdgeId",
    "edge_id_less",
    "undirected_edge_id",
    "QudgInstance",
    "SpannerGraph",
    "build_qudg",
    "random_instance",
    "shortest_path",
    "dijkstra_lengths",
    "mst",
    "aspect_ratio",
    "components",
    "save_instance",
    "load_instance",
]


class GraphError(ValueError):
    """Invalid graph construction or query."""


class EdgeId(NamedTuple):
    """Totally ordered edge identifier: compare by length, then endpoint ids."""

    length: float
    src: int
    dst: int


def edge_id_less(e1: EdgeId, e2: EdgeId) -> bool:
    """Strict total order on edge ids (lexicographic on the triple)."""
    return tuple(e1) < tuple(e2)


def undirected_edge_id(length: float, u: int, v: int) -> EdgeId:
    """Canonical id of an undirected edge: endpoints in ascending order."""
    return EdgeId(length, u, v) if u < v else EdgeId(length, v, u)


class QudgInstance:
    """Immutable point set with the induced quasi unit disk edge set.

    Mandatory edges join pairs at distance <= alpha, adversary edges are a
    chosen subset of pairs with distance in (alpha, 1], and nothing longer
    than 1 is ever an edge.  Node ids are 0..n-1, indexing ``points``.
    """

    def __init__(
        self,
        points: Iterable[Point],
        alpha: float,
        adversary_edges: Iterable[tuple[int, int]] = (),
        meta: dict | None = None,
    ) -> None:
        pts = tuple(points)
        if not pts:
            raise GraphError("instance needs at least one point")
        if not (0.0 < alpha <= 1.0):
            raise GraphError(f"alpha must be in (0, 1], got {alpha}")
        seen: dict[tuple[float, float], int] = {}
        for i, p in enumerate(pts):
            key = (p.x, p.y)
            if key in seen:
                raise GraphError(f"duplicate coordinates at ids {seen[key]} and {i}")
            seen[key] = i
        self.points = pts
        self.alpha = float(alpha)
        self.meta: dict = dict(meta or {})

        mandatory, band = _classify_pairs(pts, self.alpha)
        adversary = set()
        for u, v in adversary_edges:
            pair = (u, v) if u < v else (v, u)
            if pair not in band:
                raise GraphError(
                    f"adversary edge {pair} is not in the (alpha, 1] band"
                )
            adversary.add(pair)
        self.adversary_edges = frozenset(adversary)
        self.band_candidates = frozenset(band)
        self.edges = frozenset(mandatory | adversary)

        adj: dict[int, dict[int, float]] = {i: {} for i in range(len(pts))}
        for u, v in self.edges:
            d = dist(pts[u], pts[v])
            adj[u][v] = d
            adj[v][u] = d
        self.adjacency = adj

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def nodes(self) -> range:
        return range(len(self.points))

    def length(self, u: int, v: int) -> float:
        return dist(self.points[u], self.points[v])

    def has_edge(self, u: int, v: int) -> bool:
        pair = (u, v) if u < v else (v, u)
        return pair in self.edges

    def neighbors(self, u: int) -> dict[int, float]:
        return self.adjacency[u]

    def edge_lengths(self) -> Iterator[float]:
        for u, v in self.edges:
            yield self.adjacency[u][v]

    def edge_id(self, u: int, v: int) -> EdgeId:
        return undirected_edge_id(self.length(u, v), u, v)

    def __repr__(self) -> str:
        return (
            f"QudgInstance(n={self.n}, alpha={self.alpha}, "
            f"edges={len(self.edges)}, band={len(self.adversary_edges)})"
        )


def _classify_pairs(
    pts: tuple[Point, ...], alpha: float
) -> tuple[set[tuple[int, int]], set[tuple[int, int]]]:
    """Split all pairs into mandatory (<= alpha) and band ((alpha, 1]) sets.

    A vectorized squared-distance pass narrows the candidates; the decision
    for each candidate uses the same scalar distance as everything else.
    """
    n = len(pts)
    mandatory: set[tuple[int, int]] = set()
    band: set[tuple[int, int]] = set()
    if n < 2:
        return mandatory, band
    coords = np.array([(p.x, p.y) for p in pts])
    diff = coords[:, None, :] - coords[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    iu, ju = np.triu_indices(n, k=1)
    near = d2[iu, ju] <= 1.0 + 1e-9
    for u, v in zip(iu[near].tolist(), ju[near].tolist()):
        d = dist(pts[u], pts[v])
        if d <= alpha:
            mandatory.add((u, v))
        elif d <= 1.0:
            band.add((u, v))
    return mandatory, band


def build_qudg(
    points: Iterable[Point],
    alpha: float,
    adversary_policy: str = "none",
    seed: int | None = None,
    band_p: float = 0.5,
    meta: dict | None = None,
) -> QudgInstance:
    """Construct a QUDG with the adversary band decided by policy.

    Policies: "none" refuses every band pair, "all" accepts every band
    pair, "random" accepts each independently with probability band_p
    (seeded, iterating pairs in sorted order, so fixed seed is fully
    reproducible).
    """
    pts = tuple(points)
    probe = QudgInstance(pts, alpha)
    if adversary_policy == "none":
        chosen: set[tuple[int, int]] = set()
    elif adversary_policy == "all":
        chosen = set(probe.band_candidates)
    elif adversary_policy == "random":
        if not (0.0 <= band_p <= 1.0):
            raise GraphError(f"band_p must be in [0, 1], got {band_p}")
        rng = random.Random(f"{seed}:band")
        chosen = {
            pair for pair in sorted(probe.band_candidates) if rng.random() < band_p
        }
    else:
        raise GraphError(f"unknown adversary policy {adversary_policy!r}")
    info = dict(meta or {})
    info.update(
        adversary_policy=adversary_policy,
        seed=seed,
        band_p=band_p if adversary_policy == "random" else None,
    )
    return QudgInstance(pts, alpha, chosen, info)


def random_instance(
    n: int,
    side: float,
    alpha: float,
    adversary_policy: str = "none",
    seed: int = 0,
    band_p: float = 0.5,
    require_connected: bool = True,
    max_tries: int = 32,
) -> QudgInstance:
    """Uniform random points in [0, side]^2 built into a QUDG.

    With require_connected, resamples (bounded) until the edge set is
    connected; the attempt that succeeded is recorded in meta.
    """
    if n < 1:
        raise GraphError("need at least one node")
    for attempt in range(max_tries):
        rng = random.Random(f"{seed}:points:{attempt}")
        pts = [
            Point(rng.uniform(0.0, side), rng.uniform(0.0, side)) for _ in range(n)
        ]
        inst = build_qudg(
            pts,
            alpha,
            adversary_policy,
            seed=seed,
            band_p=band_p,
            meta={"n": n, "side": side, "attempt": attempt},
        )
        if not require_connected or len(components(inst)) == 1:
            return inst
    raise GraphError(
        f"no connected instance in {max_tries} tries (n={n}, side={side}, "
        f"alpha={alpha}, seed={seed}); lower side or raise n"
    )


class SpannerGraph:
    """Mutable subgraph of a QudgInstance.

    Edges are stored under their ascending endpoint pair with the length
    cached; each edge may carry a provenance tag naming the construction
    step that added it.
    """

    def __init__(self, inst: QudgInstance, meta: dict | None = None) -> None:
        self.inst = inst
        self.edges: dict[tuple[int, int], float] = {}
        self.tags: dict[tuple[int, int], str] = {}
        self.adjacency: dict[int, dict[int, float]] = {i: {} for i in inst.nodes}
        self.meta: dict = dict(meta or {})

    @classmethod
    def full(cls, inst: QudgInstance) -> "SpannerGraph":
        g = cls(inst)
        for u, v in sorted(inst.edges):
            g.add_edge(u, v, tag="input")
        return g

    def add_edge(self, u: int, v: int, tag: str = "") -> None:
        pair = (u, v) if u < v else (v, u)
        if not self.inst.has_edge(*pair):
            raise GraphError(f"edge {pair} does not exist in the instance")
        if pair in self.edges:
            return
        d = self.inst.adjacency[pair[0]][pair[1]]
        self.edges[pair] = d
        if tag:
            self.tags[pair] = tag
        self.adjacency[pair[0]][pair[1]] = d
        self.adjacency[pair[1]][pair[0]] = d

    def has_edge(self, u: int, v: int) -> bool:
        pair = (u, v) if u < v else (v, u)
        return pair in self.edges

    def neighbors(self, u: int) -> dict[int, float]:
        return self.adjacency[u]

    @property
    def nodes(self) -> range:
        return self.inst.nodes

    @property
    def points(self) -> tuple[Point, ...]:
        return self.inst.points

    def edge_count(self) -> int:
        return len(self.edges)

    def total_weight(self) -> float:
        return math.fsum(self.edges.values())

    def edge_lengths(self) -> Iterator[float]:
        yield from self.edges.values()

    def edge_id(self, u: int, v: int) -> EdgeId:
        pair = (u, v) if u < v else (v, u)
        return EdgeId(self.edges[pair], *pair)

    def edge_items(self) -> Iterator[tuple[int, int, float]]:
        for (u, v), d in self.edges.items():
            yield u, v, d

    def copy(self) -> "SpannerGraph":
        g = SpannerGraph(self.inst)
        for (u, v), d in self.edges.items():
            g.add_edge(u, v, tag=self.tags.get((u, v), ""))
        g.meta = dict(self.meta)
        return g

    def max_degree(self) -> int:
        return max((len(nb) for nb in self.adjacency.values()), default=0)

    def __repr__(self) -> str:
        return f"SpannerGraph(n={self.inst.n}, edges={len(self.edges)})"


def shortest_path(g, u: int, v: int) -> tuple[float, list[int]] | None:
    """Shortest Euclidean-weighted path from u to v, or None if unreachable.

    Among equal-length paths the lexicographically smallest node-id
    sequence wins.  The heap carries (distance, path-tuple) labels; with
    positive weights a prefix of an optimal label is itself optimal, so
    plain Dijkstra settles every node on its best label.
    """
    adj = g.adjacency
    if u not in adj or v not in adj:
        raise GraphError(f"node {u if u not in adj else v} not in graph")
    if u == v:
        return 0.0, [u]
    heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (u,))]
    done: set[int] = set()
    while heap:
        d, path = heapq.heappop(heap)
        node = path[-1]
        if node in done:
            continue
        done.add(node)
        if node == v:
            return d, list(path)
        for w, lw in adj[node].items():
            if w not in done:
                heapq.heappush(heap, (d + lw, path + (w,)))
    return None


def dijkstra_lengths(
    adj: dict[int, dict[int, float]],
    src: int,
    cutoff: float | None = None,
    allowed: set[int] | None = None,
) -> dict[int, float]:
    """Shortest-path lengths from src, skipping anything beyond cutoff.

    With ``allowed``, the search never leaves that node set (src should be
    a member; nodes outside it are unreachable by definition).
    """
    out = {src: 0.0}
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > out.get(u, math.inf):
            continue
        for w, lw in adj.get(u, {}).items():
            if allowed is not None and w not in allowed:
                continue
            nd = d + lw
            if cutoff is not None and nd > cutoff:
                continue
            if nd < out.get(w, math.inf):
                out[w] = nd
                heapq.heappush(heap, (nd, w))
    return out


def components(g) -> list[list[int]]:
    """Connected components as sorted id lists, smallest member first."""
    adj = g.adjacency
    seen: set[int] = set()
    comps: list[list[int]] = []
    for start in sorted(adj):
        if start in seen:
            continue
        stack = [start]
        comp = []
        seen.add(start)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        comps.append(sorted(comp))
    return sorted(comps)


def mst(g) -> SpannerGraph:
    """Minimum spanning tree with ties broken by the edge-id total order.

    The total order makes the tree unique, so any correct algorithm that
    respects it returns the same edge set; this one scans edges in
    ascending id with union-find.
    """
    comps = components(g)
    if len(comps) != 1:
        raise GraphError(f"graph is disconnected; components: {comps}")
    inst = g.inst if isinstance(g, SpannerGraph) else g
    source = g if isinstance(g, SpannerGraph) else SpannerGraph.full(g)
    parent = {i: i for i in source.nodes}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = SpannerGraph(inst)
    ordered = sorted(EdgeId(d, u, v) for (u, v), d in source.edges.items())
    for e in ordered:
        ru, rv = find(e.src), find(e.dst)
        if ru != rv:
            parent[ru] = rv
            tree.add_edge(e.src, e.dst, tag="mst")
            if tree.edge_count() == inst.n - 1:
                break
    return tree


def aspect_ratio(edges) -> float:
    """Longest edge length divided by shortest, over any edge collection.

    Accepts plain lengths, (length, ...) tuples, or objects exposing
    edge_lengths().
    """
    if hasattr(edges, "edge_lengths"):
        lengths = list(edges.edge_lengths())
    else:
        lengths = []
        for item in edges:
            if isinstance(item, (int, float)):
                lengths.append(float(item))
            else:
                lengths.append(float(item[0]))
    if not lengths:
        raise GraphError("aspect ratio of an empty edge set")
    if min(lengths) <= 0.0:
        raise GraphError("aspect ratio needs positive lengths")
    return max(lengths) / min(lengths)


def save_instance(inst: QudgInstance, path) -> None:
    """Write the line-oriented instance format (exact decimal round-trip)."""
    lines = [f"qudg {inst.n} {inst.alpha!r}"]
    for i, p in enumerate(inst.points):
        lines.append(f"{i} {p.x!r} {p.y!r}")
    for u, v in sorted(inst.adversary_edges):
        lines.append(f"band {u} {v}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path) -> QudgInstance:
    """Read an instance written by save_instance.

    Node lines may appear in any order but the ids must be exactly
    0..n-1.  Blank lines and '#' comments are skipped.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = [ln.strip() for ln in fh]
    lines = [ln for ln in raw if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("qudg "):
        raise GraphError(f"{path}: missing 'qudg <n> <alpha>' header")
    try:
        _, n_s, alpha_s = lines[0].split()
        n, alpha = int(n_s), float(alpha_s)
    except ValueError as exc:
        raise GraphError(f"{path}: bad header {lines[0]!r}") from exc
    coords: dict[int, Point] = {}
    band: list[tuple[int, int]] = []
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "band":
            if len(parts) != 3:
                raise GraphError(f"{path}: bad band line {ln!r}")
            band.append((int(parts[1]), int(parts[2])))
        else:
            if len(parts) != 3:
                raise GraphError(f"{path}: bad node line {ln!r}")
            i = int(parts[0])
            if i in coords:
                raise GraphError(f"{path}: duplicate node id {i}")
            coords[i] = Point(float(parts[1]), float(parts[2]))
    if sorted(coords) != list(range(n)):
        raise GraphError(f"{path}: node ids are not exactly 0..{n - 1}")
    pts = [coords[i] for i in range(n)]
    return QudgInstance(pts, alpha, band, meta={"source": str(path)})

"""Spanner subroutines shared by the centralized and distributed paths.

The greedy path filter, Yao cone selection with its reverse pass, and the
ordering-driven Yao variant.  The per-cell helpers are pure functions of
their explicit inputs, so a message-passing node that has gathered the
same inputs computes bit-identical results.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .geometry import TAU, ConeSystem, Point, cone_index, dist
from .graph import (
    EdgeId,
    QudgInstance,
    SpannerGraph,
    dijkstra_lengths,
    undirected_edge_id,
)

__all__ = [
    "KernelError",
    "DirectedEdgeSet",
    "greedy_filter",
    "greedy_spanner",
    "cell_spanner_edges",
    "greedy_cell_filter",
    "yao_select",
    "yao_arcs_for_node",
    "reverse_yao",
    "reverse_yao_arcs_for_node",
    "ordered_yao",
    "ordered_yao_core",
    "ordered_yao_steps",
    "select_connectors",
]

SIXTH = math.pi / 3.0


class KernelError(ValueError):
    """Kernel precondition violated."""


@dataclass
class DirectedEdgeSet:
    """Ordered (tail, head) pairs whose undirected edges exist in the instance."""

    inst: QudgInstance
    arcs: set[tuple[int, int]] = field(default_factory=set)

    def add(self, tail: int, head: int) -> None:
        if not self.inst.has_edge(tail, head):
            raise KernelError(f"arc ({tail}, {head}) has no underlying edge")
        self.arcs.add((tail, head))

    def undirected_pairs(self) -> set[tuple[int, int]]:
        return {(u, v) if u < v else (v, u) for u, v in self.arcs}

    def incident_count(self, u: int) -> int:
        return sum(1 for a in self.arcs if u in a)

    def __len__(self) -> int:
        return len(self.arcs)


def greedy_filter(edge_ids: Iterable[EdgeId], eps: float) -> list[EdgeId]:
    """Classic path-greedy pass over edges in ascending id order.

    An edge is kept iff the graph of already-kept edges has no path of
    length <= (1+eps) times the edge length.
    """
    if eps <= 0.0:
        raise KernelError(f"eps must be positive, got {eps}")
    adj: dict[int, dict[int, float]] = {}
    kept: list[EdgeId] = []
    for e in sorted(edge_ids):
        budget = (1.0 + eps) * e.length
        if e.src in adj and e.dst in adj:
            reach = dijkstra_lengths(adj, e.src, cutoff=budget)
            if e.dst in reach:
                continue
        kept.append(e)
        adj.setdefault(e.src, {})[e.dst] = e.length
        adj.setdefault(e.dst, {})[e.src] = e.length
    return kept


def greedy_spanner(g: SpannerGraph, eps: float) -> SpannerGraph:
    """Greedy (1+eps)-spanner of the given graph's edge set."""
    ids = [EdgeId(d, u, v) for (u, v), d in g.edges.items()]
    out = SpannerGraph(g.inst)
    for e in greedy_filter(ids, eps):
        out.add_edge(e.src, e.dst, tag="greedy")
    return out


def cell_spanner_edges(
    ids: Sequence[int], points: Sequence[Point], eps: float
) -> list[tuple[int, int]]:
    """Greedy spanner of the complete graph on one cell's nodes.

    Pure in (ids, coordinates, eps): the distributed leader of a cell
    computes exactly this.
    """
    edge_ids = [
        undirected_edge_id(dist(points[u], points[v]), u, v)
        for i, u in enumerate(ids)
        for v in ids[i + 1 :]
    ]
    return [(e.src, e.dst) for e in greedy_filter(edge_ids, eps)]


def greedy_cell_filter(
    edge_ids: Iterable[EdgeId],
    q_adj: dict[int, dict[int, float]],
    eps: float,
    allowed: set[int] | None = None,
) -> list[EdgeId]:
    """Greedy pass whose queries run on an external query graph.

    Edges are processed in ascending id order; each query asks whether
    q_adj (optionally restricted to ``allowed`` nodes) already contains a
    path within budget.  Accepted edges are added to q_adj in place;
    rejected edges never enter it.
    """
    if eps <= 0.0:
        raise KernelError(f"eps must be positive, got {eps}")
    kept: list[EdgeId] = []
    for e in sorted(edge_ids):
        budget = (1.0 + eps) * e.length
        reach = dijkstra_lengths(q_adj, e.src, cutoff=budget, allowed=allowed)
        if e.dst in reach:
            continue
        kept.append(e)
        q_adj.setdefault(e.src, {})[e.dst] = e.length
        q_adj.setdefault(e.dst, {})[e.src] = e.length
    return kept


def yao_arcs_for_node(
    u: int, nbrs: Mapping[int, float], points, k: int
) -> list[tuple[int, int]]:
    """One node's cone selection: smallest undirected id per cone.

    points only needs item access by node id, so both a global sequence
    and a local coordinate table work.
    """
    if not nbrs:
        return []
    cones = ConeSystem(k, points[u])
    best: dict[int, EdgeId] = {}
    for v, d in nbrs.items():
        c = cone_index(cones, points[v])
        eid = undirected_edge_id(d, u, v)
        if c not in best or eid < best[c]:
            best[c] = eid
    out = []
    for eid in best.values():
        out.append((u, eid.dst if eid.src == u else eid.src))
    return out


def reverse_yao_arcs_for_node(
    head: int, tails: Iterable[tuple[int, float]], points, k: int
) -> list[tuple[int, int]]:
    """One head's pruning of incoming arcs: smallest undirected id per cone."""
    cones = ConeSystem(k, points[head])
    best: dict[int, tuple[EdgeId, int]] = {}
    for tail, d in tails:
        c = cone_index(cones, points[tail])
        eid = undirected_edge_id(d, tail, head)
        cur = best.get(c)
        if cur is None or eid < cur[0]:
            best[c] = (eid, tail)
    return [(tail, head) for _, tail in best.values()]


def yao_select(e0: SpannerGraph, k: int) -> DirectedEdgeSet:
    """Per node and cone, keep one outgoing edge of smallest undirected id."""
    if k < 6:
        raise KernelError(f"cone count must be >= 6, got {k}")
    pts = e0.points
    out = DirectedEdgeSet(e0.inst)
    for u in sorted(e0.nodes):
        for tail, head in yao_arcs_for_node(u, e0.adjacency[u], pts, k):
            out.add(tail, head)
    return out


def reverse_yao(ey: DirectedEdgeSet, k: int) -> DirectedEdgeSet:
    """Per head node and cone, keep one incoming arc of smallest undirected id."""
    if k < 6:
        raise KernelError(f"cone count must be >= 6, got {k}")
    pts = ey.inst.points
    by_head: dict[int, list[tuple[int, float]]] = {}
    for tail, head in sorted(ey.arcs):
        by_head.setdefault(head, []).append((tail, ey.inst.length(tail, head)))
    out = DirectedEdgeSet(ey.inst)
    for head in sorted(by_head):
        for arc in reverse_yao_arcs_for_node(head, by_head[head], pts, k):
            out.add(*arc)
    return out


def _angle(src: Point, dst: Point) -> float:
    a = math.atan2(dst.y - src.y, dst.x - src.x)
    return a + TAU if a < 0.0 else a


def smallest_degree_last_order(
    nodes: Sequence[int], adj: Mapping[int, set[int]]
) -> dict[int, int]:
    """Rank nodes by iteratively removing a minimum-degree node (ties: id).

    The first node removed gets the largest rank, so ascending rank is
    the processing order and low-degree nodes are handled last.
    """
    degree = {u: len(adj[u]) for u in nodes}
    alive = set(nodes)
    removed: list[int] = []
    heap = [(d, u) for u, d in degree.items()]
    heapq.heapify(heap)
    while heap:
        d, u = heapq.heappop(heap)
        if u not in alive or degree[u] != d:
            continue
        alive.discard(u)
        removed.append(u)
        for v in adj[u]:
            if v in alive:
                degree[v] -= 1
                heapq.heappush(heap, (degree[v], v))
    n = len(removed)
    return {u: n - i for i, u in enumerate(removed)}


def ordered_yao_steps(
    nodes: Sequence[int],
    edges: Iterable[tuple[int, int]],
    points: Sequence[Point],
) -> list[tuple[int, int, int]]:
    """Selection events of the ordering-driven Yao pass, with provenance.

    Yields (apex, a, b) triples with a < b: the node being processed and
    the pair it selected.  Spokes have the apex as one endpoint; chain
    pairs join two neighbors of the apex lying in one cone, so both are
    within the cone width of each other and strictly closer than the
    longer spoke.  The same pair may be emitted under several apexes.
    """
    adj: dict[int, set[int]] = {u: set() for u in nodes}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    rank = smallest_degree_last_order(nodes, adj)
    out: list[tuple[int, int, int]] = []
    for u in sorted(nodes, key=lambda x: rank[x]):
        processed = [v for v in adj[u] if rank[v] < rank[u]]
        pending = [v for v in adj[u] if rank[v] > rank[u]]
        if len(processed) > 5:
            raise KernelError(
                f"node {u} has {len(processed)} processed neighbors; "
                "input graph is not planar"
            )
        if not pending:
            continue
        pu = points[u]
        if processed:
            rays = sorted({_angle(pu, points[v]) for v in processed})
        else:
            rays = [0.0]
        sectors: list[tuple[float, float]] = []
        for i, a in enumerate(rays):
            b = rays[(i + 1) % len(rays)]
            width = (b - a) % TAU
            if width == 0.0:
                width = TAU  # single distinct ray: the whole circle
            sectors.append((a, width))
        for a, width in sectors:
            pieces = 6 if width >= TAU else max(1, math.ceil(width / SIXTH))
            cone_w = width / pieces
            buckets: dict[int, list[tuple[float, float, int]]] = {}
            for v in pending:
                rel = (_angle(pu, points[v]) - a) % TAU
                if rel >= width:
                    continue
                idx = min(int(rel // cone_w), pieces - 1)
                buckets.setdefault(idx, []).append(
                    (rel, dist(pu, points[v]), v)
                )
            for group in buckets.values():
                group.sort()
                spoke = min(
                    group, key=lambda t: (t[1], undirected_edge_id(t[1], u, t[2]))
                )
                out.append((u, *sorted((u, spoke[2]))))
                for (_, _, s1), (_, _, s2) in zip(group, group[1:]):
                    out.append((u, *sorted((s1, s2))))
    return out


def ordered_yao_core(
    nodes: Sequence[int],
    edges: Iterable[tuple[int, int]],
    points: Sequence[Point],
) -> list[tuple[int, int]]:
    """Ordering-driven Yao selection on an explicit edge list.

    Processes nodes in the smallest-degree-last order.  At each node the
    rays to already-processed neighbors cut the circle into sectors, each
    sector is split into the fewest equal half-open cones of width at
    most pi/3, and per cone the shortest spoke is kept along with the
    chain between angularly consecutive unprocessed neighbors.  Raises if
    a node sees more than 5 processed neighbors (impossible for planar
    input).
    """
    return sorted({(a, b) for _, a, b in ordered_yao_steps(nodes, edges, points)})


def ordered_yao(g: SpannerGraph, validate: bool = True) -> SpannerGraph:
    """Degree-bounded planar spanner of a planar input graph.

    With validate on, the input is first checked for planarity (the
    algorithm's guarantees need it).  Chain edges connect neighbors of a
    common node at most a cone width apart, so on unit disk instances
    they always exist in the instance.
    """
    if validate:
        from .verify import planarity_check

        ok, witness = planarity_check(g)
        if not ok:
            raise KernelError(f"input graph is not planar; crossing pair {witness}")
    out = SpannerGraph(g.inst)
    for u, v in ordered_yao_core(list(g.nodes), list(g.edges), g.points):
        out.add_edge(u, v, tag="oyao")
    return out


def select_connectors(
    edge_ids: Iterable[EdgeId],
    center_of: Mapping[int, int],
    mode: str = "representative",
) -> list[EdgeId]:
    """Pick inter-cluster connector edges from a candidate set.

    literal: keep exactly the candidates whose both endpoints are cluster
    centers.  representative: for every pair of distinct clusters with at
    least one candidate between their member sets, keep the smallest-id
    such candidate, so no cluster pair is silently disconnected.
    """
    if mode == "literal":
        return sorted(
            e
            for e in edge_ids
            if center_of[e.src] == e.src and center_of[e.dst] == e.dst
        )
    if mode == "representative":
        best: dict[tuple[int, int], EdgeId] = {}
        for e in sorted(edge_ids):
            cu, cv = center_of[e.src], center_of[e.dst]
            if cu == cv:
                continue
            key = (cu, cv) if cu < cv else (cv, cu)
            if key not in best:
                best[key] = e
        return sorted(best.values())
    raise KernelError(f"unknown connector mode {mode!r}")

"""Delaunay triangulation and its neighborhood-limited variants.

Provides an exact-predicate incremental Delaunay triangulation, the
unit-capped Delaunay graph, a variant each node can compute from its own
1-hop view, and a planarized form of that variant obtained by resolving
edge crossings with deterministic witness comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .geometry import (
    GeometryError,
    Point,
    circumcircle_sign,
    circumradius2,
    dist,
    orientation,
    segments_properly_intersect,
)
from .graph import QudgInstance, SpannerGraph, build_qudg, undirected_edge_id


class DelaunayError(ValueError):
    """Raised for inputs a triangulation routine cannot accept."""


def _pair(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Triangulation:
    """A triangulation of a planar point set.

    ``triangles`` holds ascending index triples; ``edges`` holds ascending
    index pairs and includes chain edges of degenerate (collinear) inputs,
    which admit no triangle at all.
    """

    points: tuple[Point, ...]
    triangles: tuple[tuple[int, int, int], ...]
    edges: frozenset[tuple[int, int]]

    def edge_lengths(self) -> dict[tuple[int, int], float]:
        return {
            (u, v): dist(self.points[u], self.points[v]) for u, v in self.edges
        }


class _TriMesh:
    """Mutable triangle soup with an edge-to-triangle index."""

    def __init__(self, pts: Sequence[Point]):
        self.pts = pts
        self.tris: set[tuple[int, int, int]] = set()
        self.by_edge: dict[tuple[int, int], set[tuple[int, int, int]]] = {}
        self.flips = 0

    def add(self, a: int, b: int, c: int) -> tuple[int, int, int]:
        t = tuple(sorted((a, b, c)))
        self.tris.add(t)
        for e in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])):
            self.by_edge.setdefault(e, set()).add(t)
        return t

    def remove(self, t: tuple[int, int, int]) -> None:
        self.tris.discard(t)
        for e in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])):
            owners = self.by_edge.get(e)
            if owners is not None:
                owners.discard(t)
                if not owners:
                    del self.by_edge[e]

    def apex(self, t: tuple[int, int, int], e: tuple[int, int]) -> int:
        for v in t:
            if v not in e:
                return v
        raise AssertionError("edge not part of triangle")

    def _should_flip(self, e: tuple[int, int], c: int, d: int) -> bool:
        a, b = e
        pts = self.pts
        s = circumcircle_sign(pts[a], pts[b], pts[c], pts[d])
        if s > 0:
            return True
        if s < 0:
            return False
        # Cocircular quad: both diagonals are admissible, so pick the one
        # with the smaller undirected edge identity.  This keeps the
        # triangulation canonical regardless of insertion order.
        old_id = undirected_edge_id(dist(pts[a], pts[b]), a, b)
        new_id = undirected_edge_id(dist(pts[c], pts[d]), c, d)
        return new_id < old_id

    def legalize(self, seed_edges: Iterable[tuple[int, int]]) -> None:
        limit = 40 * len(self.pts) ** 2 + 1000
        stack = list(seed_edges)
        while stack:
            e = stack.pop()
            owners = self.by_edge.get(e)
            if owners is None or len(owners) != 2:
                continue
            t1, t2 = sorted(owners)
            c = self.apex(t1, e)
            d = self.apex(t2, e)
            if not self._should_flip(e, c, d):
                continue
            self.flips += 1
            if self.flips > limit:
                raise DelaunayError("legalization failed to terminate")
            self.remove(t1)
            self.remove(t2)
            a, b = e
            self.add(c, d, a)
            self.add(c, d, b)
            stack.extend((_pair(a, c), _pair(a, d), _pair(b, c), _pair(b, d)))


def delaunay(points: Iterable[Point]) -> Triangulation:
    """Delaunay triangulation via lexicographic incremental insertion.

    Needs at least two distinct points.  Two points give a single edge and
    a fully collinear input gives the chain of consecutive edges along the
    line.  Cocircular groups are resolved canonically: among the admissible
    diagonals of a cocircular quad the one with the smaller undirected edge
    identity wins, so equal inputs always produce equal triangulations.
    """
    pts = tuple(points)
    n = len(pts)
    if n < 2:
        raise DelaunayError("need at least two points to triangulate")
    if len({(p.x, p.y) for p in pts}) != n:
        raise DelaunayError("duplicate points cannot be triangulated")
    order = sorted(range(n), key=lambda i: (pts[i].x, pts[i].y))
    if n == 2:
        e = _pair(order[0], order[1])
        return Triangulation(pts, (), frozenset({e}))

    chain = [order[0], order[1]]
    m = 2
    while m < n and orientation(pts[chain[0]], pts[chain[1]], pts[order[m]]) == 0:
        chain.append(order[m])
        m += 1
    if m == n:
        edges = frozenset(_pair(a, b) for a, b in zip(chain, chain[1:]))
        return Triangulation(pts, (), edges)

    mesh = _TriMesh(pts)
    first = order[m]
    for a, b in zip(chain, chain[1:]):
        mesh.add(first, a, b)
    if orientation(pts[chain[0]], pts[chain[1]], pts[first]) > 0:
        hull = chain + [first]
    else:
        hull = list(reversed(chain)) + [first]
    mesh.legalize(_pair(a, b) for a, b in zip(chain, chain[1:]))

    for idx in range(m + 1, n):
        p = order[idx]
        h = len(hull)
        vis = [
            orientation(pts[hull[i]], pts[hull[(i + 1) % h]], pts[p]) < 0
            for i in range(h)
        ]
        if not any(vis):
            raise DelaunayError("insertion point sees no hull edge")
        if all(vis):
            raise DelaunayError("insertion point sees every hull edge")
        # The strictly visible edges form one contiguous circular arc.
        start = next(i for i in range(h) if not vis[i] and vis[(i + 1) % h])
        arc = []
        j = (start + 1) % h
        while vis[j]:
            arc.append(j)
            j = (j + 1) % h
        if len(arc) != sum(vis):
            raise DelaunayError("visible hull edges are not contiguous")
        bases = []
        for i in arc:
            a, b = hull[i], hull[(i + 1) % h]
            mesh.add(p, a, b)
            bases.append(_pair(a, b))
        # Keep the arc's boundary vertices, drop its interior, splice in p.
        keep = [hull[(j + k) % h] for k in range(h - len(arc) + 1)]
        hull = keep + [p]
        mesh.legalize(bases)

    tris = tuple(sorted(mesh.tris))
    edges = frozenset(mesh.by_edge)
    return Triangulation(pts, tris, edges)


def udel(source: QudgInstance | Iterable[Point]) -> SpannerGraph:
    """Unit-capped Delaunay graph: Delaunay edges of length at most 1.

    Accepts a point sequence, or a unit-disk instance (alpha == 1) whose
    points are used directly so the result shares its identity.
    """
    if isinstance(source, QudgInstance):
        if source.alpha != 1:
            raise DelaunayError("unit-capped Delaunay needs a unit-disk instance")
        inst = source
    else:
        inst = build_qudg(list(source), alpha=1.0)
    tri = delaunay(inst.points)
    g = SpannerGraph(inst, meta={"kind": "udel"})
    for u, v in sorted(tri.edges):
        if inst.has_edge(u, v):
            g.add_edge(u, v, tag="udel")
    return g


def _gabriel_open_disk_sign(a: Point, b: Point, x: Point) -> int:
    """Sign of (a-x)·(b-x): negative iff x is strictly inside the circle
    with diameter ab.  Float fast path, exact rational fallback."""
    t = (a.x - x.x) * (b.x - x.x) + (a.y - x.y) * (b.y - x.y)
    scale = (
        abs(a.x - x.x) * abs(b.x - x.x)
        + abs(a.y - x.y) * abs(b.y - x.y)
    )
    if abs(t) > 1e-12 * scale:
        return 1 if t > 0 else -1
    exact = (Fraction(a.x) - Fraction(x.x)) * (Fraction(b.x) - Fraction(x.x)) + (
        Fraction(a.y) - Fraction(x.y)
    ) * (Fraction(b.y) - Fraction(x.y))
    if exact > 0:
        return 1
    if exact < 0:
        return -1
    return 0


def ldel1(inst: QudgInstance) -> SpannerGraph:
    """Delaunay-like graph computable from 1-hop neighborhoods.

    Requires a unit-disk instance (alpha == 1).  The edge set is the union
    of the diametral-circle-empty edges and the edges of triangles, with
    all three sides present in the instance, whose circumcircle contains no
    node adjacent to any corner.  Each such triangle is discovered by every
    corner from its own neighborhood triangulation and kept only when all
    three corners agree, which is exactly the check a distributed node can
    run.  The result's meta carries the agreed triangles, the
    diametral-empty edge set and exact squared circumradius witnesses,
    which the planarization step consumes.
    """
    if inst.alpha != 1:
        raise DelaunayError("1-hop Delaunay needs a unit-disk instance")
    pts = inst.points
    n = len(pts)

    votes: dict[tuple[int, int, int], int] = {}
    for u in range(n):
        nbrs = sorted(inst.neighbors(u))
        if len(nbrs) < 2:
            continue
        local = [u] + nbrs
        tri = delaunay([pts[i] for i in local])
        for t in tri.triangles:
            if 0 not in t:
                continue
            a, b, c = (local[i] for i in t)
            gt = tuple(sorted((a, b, c)))
            if not (
                inst.has_edge(gt[0], gt[1])
                and inst.has_edge(gt[0], gt[2])
                and inst.has_edge(gt[1], gt[2])
            ):
                continue
            votes[gt] = votes.get(gt, 0) + 1
    confirmed = sorted(t for t, k in votes.items() if k == 3)

    gabriel: set[tuple[int, int]] = set()
    for u, v in inst.edges:
        ok = True
        for x in inst.neighbors(u):
            if x == v:
                continue
            if _gabriel_open_disk_sign(pts[u], pts[v], pts[x]) < 0:
                ok = False
                break
        if ok:
            gabriel.add((u, v))

    witness_r2: dict[tuple[int, int], Fraction] = {}
    for t in confirmed:
        r2 = circumradius2(pts[t[0]], pts[t[1]], pts[t[2]])
        for e in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])):
            cur = witness_r2.get(e)
            if cur is None or r2 < cur:
                witness_r2[e] = r2

    g = SpannerGraph(
        inst,
        meta={
            "kind": "ldel1",
            "triangles": tuple(confirmed),
            "gabriel": frozenset(gabriel),
            "witness_r2": witness_r2,
        },
    )
    for e in sorted(gabriel):
        g.add_edge(*e, tag="gabriel")
    for e in sorted(witness_r2):
        g.add_edge(*e, tag="ldel1")
    return g


def _crossing_pairs(
    edges: Sequence[tuple[int, int]], pts: Sequence[Point]
) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """All properly intersecting edge pairs, bounding-box prefiltered."""
    m = len(edges)
    if m < 2:
        return []
    seg = np.empty((m, 4))
    for i, (u, v) in enumerate(edges):
        seg[i] = (
            min(pts[u].x, pts[v].x),
            max(pts[u].x, pts[v].x),
            min(pts[u].y, pts[v].y),
            max(pts[u].y, pts[v].y),
        )
    lo_x, hi_x, lo_y, hi_y = seg[:, 0], seg[:, 1], seg[:, 2], seg[:, 3]
    overlap = (
        (lo_x[:, None] <= hi_x[None, :])
        & (lo_x[None, :] <= hi_x[:, None])
        & (lo_y[:, None] <= hi_y[None, :])
        & (lo_y[None, :] <= hi_y[:, None])
    )
    out = []
    for i, j in zip(*np.nonzero(np.triu(overlap, k=1))):
        e, f = edges[int(i)], edges[int(j)]
        if set(e) & set(f):
            continue
        if segments_properly_intersect(pts[e[0]], pts[e[1]], pts[f[0]], pts[f[1]]):
            out.append((e, f))
    return out


def pldel(l1: SpannerGraph, inst: QudgInstance | None = None) -> SpannerGraph:
    """Planarize the 1-hop Delaunay graph by resolving crossings.

    Every properly crossing edge pair is compared and the weaker edge of
    each pair dropped everywhere it loses: an edge whose diametral circle
    is empty beats one with only a triangle witness, then the smaller exact
    squared circumradius wins, then the smaller undirected edge identity.
    Exactly one edge of any crossing pair loses, so the survivors are
    crossing-free.  Both endpoints of an edge can evaluate every contest it
    is part of from 1-hop knowledge, since each endpoint of one crossing
    edge is within unit range of an endpoint of the other.

    The input must carry the aux data produced by :func:`ldel1`.
    """
    if inst is None:
        inst = l1.inst
    if l1.meta.get("kind") != "ldel1":
        raise DelaunayError("planarization expects the 1-hop Delaunay graph")
    gabriel: frozenset[tuple[int, int]] = l1.meta["gabriel"]
    witness_r2: dict[tuple[int, int], Fraction] = l1.meta["witness_r2"]
    pts = inst.points

    edges = sorted(l1.edges)

    def rank(e: tuple[int, int]) -> tuple:
        eid = undirected_edge_id(l1.edges[e], *e)
        if e in gabriel:
            return (0, Fraction(0), eid)
        r2 = witness_r2.get(e)
        if r2 is None:
            raise DelaunayError("edge lacks both witnesses; aux data corrupt")
        return (1, r2, eid)

    dropped: set[tuple[int, int]] = set()
    for e, f in _crossing_pairs(edges, pts):
        dropped.add(max(e, f, key=rank))

    g = SpannerGraph(
        inst,
        meta={
            "kind": "pldel",
            "gabriel": gabriel,
            "triangles": l1.meta["triangles"],
            "witness_r2": witness_r2,
            "dropped": frozenset(dropped),
        },
    )
    for e in edges:
        if e not in dropped:
            g.add_edge(*e, tag=l1.tags[e])
    return g

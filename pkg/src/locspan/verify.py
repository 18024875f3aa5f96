"""Checkers for the guarantees the constructions are supposed to give.

Stretch, planarity, degree, weight, edge-set isolation, and the leapfrog
inequality.  Everything here is an oracle: independent of the construction
code, usable both in tests and from the command line.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .geometry import Point, dist, segments_properly_intersect
from .graph import SpannerGraph, mst

__all__ = [
    "VerifyError",
    "Metrics",
    "stretch_factor",
    "planarity_check",
    "isolation_check",
    "leapfrog_check",
    "weight_ratio",
    "max_degree",
]


class VerifyError(ValueError):
    """A checked guarantee failed structurally (not merely numerically)."""


@dataclass
class Metrics:
    """One run's measured quality figures."""

    stretch: float
    max_degree: int
    weight_ratio: float
    planar: bool | None = None
    rounds: int | None = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "stretch": self.stretch,
            "max_degree": self.max_degree,
            "weight_ratio": self.weight_ratio,
            "planar": self.planar,
            "rounds": self.rounds,
        }
        out.update(self.extra)
        return out


def _to_csr(g) -> csr_matrix:
    adj = g.adjacency
    n = len(adj)
    rows, cols, vals = [], [], []
    for u, nbrs in adj.items():
        for v, d in nbrs.items():
            rows.append(u)
            cols.append(v)
            vals.append(d)
    return csr_matrix((vals, (rows, cols)), shape=(n, n))


def stretch_factor(
    h,
    g,
    exact_limit: int = 300,
    sample_sources: int = 300,
    seed: int = 0,
) -> float:
    """Worst-case ratio of h-distance to g-distance over connected pairs.

    Exact over all pairs up to exact_limit nodes; beyond that, exact per
    source over a seeded sample of sources.  A pair connected in g but not
    in h is a structural failure and raises.
    """
    n = len(g.adjacency)
    if len(h.adjacency) != n:
        raise VerifyError("graphs have different node sets")
    if n < 2:
        return 1.0
    if n <= exact_limit:
        sources = np.arange(n)
    else:
        rng = random.Random(f"{seed}:stretch")
        sources = np.array(sorted(rng.sample(range(n), sample_sources)))
    dh = _csgraph_dijkstra(_to_csr(h), directed=False, indices=sources)
    dg = _csgraph_dijkstra(_to_csr(g), directed=False, indices=sources)
    for row, src in enumerate(sources):
        dg[row, src] = np.inf  # exclude the self-pair
    pairs = np.isfinite(dg)
    broken = pairs & ~np.isfinite(dh)
    if broken.any():
        row, col = np.argwhere(broken)[0]
        raise VerifyError(
            f"pair ({int(sources[row])}, {int(col)}) connected in g but not in h"
        )
    if not pairs.any():
        return 1.0
    return float(np.max(dh[pairs] / dg[pairs]))


def _stretch_floyd(h, g) -> float:
    """Same figure via dense Floyd-Warshall; cross-check for small n."""

    def table(graph):
        n = len(graph.adjacency)
        d = np.full((n, n), np.inf)
        np.fill_diagonal(d, 0.0)
        for u, nbrs in graph.adjacency.items():
            for v, w in nbrs.items():
                d[u, v] = w
        for k in range(n):
            d = np.minimum(d, d[:, k, None] + d[None, k, :])
        return d

    dh, dg = table(h), table(g)
    np.fill_diagonal(dg, np.inf)
    pairs = np.isfinite(dg)
    if (pairs & ~np.isfinite(dh)).any():
        raise VerifyError("pair connected in g but not in h")
    if not pairs.any():
        return 1.0
    return float(np.max(dh[pairs] / dg[pairs]))


def planarity_check(h: SpannerGraph):
    """(True, None) if no two edges properly intersect, else (False, pair).

    All-pairs with a vectorized bounding-box prefilter; surviving pairs go
    through the exact segment test.
    """
    edges = sorted(h.edges)
    m = len(edges)
    if m < 2:
        return True, None
    pts = h.points
    seg = np.empty((m, 4))
    for idx, (u, v) in enumerate(edges):
        a, b = pts[u], pts[v]
        seg[idx] = (min(a.x, b.x), min(a.y, b.y), max(a.x, b.x), max(a.y, b.y))
    overlap = (
        (seg[:, None, 0] <= seg[None, :, 2])
        & (seg[None, :, 0] <= seg[:, None, 2])
        & (seg[:, None, 1] <= seg[None, :, 3])
        & (seg[None, :, 1] <= seg[:, None, 3])
    )
    cand = np.argwhere(np.triu(overlap, k=1))
    for i, j in cand:
        e1, e2 = edges[int(i)], edges[int(j)]
        if set(e1) & set(e2):
            continue
        if segments_properly_intersect(
            pts[e1[0]], pts[e1[1]], pts[e2[0]], pts[e2[1]]
        ):
            return False, (e1, e2)
    return True, None


def isolation_check(
    edges: Sequence[tuple[int, int]], c: float, points: Sequence[Point]
) -> bool:
    """True iff no endpoint's radius-c closed disk holds another endpoint."""
    if c <= 0.0:
        raise VerifyError(f"isolation radius must be positive, got {c}")
    nodes = sorted({x for e in edges for x in e})
    for i, u in enumerate(nodes):
        for v in nodes[i + 1 :]:
            if dist(points[u], points[v]) <= c:
                return False
    return True


def _leapfrog_rhs(
    first: tuple[int, int],
    rest: Sequence[tuple[int, int]],
    t: float,
    points: Sequence[Point],
) -> float:
    """Minimum right-hand side over orderings and orientations.

    The chain visits first, then the rest in some order, each edge in
    either direction, with t-weighted connector hops between consecutive
    edges and back to the start.
    """
    best = math.inf
    for perm in itertools.permutations(rest):
        seq = (first,) + perm
        for bits in range(2 ** len(seq)):
            ordered = [
                e if not (bits >> i) & 1 else (e[1], e[0])
                for i, e in enumerate(seq)
            ]
            edge_sum = sum(
                dist(points[u], points[v]) for u, v in ordered[1:]
            )
            hops = sum(
                dist(points[ordered[i][1]], points[ordered[i + 1][0]])
                for i in range(len(ordered) - 1)
            )
            hops += dist(points[ordered[-1][1]], points[ordered[0][0]])
            best = min(best, edge_sum + t * hops)
    return best


def leapfrog_check(
    edges: Sequence[tuple[int, int]],
    t_prime: float,
    t: float,
    points: Sequence[Point],
    m_max: int = 5,
    budget: int = 20000,
    seed: int = 0,
):
    """Check the subset inequality that caps a longest edge by the rest.

    For every subset of up to m_max edges, the longest edge (ties by edge
    id) scaled by t_prime must stay below the other edges' total plus t
    times the shortest connector tour.  Returns (True, None) or
    (False, violating_subset).  Beyond ``budget`` subsets per size, a
    seeded sample is checked instead of the full enumeration.
    """
    if not (1.0 < t_prime <= t):
        raise VerifyError(f"need 1 < t_prime <= t, got {t_prime}, {t}")
    es = sorted(set(tuple(sorted(e)) for e in edges))
    if not es:
        return True, None

    def keyed(e):
        return (dist(points[e[0]], points[e[1]]), e[0], e[1])

    if t_prime >= t and len(es) >= 1:
        # m = 1 reads t_prime * |e| < t * |e|; fails unless t > t_prime.
        return False, [es[0]]
    rng = random.Random(f"{seed}:leapfrog")
    for m in range(2, min(m_max, len(es)) + 1):
        total = math.comb(len(es), m)
        if total <= budget:
            combos = itertools.combinations(es, m)
        else:
            combos = (
                tuple(sorted(rng.sample(es, m))) for _ in range(budget)
            )
        for combo in combos:
            first = max(combo, key=keyed)
            rest = [e for e in combo if e != first]
            lhs = t_prime * dist(points[first[0]], points[first[1]])
            if lhs >= _leapfrog_rhs(first, rest, t, points):
                return False, list(combo)
    return True, None


def weight_ratio(h: SpannerGraph) -> float:
    """Total weight of h over the weight of the instance's MST."""
    base = mst(SpannerGraph.full(h.inst)).total_weight()
    if base == 0.0:
        raise VerifyError("MST weight is zero")
    return h.total_weight() / base


def max_degree(h) -> int:
    return max((len(nb) for nb in h.adjacency.values()), default=0)

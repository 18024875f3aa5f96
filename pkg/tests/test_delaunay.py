import math
import random
from fractions import Fraction

import numpy as np
import pytest
from scipy.spatial import Delaunay as QhullDelaunay

from locspan.delaunay import (
    DelaunayError,
    Triangulation,
    delaunay,
    ldel1,
    pldel,
    udel,
)
from locspan.geometry import Point, circumcircle_sign, circumradius2, dist
from locspan.graph import build_qudg, random_instance
from locspan.verify import planarity_check


def _rand_points(seed: int, n: int, side: float = 4.0) -> list[Point]:
    rng = random.Random(f"{seed}:pts")
    return [Point(rng.uniform(0, side), rng.uniform(0, side)) for _ in range(n)]


class TestDelaunayCore:
    def test_too_few_points(self):
        with pytest.raises(DelaunayError):
            delaunay([Point(0, 0)])

    def test_duplicates_rejected(self):
        with pytest.raises(DelaunayError):
            delaunay([Point(0, 0), Point(1, 0), Point(0, 0)])

    def test_two_points_single_edge(self):
        t = delaunay([Point(3, 1), Point(0, 0)])
        assert t.triangles == ()
        assert t.edges == frozenset({(0, 1)})

    def test_collinear_chain(self):
        # order along the line, not input order
        t = delaunay([Point(0, 0), Point(2, 0), Point(1, 0)])
        assert t.triangles == ()
        assert t.edges == frozenset({(0, 2), (1, 2)})

    def test_vertical_collinear_chain(self):
        t = delaunay([Point(0, 5), Point(0, 1), Point(0, 3), Point(0, 2)])
        assert t.edges == frozenset({(1, 3), (2, 3), (0, 2)})

    def test_triangle(self):
        t = delaunay([Point(0, 0), Point(1, 0), Point(0.4, 0.9)])
        assert t.triangles == ((0, 1, 2),)
        assert len(t.edges) == 3

    def test_quad_diagonal_choice(self):
        """The diagonal of a convex quad goes to the empty-circle side."""
        pts = [Point(0, 0), Point(2, 0), Point(2.2, 1.0), Point(-0.1, 1.1)]
        t = delaunay(pts)
        assert len(t.triangles) == 2
        diag = (0, 2) if (0, 2) in t.edges else (1, 3)
        for tri in t.triangles:
            a, b, c = (pts[i] for i in tri)
            for k, p in enumerate(pts):
                if k not in tri:
                    assert circumcircle_sign(a, b, c, p) < 0
        other = (1, 3) if diag == (0, 2) else (0, 2)
        assert other not in t.edges

    def test_cocircular_square_canonical_diagonal(self):
        # both diagonals tie on length; the smaller endpoint pair wins
        pts = [Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)]
        t = delaunay(pts)
        assert (0, 2) in t.edges
        assert (1, 3) not in t.edges
        assert t.triangles == ((0, 1, 2), (0, 2, 3))

    def test_rebuild_is_identical(self):
        pts = _rand_points(7, 40)
        a = delaunay(pts)
        b = delaunay(pts)
        assert a.triangles == b.triangles and a.edges == b.edges

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_qhull(self, seed):
        rng = random.Random(f"{seed}:qhull")
        pts = _rand_points(seed, rng.randint(3, 70))
        mine = delaunay(pts)
        hull = QhullDelaunay(np.array([(p.x, p.y) for p in pts]))
        expect = set()
        for simplex in hull.simplices:
            a, b, c = sorted(int(v) for v in simplex)
            expect |= {(a, b), (a, c), (b, c)}
        assert set(mine.edges) == expect

    @pytest.mark.parametrize("seed", range(6))
    def test_empty_circumcircle_property(self, seed):
        pts = _rand_points(100 + seed, 30)
        t = delaunay(pts)
        for tri in t.triangles:
            a, b, c = (pts[i] for i in tri)
            for k, p in enumerate(pts):
                if k not in tri:
                    assert circumcircle_sign(a, b, c, p) <= 0

    def test_integer_grid(self):
        """Heavily cocircular input: counts obey the Euler relation and
        every triangle circle is still strictly empty."""
        pts = [Point(i, j) for i in range(5) for j in range(5)]
        t = delaunay(pts)
        # n=25, 16 hull vertices: 2n-2-h triangles, 3n-3-h edges
        assert len(t.triangles) == 32
        assert len(t.edges) == 56
        for tri in t.triangles:
            a, b, c = (pts[i] for i in tri)
            for k, p in enumerate(pts):
                if k not in tri:
                    assert circumcircle_sign(a, b, c, p) <= 0

    def test_cocircular_octagon(self):
        pts = [
            Point(round(math.cos(k * math.pi / 4), 15), round(math.sin(k * math.pi / 4), 15))
            for k in range(8)
        ]
        t = delaunay(pts)
        assert len(t.triangles) == 6
        for tri in t.triangles:
            a, b, c = (pts[i] for i in tri)
            for k, p in enumerate(pts):
                if k not in tri:
                    assert circumcircle_sign(a, b, c, p) <= 0

    def test_edge_lengths(self):
        t = delaunay([Point(0, 0), Point(3, 4)])
        assert t.edge_lengths() == {(0, 1): 5.0}


class TestUdel:
    def test_square_drops_long_diagonal(self):
        pts = [Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)]
        g = udel(pts)
        assert set(g.edges) == {(0, 1), (1, 2), (2, 3), (0, 3)}

    def test_far_pair_empty(self):
        g = udel([Point(0, 0), Point(1.5, 0)])
        assert g.edge_count() == 0

    def test_close_set_equals_delaunay(self):
        rng = random.Random("udel:close")
        pts = [Point(rng.uniform(0, 0.7), rng.uniform(0, 0.7)) for _ in range(25)]
        g = udel(pts)
        t = delaunay(pts)
        assert set(g.edges) == set(t.edges)

    def test_instance_identity_reused(self):
        inst = random_instance(15, side=2.0, alpha=1.0, seed=3, require_connected=False)
        g = udel(inst)
        assert g.inst is inst

    def test_rejects_quasi_instance(self):
        inst = random_instance(10, side=2.0, alpha=0.5, seed=3, require_connected=False)
        with pytest.raises(DelaunayError):
            udel(inst)


def _brute_ldel1_edges(inst):
    """Independent re-derivation: diametral-empty edges plus edges of
    unit-side triangles whose circumcircle avoids every corner neighbor."""
    pts = inst.points
    n = len(pts)
    edges = set()
    for u, v in inst.edges:
        if all(
            (pts[u].x - pts[x].x) * (pts[v].x - pts[x].x)
            + (pts[u].y - pts[x].y) * (pts[v].y - pts[x].y)
            >= 0
            for x in range(n)
            if x not in (u, v)
        ):
            edges.add((u, v))
    for u in range(n):
        for v in range(u + 1, n):
            for w in range(v + 1, n):
                if not (
                    inst.has_edge(u, v)
                    and inst.has_edge(u, w)
                    and inst.has_edge(v, w)
                ):
                    continue
                watchers = (
                    set(inst.neighbors(u)) | set(inst.neighbors(v)) | set(inst.neighbors(w))
                ) - {u, v, w}
                a, b, c = pts[u], pts[v], pts[w]
                if all(circumcircle_sign(a, b, c, pts[x]) <= 0 for x in watchers):
                    edges |= {(u, v), (u, w), (v, w)}
    return edges


class TestLdel1:
    def test_three_visible_nodes(self):
        inst = build_qudg([Point(0, 0), Point(0.8, 0), Point(0.4, 0.6)], alpha=1.0)
        g = ldel1(inst)
        assert set(g.edges) == {(0, 1), (0, 2), (1, 2)}
        assert g.meta["triangles"] == ((0, 1, 2),)

    def test_rejects_quasi_instance(self):
        inst = random_instance(10, side=2.0, alpha=0.7, seed=5, require_connected=False)
        with pytest.raises(DelaunayError):
            ldel1(inst)

    def test_isolated_and_pair(self):
        inst = build_qudg([Point(0, 0), Point(0.5, 0), Point(3, 3)], alpha=1.0)
        g = ldel1(inst)
        assert set(g.edges) == {(0, 1)}

    @pytest.mark.parametrize("seed", range(8))
    def test_sandwich(self, seed):
        inst = random_instance(
            15 + 3 * seed, side=3.0, alpha=1.0, seed=seed, require_connected=False
        )
        ud = udel(inst)
        l1 = ldel1(inst)
        assert set(ud.edges) <= set(l1.edges)
        assert set(l1.edges) <= set(inst.edges)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        inst = random_instance(
            12 + 4 * seed, side=2.5, alpha=1.0, seed=40 + seed, require_connected=False
        )
        assert set(ldel1(inst).edges) == _brute_ldel1_edges(inst)

    def test_witness_radii_match_triangles(self):
        inst = random_instance(25, side=2.5, alpha=1.0, seed=77, require_connected=False)
        l1 = ldel1(inst)
        pts = inst.points
        for tri in l1.meta["triangles"]:
            r2 = circumradius2(pts[tri[0]], pts[tri[1]], pts[tri[2]])
            assert isinstance(r2, Fraction)
            for e in ((tri[0], tri[1]), (tri[0], tri[2]), (tri[1], tri[2])):
                assert l1.meta["witness_r2"][e] <= r2


# Hand-built so the 1-hop graph crosses itself: the thin triangle (2,3,4)
# is confirmed because the nodes that would kill its circumcircle sit just
# over unit range from its corners, yet the diametral-empty edge (0,1)
# passes straight through it.
CROSSING_POINTS = [
    Point(0.585, 0.0),
    Point(-0.405, 0.0),
    Point(0.5, -0.497),
    Point(0.5, 0.5),
    Point(0.55, 0.3),
]


class TestPldel:
    def test_frozen_crossing_instance(self):
        inst = build_qudg(CROSSING_POINTS, alpha=1.0)
        l1 = ldel1(inst)
        ok, witness = planarity_check(l1)
        assert not ok
        assert witness == ((0, 1), (2, 3))
        assert l1.tags[(0, 1)] == "gabriel"
        assert l1.tags[(2, 3)] == "ldel1"

        pl = pldel(l1)
        assert (0, 1) in pl.edges
        assert (2, 3) not in pl.edges
        assert (2, 4) not in pl.edges  # crosses (0, 1) as well
        assert planarity_check(pl)[0]
        assert set(udel(inst).edges) <= set(pl.edges)

    def test_planar_input_unchanged(self):
        inst = build_qudg([Point(0, 0), Point(0.8, 0), Point(0.4, 0.6)], alpha=1.0)
        l1 = ldel1(inst)
        pl = pldel(l1)
        assert set(pl.edges) == set(l1.edges)
        assert pl.meta["dropped"] == frozenset()

    def test_requires_aux_data(self):
        inst = build_qudg([Point(0, 0), Point(0.5, 0)], alpha=1.0)
        with pytest.raises(DelaunayError):
            pldel(udel(inst))

    @pytest.mark.parametrize("seed", range(10))
    def test_always_planar_and_contains_udel(self, seed):
        inst = random_instance(
            20 + 4 * seed, side=3.0, alpha=1.0, seed=200 + seed, require_connected=False
        )
        pl = pldel(ldel1(inst))
        assert planarity_check(pl)[0]
        assert set(udel(inst).edges) <= set(pl.edges)

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locspan.geometry import Point
from locspan.graph import SpannerGraph, build_qudg, mst, random_instance
from locspan.verify import (
    VerifyError,
    _stretch_floyd,
    isolation_check,
    leapfrog_check,
    max_degree,
    planarity_check,
    stretch_factor,
    weight_ratio,
)


class TestStretchFactor:
    def test_identical_graphs(self):
        inst = random_instance(20, 1.5, 1.0, seed=2)
        g = SpannerGraph.full(inst)
        assert stretch_factor(g, g) == pytest.approx(1.0)

    def test_broken_cycle(self):
        # Unit square cycle minus one side: the cut pair detours 3 sides.
        pts = [Point(0.0, 0.0), Point(1.0, 0.0), Point(1.0, 1.0), Point(0.0, 1.0)]
        inst = build_qudg(pts, alpha=1.0)
        g = SpannerGraph(inst)
        for u, v in ((0, 1), (1, 2), (2, 3), (3, 0)):
            g.add_edge(u, v)
        h = g.copy()
        h.edges.pop((0, 1))
        h.adjacency[0].pop(1)
        h.adjacency[1].pop(0)
        assert stretch_factor(h, g) == pytest.approx(3.0)

    def test_disconnection_is_an_error(self):
        inst = build_qudg([Point(0.0, 0.0), Point(0.5, 0.0)], alpha=1.0)
        g = SpannerGraph.full(inst)
        h = SpannerGraph(inst)
        with pytest.raises(VerifyError):
            stretch_factor(h, g)

    @given(st.integers(0, 30))
    @settings(max_examples=10, deadline=None)
    def test_two_implementations_agree(self, seed):
        inst = random_instance(40, 2.0, 1.0, seed=seed, require_connected=False)
        g = SpannerGraph.full(inst)
        h = mst(g) if len(g.edges) and _connected(g) else g
        if not _connected(g):
            return
        a = stretch_factor(h, g)
        b = _stretch_floyd(h, g)
        assert a == pytest.approx(b, rel=1e-9)

    def test_sampled_mode_runs(self):
        inst = random_instance(60, 2.2, 1.0, seed=5)
        g = SpannerGraph.full(inst)
        full = stretch_factor(g, g, exact_limit=300)
        sampled = stretch_factor(g, g, exact_limit=10, sample_sources=20, seed=1)
        assert full == pytest.approx(1.0)
        assert sampled == pytest.approx(1.0)


def _connected(g) -> bool:
    from locspan.graph import components

    return len(components(g)) == 1


class TestPlanarity:
    def test_tree_is_planar(self):
        inst = random_instance(25, 1.8, 1.0, seed=3)
        ok, witness = planarity_check(mst(SpannerGraph.full(inst)))
        assert ok and witness is None

    def test_crossing_diagonals_caught(self):
        pts = [Point(0.0, 0.0), Point(0.5, 0.0), Point(0.5, 0.5), Point(0.0, 0.5)]
        inst = build_qudg(pts, alpha=1.0)
        g = SpannerGraph.full(inst)  # complete K4 including both diagonals
        ok, witness = planarity_check(g)
        assert not ok
        assert set(witness) == {(0, 2), (1, 3)}

    def test_shared_endpoint_not_a_crossing(self):
        pts = [Point(0.0, 0.0), Point(1.0, 0.0), Point(0.5, 0.8)]
        inst = build_qudg(pts, alpha=1.0)
        ok, _ = planarity_check(SpannerGraph.full(inst))
        assert ok


class TestIsolation:
    pts = [Point(0.0, 0.0), Point(1.0, 0.0), Point(0.0, 0.4), Point(1.0, 0.4)]

    def test_single_edge_threshold(self):
        edges = [(0, 1)]
        assert isolation_check(edges, 0.99, self.pts)
        assert not isolation_check(edges, 1.0, self.pts)  # closed disk

    def test_two_close_edges(self):
        edges = [(0, 1), (2, 3)]
        assert not isolation_check(edges, 0.8, self.pts)
        assert isolation_check(edges, 0.3, self.pts)

    def test_bad_radius(self):
        with pytest.raises(VerifyError):
            isolation_check([(0, 1)], 0.0, self.pts)


class TestLeapfrog:
    def test_singleton_true_when_t_exceeds_t_prime(self):
        pts = [Point(0.0, 0.0), Point(1.0, 0.0)]
        ok, _ = leapfrog_check([(0, 1)], 1.2, 2.0, pts)
        assert ok

    def test_singleton_fails_at_equality(self):
        pts = [Point(0.0, 0.0), Point(1.0, 0.0)]
        ok, bad = leapfrog_check([(0, 1)], 1.5, 1.5, pts)
        assert not ok and bad == [(0, 1)]

    def test_parallel_edges_formula(self):
        # Two parallel unit edges at vertical distance d: the best tour
        # gives RHS = 1 + 2*t*d, so the pair passes iff t' < 1 + 2*t*d.
        t_prime, t = 1.2, 2.0
        threshold = (t_prime - 1.0) / (2.0 * t)  # 0.05

        def run(d):
            pts = [
                Point(0.0, 0.0),
                Point(1.0, 0.0),
                Point(0.0, d),
                Point(1.0, d),
            ]
            return leapfrog_check([(0, 1), (2, 3)], t_prime, t, pts)

        ok_far, _ = run(threshold + 0.01)
        ok_near, bad = run(threshold - 0.01)
        assert ok_far
        assert not ok_near
        assert set(bad) == {(0, 1), (2, 3)}

    def test_param_validation(self):
        pts = [Point(0.0, 0.0), Point(1.0, 0.0)]
        with pytest.raises(VerifyError):
            leapfrog_check([(0, 1)], 1.0, 2.0, pts)
        with pytest.raises(VerifyError):
            leapfrog_check([(0, 1)], 2.5, 2.0, pts)


class TestWeightAndDegree:
    def test_mst_ratio_one(self):
        inst = random_instance(20, 1.5, 1.0, seed=6)
        t = mst(SpannerGraph.full(inst))
        assert weight_ratio(t) == pytest.approx(1.0)

    def test_one_extra_edge(self):
        inst = random_instance(20, 1.5, 1.0, seed=6)
        t = mst(SpannerGraph.full(inst))
        extra = next(
            e for e in sorted(inst.edges) if e not in t.edges
        )
        base = t.total_weight()
        t.add_edge(*extra)
        assert weight_ratio(t) == pytest.approx(
            1.0 + inst.adjacency[extra[0]][extra[1]] / base
        )

    def test_max_degree(self):
        pts = [Point(0.0, 0.0), Point(0.3, 0.0), Point(0.0, 0.3), Point(-0.3, 0.0)]
        inst = build_qudg(pts, alpha=1.0)
        star = SpannerGraph(inst)
        for leaf in (1, 2, 3):
            star.add_edge(0, leaf)
        assert max_degree(star) == 3

import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from locspan.geometry import (
    ConeSystem,
    GeometryError,
    GridSpec,
    Point,
    cell_parity,
    cone_index,
    dist,
    grid_cells_of,
    in_circumcircle,
    orientation,
    segments_properly_intersect,
)

coords = st.floats(
    min_value=-50.0, max_value=50.0, allow_nan=False, allow_infinity=False
)


def points(draw):
    return Point(draw(coords), draw(coords))


def test_point_rejects_non_finite():
    with pytest.raises(GeometryError):
        Point(float("nan"), 0.0)
    with pytest.raises(GeometryError):
        Point(0.0, float("inf"))


def test_dist_matches_hypot():
    assert dist(Point(0.0, 0.0), Point(3.0, 4.0)) == 5.0
    assert dist(Point(1.0, 1.0), Point(1.0, 1.0)) == 0.0


class TestConeSystem:
    def test_rejects_small_k(self):
        with pytest.raises(GeometryError):
            ConeSystem(5, Point(0.0, 0.0))

    def test_octant_example(self):
        # k=8 cones of width pi/4; direction (1,1) is 45 degrees, which
        # starts cone 1, and half-open intervals assign the boundary ray
        # to the cone it begins.
        cones = ConeSystem(8, Point(0.0, 0.0))
        assert cone_index(cones, Point(1.0, 1.0)) == 1
        assert cone_index(cones, Point(1.0, 0.0)) == 0
        assert cone_index(cones, Point(1.0, 0.5)) == 0
        assert cone_index(cones, Point(0.0, 1.0)) == 2
        assert cone_index(cones, Point(-1.0, 0.0)) == 4
        assert cone_index(cones, Point(1.0, -1e-9)) == 7

    def test_apex_rejected(self):
        cones = ConeSystem(6, Point(2.0, 3.0))
        with pytest.raises(GeometryError):
            cone_index(cones, Point(2.0, 3.0))

    @given(st.integers(6, 40), coords, coords)
    def test_index_always_in_range(self, k, x, y):
        cones = ConeSystem(k, Point(0.0, 0.0))
        if x == 0.0 and y == 0.0:
            return
        assert 0 <= cone_index(cones, Point(x, y)) < k


class TestGridSpec:
    def test_validation(self):
        with pytest.raises(GeometryError):
            GridSpec(0.0, 0.01)
        with pytest.raises(GeometryError):
            GridSpec(0.4, 0.0)
        with pytest.raises(GeometryError):
            GridSpec(0.4, 0.1)  # delta must be strictly below beta/4

    def test_stride(self):
        g = GridSpec(0.4, 0.05)
        assert g.stride == pytest.approx(0.3)

    def test_membership_examples(self):
        # beta=0.4 delta=0.05: stride 0.3, overlap band width 0.1.
        g = GridSpec(0.4, 0.05)
        assert grid_cells_of(Point(0.35, 0.1), g) == {(0, 0), (1, 0)}
        assert grid_cells_of(Point(0.1, 0.1), g) == {(0, 0)}

    def test_membership_is_exact_at_float_boundaries(self):
        # 0.1 as a float is slightly above the exact -stride + beta
        # boundary, so cell -1 must not claim it.
        g = GridSpec(0.4, 0.05)
        cells = grid_cells_of(Point(0.1, 0.0), g)
        assert all(i >= 0 for i, _ in cells)

    def test_corner_point_in_four_cells(self):
        g = GridSpec(1.0, 0.2)
        # stride 0.6; x=0.7 lies in axis cells 0 ([0,1)) and 1 ([0.6,1.6)).
        cells = grid_cells_of(Point(0.7, 0.7), g)
        assert cells == {(0, 0), (0, 1), (1, 0), (1, 1)}

    @given(coords, coords)
    @settings(max_examples=200)
    def test_one_to_four_cells(self, x, y):
        g = GridSpec(0.4, 0.05)
        cells = grid_cells_of(Point(x, y), g)
        assert 1 <= len(cells) <= 4

    @given(coords, coords)
    @settings(max_examples=200)
    def test_delta_interior_cell_exists(self, x, y):
        # Some cell contains the closed sup-norm delta-box around the
        # point, with strict room on the right (exact arithmetic).  This
        # is the property that lets nearby points share a cell.
        g = GridSpec(0.4, 0.05)
        s = g.exact_stride()
        b = Fraction(g.beta)
        d = Fraction(g.delta)

        def axis_ok(c: float) -> bool:
            cf = Fraction(c)
            lo = math.floor((c - g.beta) / g.stride) - 1
            hi = math.floor(c / g.stride) + 1
            return any(
                i * s <= cf - d and cf + d < i * s + b for i in range(lo, hi + 1)
            )

        assert axis_ok(x) and axis_ok(y)

    @given(coords, coords)
    @settings(max_examples=100)
    def test_cells_have_distinct_parities(self, x, y):
        g = GridSpec(0.4, 0.05)
        cells = grid_cells_of(Point(x, y), g)
        parities = [cell_parity(c) for c in cells]
        assert len(set(parities)) == len(parities)


class TestOrientation:
    def test_signs(self):
        a, b = Point(0.0, 0.0), Point(1.0, 0.0)
        assert orientation(a, b, Point(0.0, 1.0)) == 1
        assert orientation(a, b, Point(0.0, -1.0)) == -1
        assert orientation(a, b, Point(2.0, 0.0)) == 0

    def test_near_degenerate_exact(self):
        # Points nearly collinear; the exact sign must match rational
        # arithmetic, not the rounded float determinant.
        a = Point(0.1, 0.1)
        b = Point(0.3, 0.3)
        c = Point(0.5, 0.5)
        got = orientation(a, b, c)
        ex = (Fraction(a.x) - Fraction(c.x)) * (Fraction(b.y) - Fraction(c.y)) - (
            Fraction(a.y) - Fraction(c.y)
        ) * (Fraction(b.x) - Fraction(c.x))
        want = 0 if ex == 0 else (1 if ex > 0 else -1)
        assert got == want


class TestSegmentIntersection:
    def test_plain_crossing(self):
        assert segments_properly_intersect(
            Point(0.0, 0.0), Point(2.0, 2.0), Point(0.0, 2.0), Point(2.0, 0.0)
        )

    def test_disjoint(self):
        assert not segments_properly_intersect(
            Point(0.0, 0.0), Point(1.0, 0.0), Point(0.0, 1.0), Point(1.0, 1.0)
        )

    def test_shared_endpoint_is_not_proper(self):
        assert not segments_properly_intersect(
            Point(0.0, 0.0), Point(1.0, 0.0), Point(1.0, 0.0), Point(2.0, 1.0)
        )

    def test_t_junction_counts(self):
        # Endpoint of one segment in the interior of the other.
        assert segments_properly_intersect(
            Point(0.0, 0.0), Point(2.0, 0.0), Point(1.0, 0.0), Point(1.0, 1.0)
        )

    def test_collinear_overlap(self):
        assert segments_properly_intersect(
            Point(0.0, 0.0), Point(2.0, 0.0), Point(1.0, 0.0), Point(3.0, 0.0)
        )

    def test_collinear_touching_at_point(self):
        assert not segments_properly_intersect(
            Point(0.0, 0.0), Point(1.0, 0.0), Point(1.0, 0.0), Point(2.0, 0.0)
        )

    def test_collinear_disjoint(self):
        assert not segments_properly_intersect(
            Point(0.0, 0.0), Point(1.0, 0.0), Point(2.0, 0.0), Point(3.0, 0.0)
        )

    def test_degenerate_segment_rejected(self):
        with pytest.raises(GeometryError):
            segments_properly_intersect(
                Point(0.0, 0.0), Point(0.0, 0.0), Point(1.0, 0.0), Point(2.0, 0.0)
            )

    @given(coords, coords, coords, coords, coords, coords, coords, coords)
    @settings(max_examples=200)
    def test_symmetry(self, ax, ay, bx, by, cx, cy, dx, dy):
        a, b, c, d = Point(ax, ay), Point(bx, by), Point(cx, cy), Point(dx, dy)
        if (ax, ay) == (bx, by) or (cx, cy) == (dx, dy):
            return
        r = segments_properly_intersect(a, b, c, d)
        assert segments_properly_intersect(c, d, a, b) == r
        assert segments_properly_intersect(b, a, c, d) == r
        assert segments_properly_intersect(a, b, d, c) == r


class TestInCircumcircle:
    def test_strict_inside_and_outside(self):
        a, b, c = Point(0.0, 0.0), Point(1.0, 0.0), Point(0.0, 1.0)
        assert in_circumcircle(a, b, c, Point(0.5, 0.5))
        assert not in_circumcircle(a, b, c, Point(2.0, 2.0))

    def test_cocircular_is_outside(self):
        # Fourth corner of the unit square is exactly on the circle.
        a, b, c = Point(0.0, 0.0), Point(1.0, 0.0), Point(1.0, 1.0)
        assert not in_circumcircle(a, b, c, Point(0.0, 1.0))

    def test_orientation_independent(self):
        a, b, c = Point(0.0, 0.0), Point(1.0, 0.0), Point(0.0, 1.0)
        p = Point(0.4, 0.4)
        assert in_circumcircle(a, b, c, p) == in_circumcircle(a, c, b, p)

    def test_collinear_rejected(self):
        with pytest.raises(GeometryError):
            in_circumcircle(
                Point(0.0, 0.0), Point(1.0, 0.0), Point(2.0, 0.0), Point(0.0, 1.0)
            )

    def test_tiny_perturbation_resolved_exactly(self):
        a, b, c = Point(0.0, 0.0), Point(1.0, 0.0), Point(1.0, 1.0)
        on = Point(0.0, 1.0)
        eps = 1e-12
        inside = Point(on.x + eps, on.y - eps)
        outside = Point(on.x - eps, on.y + eps)
        assert in_circumcircle(a, b, c, inside)
        assert not in_circumcircle(a, b, c, outside)

    @given(coords, coords, coords, coords, coords, coords, coords, coords)
    @settings(max_examples=100)
    def test_matches_exact_rational(self, ax, ay, bx, by, cx, cy, px, py):
        from locspan.geometry import _incircle_exact, _orient_exact

        a, b, c, p = Point(ax, ay), Point(bx, by), Point(cx, cy), Point(px, py)
        o = _orient_exact(ax, ay, bx, by, cx, cy)
        if o == 0:
            return
        want = _incircle_exact(ax, ay, bx, by, cx, cy, px, py) == o
        assert in_circumcircle(a, b, c, p) == want

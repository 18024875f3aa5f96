"""Planar geometric primitives.

Distances, angular cone systems, an overlapping square grid, and the two
sign-exact predicates (orientation and circumcircle membership) that the
rest of the package builds on.  Predicates evaluate a floating-point
expression first and fall back to exact rational arithmetic only when the
float result is too close to zero to be trusted, so every reported sign is
exact while generic inputs stay fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

__all__ = [
    "GeometryError",
    "Point",
    "ConeSystem",
    "GridSpec",
    "dist",
    "cone_index",
    "grid_cells_of",
    "cell_parity",
    "orientation",
    "segments_properly_intersect",
    "in_circumcircle",
]

TAU = 2.0 * math.pi

_EPS = 2.0 ** -53
# Static filter bounds for the two determinants (first-stage bounds of the
# classic adaptive-precision scheme).
_ORIENT_BOUND = (3.0 + 16.0 * _EPS) * _EPS
_INCIRCLE_BOUND = (10.0 + 96.0 * _EPS) * _EPS
# The relative-error model behind those bounds fails once intermediate
# products go subnormal; anything this small is routed to the exact path.
_UNDERFLOW_GUARD = 1e-280


class GeometryError(ValueError):
    """Degenerate or invalid geometric input."""


@dataclass(frozen=True)
class Point:
    """A point in the plane with finite float coordinates."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite coordinates ({self.x}, {self.y})")


def dist(a: Point, b: Point) -> float:
    """Euclidean distance between two points."""
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class ConeSystem:
    """k equal half-open angular cones around an apex.

    Cone i covers angles [i*theta, (i+1)*theta) measured counterclockwise
    from the positive x axis, with theta = 2*pi/k.
    """

    k: int
    apex: Point

    def __post_init__(self) -> None:
        if not isinstance(self.k, int) or self.k < 6:
            raise GeometryError(f"cone count must be an integer >= 6, got {self.k}")

    @property
    def theta(self) -> float:
        return TAU / self.k


def cone_index(cones: ConeSystem, target: Point) -> int:
    """Index of the cone containing the direction apex -> target.

    The boundary ray of each cone belongs to the cone it opens
    (half-open intervals).  The apex itself has no direction.
    """
    dx = target.x - cones.apex.x
    dy = target.y - cones.apex.y
    if dx == 0.0 and dy == 0.0:
        raise GeometryError("target coincides with the cone apex")
    ang = math.atan2(dy, dx)
    if ang < 0.0:
        ang += TAU
    # ang is in [0, 2*pi); the mod guards the one-ulp wraparound case.
    return int(ang // cones.theta) % cones.k


@dataclass(frozen=True)
class GridSpec:
    """Overlapping square grid: cells of side beta placed every beta - 2*delta.

    Cell (i, j) covers the half-open square
    [i*stride, i*stride + beta) x [j*stride, j*stride + beta).
    Because stride < beta, adjacent cells overlap by a band of width
    2*delta and a point lies in 1 to 4 cells.
    """

    beta: float
    delta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise GeometryError(f"beta must be positive and finite, got {self.beta}")
        if not (math.isfinite(self.delta) and 0.0 < self.delta < self.beta / 4.0):
            raise GeometryError(
                f"delta must satisfy 0 < delta < beta/4, got delta={self.delta} beta={self.beta}"
            )

    @property
    def stride(self) -> float:
        return self.beta - 2.0 * self.delta

    def exact_stride(self) -> Fraction:
        return Fraction(self.beta) - 2 * Fraction(self.delta)


def _axis_cells(coord: float, grid: GridSpec) -> list[int]:
    """All indices i with i*stride <= coord < i*stride + beta, exactly.

    The membership test runs in rational arithmetic over the exact float
    values so boundary cases are decided without rounding.
    """
    stride = grid.exact_stride()
    beta = Fraction(grid.beta)
    x = Fraction(coord)
    # Candidate range from float arithmetic, widened by one on each side.
    lo = math.floor((coord - grid.beta) / grid.stride) - 1
    hi = math.floor(coord / grid.stride) + 1
    out = [i for i in range(lo, hi + 1) if i * stride <= x < i * stride + beta]
    if not 1 <= len(out) <= 2:
        raise GeometryError(f"grid axis membership broke for coord {coord}")
    return out


def grid_cells_of(p: Point, grid: GridSpec) -> set[tuple[int, int]]:
    """The set of grid cells containing p (between 1 and 4 of them)."""
    return {(i, j) for i in _axis_cells(p.x, grid) for j in _axis_cells(p.y, grid)}


def cell_parity(cell: tuple[int, int]) -> int:
    """Parity class of a cell in {0, 1, 2, 3}: (i mod 2)*2 + (j mod 2).

    The up-to-4 cells containing any single point all have distinct
    parities, which is what lets same-parity cells be processed
    independently.
    """
    i, j = cell
    return (i % 2) * 2 + (j % 2)


def _sign(v: float | Fraction) -> int:
    if v > 0:
        return 1
    if v < 0:
        return -1
    return 0


def _orient_exact(ax, ay, bx, by, cx, cy) -> int:
    acx = Fraction(ax) - Fraction(cx)
    acy = Fraction(ay) - Fraction(cy)
    bcx = Fraction(bx) - Fraction(cx)
    bcy = Fraction(by) - Fraction(cy)
    return _sign(acx * bcy - acy * bcx)


def orientation(a: Point, b: Point, c: Point) -> int:
    """Sign of the signed area of triangle abc: +1 ccw, -1 cw, 0 collinear."""
    detleft = (a.x - c.x) * (b.y - c.y)
    detright = (a.y - c.y) * (b.x - c.x)
    det = detleft - detright
    if detleft > 0.0:
        if detright <= 0.0:
            return _sign(det)
        detsum = detleft + detright
    elif detleft < 0.0:
        if detright >= 0.0:
            return _sign(det)
        detsum = -detleft - detright
    else:
        if detright == 0.0:
            # Both products may have underflowed to zero.
            return _orient_exact(a.x, a.y, b.x, b.y, c.x, c.y)
        return _sign(-detright)
    if detsum >= _UNDERFLOW_GUARD and abs(det) > _ORIENT_BOUND * detsum:
        return _sign(det)
    return _orient_exact(a.x, a.y, b.x, b.y, c.x, c.y)


def _strictly_between(p: Point, q: Point, r: Point) -> bool:
    # r assumed collinear with pq; strict interior test on the wider axis.
    if p.x != q.x:
        lo, hi = (p.x, q.x) if p.x < q.x else (q.x, p.x)
        return lo < r.x < hi
    lo, hi = (p.y, q.y) if p.y < q.y else (q.y, p.y)
    return lo < r.y < hi


def segments_properly_intersect(a: Point, b: Point, c: Point, d: Point) -> bool:
    """True iff segments ab and cd share a point that is not a common endpoint.

    Interior crossings and interior touches (one segment's endpoint inside
    the other segment, or a collinear overlap of positive length) count;
    meeting only at a shared endpoint does not.  Zero-length segments are
    rejected.
    """
    if (a.x, a.y) == (b.x, b.y) or (c.x, c.y) == (d.x, d.y):
        raise GeometryError("degenerate (zero-length) segment")
    o_ab_c = orientation(a, b, c)
    o_ab_d = orientation(a, b, d)
    o_cd_a = orientation(c, d, a)
    o_cd_b = orientation(c, d, b)
    if o_ab_c != 0 and o_ab_d != 0 and o_cd_a != 0 and o_cd_b != 0:
        return o_ab_c != o_ab_d and o_cd_a != o_cd_b
    if o_ab_c == 0 and o_ab_d == 0:
        # All four points collinear: compare 1-d intervals on the wider axis.
        if a.x != b.x:
            key = lambda p: p.x  # noqa: E731
        else:
            key = lambda p: p.y  # noqa: E731
        lo1, hi1 = sorted((key(a), key(b)))
        lo2, hi2 = sorted((key(c), key(d)))
        lo, hi = max(lo1, lo2), min(hi1, hi2)
        # A single contact point of collinear segments is an endpoint of both.
        return lo < hi
    if o_ab_c == 0 and _strictly_between(a, b, c):
        return True
    if o_ab_d == 0 and _strictly_between(a, b, d):
        return True
    if o_cd_a == 0 and _strictly_between(c, d, a):
        return True
    if o_cd_b == 0 and _strictly_between(c, d, b):
        return True
    return False


def _incircle_exact(ax, ay, bx, by, cx, cy, px, py) -> int:
    adx = Fraction(ax) - Fraction(px)
    ady = Fraction(ay) - Fraction(py)
    bdx = Fraction(bx) - Fraction(px)
    bdy = Fraction(by) - Fraction(py)
    cdx = Fraction(cx) - Fraction(px)
    cdy = Fraction(cy) - Fraction(py)
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = (
        alift * (bdx * cdy - cdx * bdy)
        + blift * (cdx * ady - adx * cdy)
        + clift * (adx * bdy - bdx * ady)
    )
    return _sign(det)


def circumcircle_sign(a: Point, b: Point, c: Point, p: Point) -> int:
    """Position of p against the circle through a, b, c, sign-exact.

    Returns +1 strictly inside, 0 exactly on the circle, -1 outside,
    independent of the orientation of (a, b, c).  Collinear a, b, c have
    no circumcircle and raise GeometryError.
    """
    orient = orientation(a, b, c)
    if orient == 0:
        raise GeometryError("collinear points have no circumcircle")
    adx = a.x - p.x
    ady = a.y - p.y
    bdx = b.x - p.x
    bdy = b.y - p.y
    cdx = c.x - p.x
    cdy = c.y - p.y
    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady
    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy
    det = (
        alift * (bdxcdy - cdxbdy)
        + blift * (cdxady - adxcdy)
        + clift * (adxbdy - bdxady)
    )
    permanent = (
        (abs(bdxcdy) + abs(cdxbdy)) * alift
        + (abs(cdxady) + abs(adxcdy)) * blift
        + (abs(adxbdy) + abs(bdxady)) * clift
    )
    errbound = _INCIRCLE_BOUND * permanent
    if permanent >= _UNDERFLOW_GUARD and (det > errbound or -det > errbound):
        sign = _sign(det)
    else:
        sign = _incircle_exact(a.x, a.y, b.x, b.y, c.x, c.y, p.x, p.y)
    return sign * orient


def in_circumcircle(a: Point, b: Point, c: Point, p: Point) -> bool:
    """True iff p lies strictly inside the circle through a, b, c.

    Points exactly on the circle count as outside.
    """
    return circumcircle_sign(a, b, c, p) > 0


def circumradius2(a: Point, b: Point, c: Point) -> Fraction:
    """Exact squared circumradius of triangle abc as a rational number."""
    ab2 = (Fraction(b.x) - Fraction(a.x)) ** 2 + (Fraction(b.y) - Fraction(a.y)) ** 2
    bc2 = (Fraction(c.x) - Fraction(b.x)) ** 2 + (Fraction(c.y) - Fraction(b.y)) ** 2
    ca2 = (Fraction(a.x) - Fraction(c.x)) ** 2 + (Fraction(a.y) - Fraction(c.y)) ** 2
    twice_area = (
        (Fraction(b.x) - Fraction(a.x)) * (Fraction(c.y) - Fraction(a.y))
        - (Fraction(b.y) - Fraction(a.y)) * (Fraction(c.x) - Fraction(a.x))
    )
    if twice_area == 0:
        raise GeometryError("collinear points have no circumcircle")
    return (ab2 * bc2 * ca2) / (4 * twice_area * twice_area)


def iter_block(cell: tuple[int, int]) -> Iterator[tuple[int, int]]:
    """The 3x3 block of cells centered on the given cell."""
    i, j = cell
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            yield (i + di, j + dj)

"""Clique covers from the overlapping grid, and radius-r cluster covers.

The clique cover places every node in each grid cell containing it; a cell
small enough that its diagonal fits inside the mandatory-edge radius makes
each cell's node set a clique.  The cluster cover partitions nodes into
clusters of graph radius at most r whose centers are pairwise more than r
apart, built cell by cell over the four cell parity classes so that
far-apart cells could be processed independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .geometry import GridSpec, cell_parity, grid_cells_of
from .graph import QudgInstance, SpannerGraph, dijkstra_lengths

__all__ = [
    "CoverError",
    "CliqueCover",
    "ClusterCover",
    "clique_cover",
    "cover_cell_step",
    "cluster_cover_reference",
]

Cell = tuple[int, int]


class CoverError(ValueError):
    """Invalid cover construction."""


@dataclass(frozen=True)
class CliqueCover:
    """Node sets per nonempty grid cell, plus the reverse node -> cells map."""

    grid: GridSpec
    cells: dict[Cell, tuple[int, ...]]
    cells_of: dict[int, tuple[Cell, ...]]

    def nodes_in(self, cell: Cell) -> tuple[int, ...]:
        return self.cells.get(cell, ())


def clique_cover(inst: QudgInstance, grid: GridSpec) -> CliqueCover:
    """Assign every node to all grid cells containing it.

    Requires the cell diagonal to fit within the mandatory radius
    (2*beta^2 <= alpha^2, checked exactly), which makes every cell a
    clique of the instance.
    """
    if 2 * Fraction(grid.beta) ** 2 > Fraction(inst.alpha) ** 2:
        raise CoverError(
            f"cell diagonal beta*sqrt(2) exceeds alpha "
            f"(beta={grid.beta}, alpha={inst.alpha}); cells would not be cliques"
        )
    cells: dict[Cell, list[int]] = {}
    cells_of: dict[int, tuple[Cell, ...]] = {}
    for i, p in enumerate(inst.points):
        mine = tuple(sorted(grid_cells_of(p, grid)))
        cells_of[i] = mine
        for c in mine:
            cells.setdefault(c, []).append(i)
    return CliqueCover(
        grid,
        {c: tuple(sorted(v)) for c, v in cells.items()},
        cells_of,
    )


@dataclass
class ClusterCover:
    """Partition of nodes into clusters of graph radius <= r.

    members maps each center to its full cluster (center included);
    center_of is the inverse; creation_order records when each center was
    made; reach caches each center's truncated shortest-path ball.
    """

    host: SpannerGraph
    r: float
    members: dict[int, frozenset[int]]
    center_of: dict[int, int]
    creation_order: list[int]
    reach: dict[int, dict[int, float]] = field(default_factory=dict, repr=False)

    @property
    def centers(self) -> set[int]:
        return set(self.members)


def cover_cell_step(
    cell_nodes: Sequence[int],
    uncovered: set[int],
    prior_centers: Sequence[int],
    within: Callable[[int], Mapping[int, float]],
) -> tuple[list[tuple[int, list[int]]], list[tuple[int, list[int]]]]:
    """Process one cell of the cluster-cover protocol.

    First every existing center, in ascending id order, absorbs the
    still-uncovered cell nodes inside its radius ball; then the remaining
    cell nodes are exhausted by repeatedly making the highest-id uncovered
    node a new center.  ``uncovered`` is mutated in place.  Returns
    (grown, created) as (center, nodes-added) lists.

    within(x) must be the set of nodes at graph distance <= r from x,
    mapped to distances; callers may prefilter prior_centers as long as
    dropped centers could not reach any cell node.
    """
    grown: list[tuple[int, list[int]]] = []
    created: list[tuple[int, list[int]]] = []
    todo = [v for v in cell_nodes if v in uncovered]
    if not todo:
        return grown, created
    for w in sorted(prior_centers):
        ball = within(w)
        added = [v for v in todo if v in uncovered and v in ball]
        if added:
            uncovered.difference_update(added)
            grown.append((w, added))
    todo = [v for v in todo if v in uncovered]
    while todo:
        w = max(todo)
        ball = within(w)
        mine = [v for v in todo if v in ball]
        uncovered.difference_update(mine)
        created.append((w, mine))
        todo = [v for v in todo if v in uncovered]
    return grown, created


def cluster_cover_reference(
    h: SpannerGraph,
    r: float,
    cover: CliqueCover,
    order: Sequence[int] = (0, 1, 2, 3),
) -> ClusterCover:
    """Deterministic cluster cover over the host graph h.

    Cells are processed by parity class in the given order and
    lexicographically within a class.  The result is what the distributed
    protocol computes; with the radius small enough that same-parity cells
    cannot interact, sequential and parallel execution coincide.
    """
    if r <= 0.0:
        raise CoverError(f"cluster radius must be positive, got {r}")
    if sorted(order) != [0, 1, 2, 3]:
        raise CoverError(f"order must be a permutation of 0..3, got {order!r}")
    pts = h.points
    uncovered = set(h.nodes)
    members: dict[int, set[int]] = {}
    creation: list[int] = []
    reach: dict[int, dict[int, float]] = {}

    def within(w: int) -> dict[int, float]:
        if w not in reach:
            reach[w] = dijkstra_lengths(h.adjacency, w, cutoff=r)
        return reach[w]

    by_parity: dict[int, list[Cell]] = {0: [], 1: [], 2: [], 3: []}
    for cell in cover.cells:
        by_parity[cell_parity(cell)].append(cell)
    stride, beta = cover.grid.stride, cover.grid.beta
    for s in order:
        for cell in sorted(by_parity[s]):
            nodes = cover.cells[cell]
            if not any(v in uncovered for v in nodes):
                continue
            # Only centers within Euclidean r of the cell box can reach a
            # cell node (graph distance dominates Euclidean distance).
            ci, cj = cell
            x0, y0 = ci * stride - r, cj * stride - r
            x1, y1 = ci * stride + beta + r, cj * stride + beta + r
            candidates = [
                w for w in members if x0 <= pts[w].x <= x1 and y0 <= pts[w].y <= y1
            ]
            grown, created = cover_cell_step(nodes, uncovered, candidates, within)
            for w, added in grown:
                members[w].update(added)
            for w, mine in created:
                members[w] = set(mine)
                creation.append(w)
    if uncovered:
        raise CoverError(f"cover left nodes uncovered: {sorted(uncovered)}")
    center_of = {v: w for w, vs in members.items() for v in vs}
    return ClusterCover(
        host=h,
        r=r,
        members={w: frozenset(vs) for w, vs in members.items()},
        center_of=center_of,
        creation_order=creation,
        reach=reach,
    )

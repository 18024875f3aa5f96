"""Centralized spanner construction pipelines.

Two constructions over quasi unit disk instances: a sparse
(1+eps)-spanner built from per-cell greedy spanners plus doubly-filtered
cone edges (``los``), and a planar bounded-degree spanner built from the
planarized 1-hop Delaunay structure with per-cell degree reduction,
parity-staged greedy weight reduction, and cluster-based connector
selection (``plos``).  Both are deterministic reference implementations;
the message-passing versions replay them step for step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .covers import CliqueCover, ClusterCover, clique_cover, cluster_cover_reference
from .delaunay import ldel1, pldel
from .geometry import TAU, GridSpec, Point, cell_parity, dist, iter_block
from .graph import (
    EdgeId,
    QudgInstance,
    SpannerGraph,
    components,
    dijkstra_lengths,
    undirected_edge_id,
)
from .kernels import (
    cell_spanner_edges,
    ordered_yao_core,
    reverse_yao,
    select_connectors,
    yao_select,
)

__all__ = [
    "PipelineError",
    "LosParams",
    "PlosParams",
    "derive_k",
    "derive_r_los",
    "derive_r_plos",
    "los_params",
    "plos_params",
    "los",
    "plos",
    "restricted_sp_query",
    "block_nodes",
]

_MODES = ("representative", "literal")


class PipelineError(ValueError):
    """Inconsistent parameters or an instance a pipeline cannot accept."""


def derive_k(delta: float, eps: float) -> int:
    """Smallest cone count k >= 6 with cos(2pi/k) - sin(2pi/k) large enough.

    The threshold (delta+1+eps)/((delta+1)(1+eps)) is < 1 for positive
    delta and eps, and cos - sin increases to 1 as k grows, so the
    ascending scan always terminates.
    """
    if delta <= 0.0 or eps <= 0.0:
        raise PipelineError("delta and eps must be positive")
    need = (delta + 1.0 + eps) / ((delta + 1.0) * (1.0 + eps))
    k = 6
    while math.cos(TAU / k) - math.sin(TAU / k) < need:
        k += 1
    return k


def _r_terms(delta: float, eps: float, k: int) -> tuple[float, float]:
    theta = TAU / k
    slack = (delta + 1.0) * (1.0 + eps) * (math.cos(theta) - math.sin(theta)) - (
        delta + 1.0 + eps
    )
    return slack, delta * eps


def derive_r_los(delta: float, eps: float, k: int, mode: str = "literal") -> float:
    """Largest admissible cluster radius for the cone pipeline.

    Two ceilings apply: the cone slack left over by the choice of k, and
    the delta*eps base-case ceiling.  Literal mode divides both by 4; the
    representative connector mode has to survive a doubled detour at both
    ends of a connector, so both ceilings shrink to an eighth.
    """
    if mode not in _MODES:
        raise PipelineError(f"unknown connector mode {mode!r}")
    slack, base = _r_terms(delta, eps, k)
    div = 4.0 if mode == "literal" else 8.0
    r = min(slack / div, base / div)
    if r <= 0.0:
        raise PipelineError(
            f"derived cluster radius {r} is not positive; inconsistent k={k}"
        )
    return r


def derive_r_plos(delta: float, eps: float, mode: str = "literal") -> float:
    """Cluster radius for the planar pipeline: eps*delta/4, halved in
    representative mode."""
    if mode not in _MODES:
        raise PipelineError(f"unknown connector mode {mode!r}")
    if delta <= 0.0 or eps <= 0.0:
        raise PipelineError("delta and eps must be positive")
    div = 4.0 if mode == "literal" else 8.0
    return delta * eps / div


def _check_grid_fit(beta: float, delta: float, limit: float, what: str) -> None:
    # exact rational comparisons; beta at the diagonal boundary is fine
    # because half-open cells keep in-cell distances strictly below beta*sqrt2
    if not 0.0 < beta:
        raise PipelineError(f"beta must be positive, got {beta}")
    if 2 * Fraction(beta) ** 2 > Fraction(limit) ** 2:
        raise PipelineError(f"beta {beta} too large for {what} {limit}")
    if not 0.0 < delta or Fraction(delta) >= Fraction(beta) / 4:
        raise PipelineError(f"delta must be in (0, beta/4), got {delta}")


def _check_radius(r: float, beta: float, delta: float, reach: float) -> None:
    if r <= 0.0:
        raise PipelineError(f"cluster radius must be positive, got {r}")
    if Fraction(r) >= Fraction(beta) - 4 * Fraction(delta):
        raise PipelineError(
            f"cluster radius {r} reaches across cell overlaps (needs r < beta-4*delta)"
        )
    if 2.0 * r + beta * math.sqrt(2.0) > reach:
        raise PipelineError(
            f"clusters plus cell diagonal exceed the mandatory range {reach}"
        )


@dataclass(frozen=True)
class LosParams:
    """Validated parameter block for the cone pipeline."""

    alpha: float
    beta: float
    delta: float
    eps: float
    k: int
    theta: float
    r: float
    mode: str = "representative"

    def validate(self) -> "LosParams":
        if not 0.0 < self.alpha <= 1.0:
            raise PipelineError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.eps <= 0.0:
            raise PipelineError(f"eps must be positive, got {self.eps}")
        _check_grid_fit(self.beta, self.delta, self.alpha, "alpha")
        if self.mode not in _MODES:
            raise PipelineError(f"unknown connector mode {self.mode!r}")
        if self.k < 6 or self.theta != TAU / self.k:
            raise PipelineError("theta must equal 2*pi/k with k >= 6")
        need = (self.delta + 1.0 + self.eps) / (
            (self.delta + 1.0) * (1.0 + self.eps)
        )
        if math.cos(self.theta) - math.sin(self.theta) < need:
            raise PipelineError(f"cone count k={self.k} violates the angle bound")
        slack, base = _r_terms(self.delta, self.eps, self.k)
        div = 4.0 if self.mode == "literal" else 8.0
        if self.r > min(slack / div, base / div):
            raise PipelineError(f"cluster radius {self.r} exceeds the derived bound")
        _check_radius(self.r, self.beta, self.delta, self.alpha)
        return self


def los_params(
    alpha: float,
    beta: float,
    delta: float,
    eps: float,
    mode: str = "representative",
) -> LosParams:
    k = derive_k(delta, eps)
    r = derive_r_los(delta, eps, k, mode)
    return LosParams(alpha, beta, delta, eps, k, TAU / k, r, mode).validate()


@dataclass(frozen=True)
class PlosParams:
    """Validated parameter block for the planar pipeline."""

    beta: float
    delta: float
    eps: float
    r: float
    mode: str = "representative"

    def validate(self) -> "PlosParams":
        if not 0.0 < self.eps < 2.0:
            raise PipelineError(
                f"eps must be in (0, 2) for block-restricted queries, got {self.eps}"
            )
        _check_grid_fit(self.beta, self.delta, 1.0, "the unit range")
        if self.mode not in _MODES:
            raise PipelineError(f"unknown connector mode {self.mode!r}")
        div = 4.0 if self.mode == "literal" else 8.0
        if self.r > self.eps * self.delta / div:
            raise PipelineError(f"cluster radius {self.r} exceeds eps*delta/{int(div)}")
        _check_radius(self.r, self.beta, self.delta, 1.0)
        return self


def plos_params(
    beta: float, delta: float, eps: float, mode: str = "representative"
) -> PlosParams:
    r = derive_r_plos(delta, eps, mode)
    return PlosParams(beta, delta, eps, r, mode).validate()


def block_nodes(cover: CliqueCover, cell: tuple[int, int]) -> set[int]:
    """Nodes living in the 3x3 block of cells centered on cell."""
    out: set[int] = set()
    for c in iter_block(cell):
        out.update(cover.nodes_in(c))
    return out


def _sp_within(
    adj: Mapping[int, Mapping[int, float]],
    u: int,
    v: int,
    budget: float,
    allowed: set[int] | None,
) -> bool:
    reach = dijkstra_lengths(adj, u, cutoff=budget, allowed=allowed)
    return v in reach


def restricted_sp_query(
    q: SpannerGraph,
    u: int,
    v: int,
    eps: float,
    cell_nbhd: set[int] | None,
) -> bool:
    """Does q hold a path from u to v of length at most (1+eps)*|uv|?

    With cell_nbhd given, the search never leaves that node set; the
    caller passes the 3x3 block of the cell being processed.  With small
    enough eps the answer provably matches the unrestricted query, since
    any witness path stays inside the block.
    """
    budget = (1.0 + eps) * dist(q.points[u], q.points[v])
    return _sp_within(q.adjacency, u, v, budget, cell_nbhd)


def los(
    inst: QudgInstance,
    eps: float,
    beta: float,
    delta: float,
    mode: str = "representative",
    params: LosParams | None = None,
) -> SpannerGraph:
    """Cone-based (1+eps)-spanner construction.

    Step 1 covers the instance with overlapping grid cliques and runs the
    greedy spanner inside each.  Step 2 applies a cone filter to the
    leftover cross-cell edges, step 3 prunes the filter output once more
    from the head side, and step 4 keeps only the pruned edges needed to
    connect an r-cluster cover of the step-1 graph.  Requires a connected
    instance.
    """
    if params is None:
        params = los_params(inst.alpha, beta, delta, eps, mode)
    else:
        params.validate()
    full = SpannerGraph.full(inst)
    comps = components(full)
    if len(comps) != 1:
        raise PipelineError(f"instance is disconnected ({len(comps)} components)")

    grid = GridSpec(params.beta, params.delta)
    cover = clique_cover(inst, grid)
    pts = inst.points

    h = SpannerGraph(inst)
    cell_spanners: dict[tuple[int, int], tuple[tuple[int, int], ...]] = {}
    for cell in sorted(cover.cells):
        ids = cover.cells[cell]
        if len(ids) < 2:
            cell_spanners[cell] = ()
            continue
        pairs = tuple(cell_spanner_edges(ids, pts, params.eps))
        cell_spanners[cell] = pairs
        for u, v in pairs:
            h.add_edge(u, v, tag="greedy")

    cell_sets = {u: set(cs) for u, cs in cover.cells_of.items()}
    e0_pairs = tuple(
        (u, v)
        for u, v in sorted(inst.edges)
        if not (cell_sets[u] & cell_sets[v])
    )
    e0 = SpannerGraph(inst)
    for u, v in e0_pairs:
        e0.add_edge(u, v, tag="e0")
    ey = yao_select(e0, params.k)
    eyy = reverse_yao(ey, params.k)

    clusters = cluster_cover_reference(h, params.r, cover)
    candidates = [
        undirected_edge_id(dist(pts[u], pts[v]), u, v)
        for u, v in sorted(eyy.undirected_pairs())
    ]
    connectors = select_connectors(candidates, clusters.center_of, params.mode)
    for e in connectors:
        h.add_edge(e.src, e.dst, tag="connector")

    h.meta.update(
        kind="los",
        params=params,
        cover=cover,
        clusters=clusters,
        cell_spanners=cell_spanners,
        e0=e0_pairs,
        ey=frozenset(ey.arcs),
        eyy=frozenset(eyy.arcs),
        connectors=tuple((e.src, e.dst) for e in connectors),
    )
    return h


def _adjacency_of(
    edges: Iterable[tuple[int, int]], pts: Sequence[Point]
) -> dict[int, dict[int, float]]:
    adj: dict[int, dict[int, float]] = {}
    for u, v in edges:
        d = dist(pts[u], pts[v])
        adj.setdefault(u, {})[v] = d
        adj.setdefault(v, {})[u] = d
    return adj


def plos(
    inst: QudgInstance,
    eps: float,
    beta: float,
    delta: float,
    mode: str = "representative",
    cluster_host: str = "ydel",
    collect: bool = False,
    params: PlosParams | None = None,
) -> SpannerGraph:
    """Planar bounded-degree spanner construction for unit disk instances.

    Step 1 builds the planarized 1-hop Delaunay structure and the grid
    clique cover.  Step 2 runs the ordering-driven cone filter per cell
    over the structure edges incident to the cell, keeping the union.
    Step 3 visits cells in four parity stages; each cell decides its
    internal surviving edges in ascending id order with a greedy
    shortest-path query restricted to the 3x3 block, against a query
    graph snapshotted at the start of the stage (minus the edges under
    decision, plus its own acceptances).  Rejected edges are eliminated,
    accepted ones enter the output.  Step 4 clusters the surviving graph
    with radius r and adds connecting edges between clusters.

    cluster_host picks the graph whose distances drive the clustering:
    the step-3 survivors ("ydel", default), the accepted edges only
    ("h"), or the full planar structure ("pldel").  With collect=True the
    per-stage snapshots land in meta for invariant checks.
    """
    if inst.alpha != 1:
        raise PipelineError("planar pipeline needs a unit disk instance (alpha=1)")
    if params is None:
        params = plos_params(beta, delta, eps, mode)
    else:
        params.validate()
    if cluster_host not in ("ydel", "h", "pldel"):
        raise PipelineError(f"unknown cluster host {cluster_host!r}")

    structure = pldel(ldel1(inst))
    grid = GridSpec(params.beta, params.delta)
    cover = clique_cover(inst, grid)
    pts = inst.points

    # step 2: per-cell degree bounding, union over cells
    ydel: set[tuple[int, int]] = set()
    ydel_cells: dict[tuple[int, int], tuple[tuple[int, int], ...]] = {}
    struct_adj = structure.adjacency
    for cell in sorted(cover.cells):
        members = set(cover.cells[cell])
        incident = sorted(
            (u, v)
            for u, v in structure.edges
            if u in members or v in members
        )
        if not incident:
            ydel_cells[cell] = ()
            continue
        nodes = sorted({n for e in incident for n in e} | members)
        pairs = tuple(ordered_yao_core(nodes, incident, pts))
        ydel_cells[cell] = pairs
        ydel.update(pairs)

    # step 3: parity-staged greedy over cell-internal edges
    alive: set[tuple[int, int]] = set(ydel)
    cell_sets = {u: set(cs) for u, cs in cover.cells_of.items()}
    assigned: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for u, v in sorted(alive):
        shared = cell_sets[u] & cell_sets[v]
        if shared:
            # an edge inside several cells is decided exactly once, by the
            # earliest cell in stage order
            home = min(shared, key=lambda c: (cell_parity(c), c))
            assigned.setdefault(home, []).append((u, v))

    accepted: list[tuple[int, int]] = []
    accepted_cells: dict[tuple[int, int], tuple[tuple[int, int], ...]] = {}
    stage_log: list[dict] = []
    for stage in range(4):
        snapshot = frozenset(alive)
        rejected_stage: set[tuple[int, int]] = set()
        processed_stage: list[tuple[int, int]] = []
        for cell in sorted(c for c in assigned if cell_parity(c) == stage):
            todo = assigned[cell]
            mine = set(todo)
            allowed = block_nodes(cover, cell)
            q_adj = _adjacency_of(
                (e for e in snapshot if e not in mine), pts
            )
            got: list[tuple[int, int]] = []
            for eid in sorted(
                undirected_edge_id(dist(pts[u], pts[v]), u, v) for u, v in todo
            ):
                budget = (1.0 + params.eps) * eid.length
                if _sp_within(q_adj, eid.src, eid.dst, budget, allowed):
                    rejected_stage.add((eid.src, eid.dst))
                else:
                    got.append((eid.src, eid.dst))
                    q_adj.setdefault(eid.src, {})[eid.dst] = eid.length
                    q_adj.setdefault(eid.dst, {})[eid.src] = eid.length
                processed_stage.append((eid.src, eid.dst))
            accepted_cells[cell] = tuple(got)
            accepted.extend(got)
        alive -= rejected_stage
        if collect:
            stage_log.append(
                {
                    "stage": stage,
                    "alive": frozenset(alive),
                    "processed": tuple(processed_stage),
                }
            )

    # step 4: cluster the chosen host graph, connect the clusters
    host_edges = {
        "ydel": alive,
        "h": set(accepted),
        "pldel": set(structure.edges),
    }[cluster_host]
    host = SpannerGraph(inst)
    for u, v in sorted(host_edges):
        host.add_edge(u, v, tag="host")
    clusters = cluster_cover_reference(host, params.r, cover)
    candidates = [
        undirected_edge_id(dist(pts[u], pts[v]), u, v) for u, v in sorted(alive)
    ]
    connectors = select_connectors(candidates, clusters.center_of, params.mode)

    h = SpannerGraph(inst)
    for u, v in sorted(accepted):
        h.add_edge(u, v, tag="greedy")
    for e in connectors:
        h.add_edge(e.src, e.dst, tag="connector")

    h.meta.update(
        kind="plos",
        params=params,
        cover=cover,
        clusters=clusters,
        cluster_host=cluster_host,
        structure=frozenset(structure.edges),
        structure_meta=structure.meta,
        ydel=frozenset(ydel),
        ydel_cells=ydel_cells,
        alive=frozenset(alive),
        accepted_cells=accepted_cells,
        connectors=tuple((e.src, e.dst) for e in connectors),
    )
    if collect:
        h.meta["stage_log"] = tuple(stage_log)
    return h

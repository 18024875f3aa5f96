"""Synchronous message-passing execution of the spanner constructions.

A small round-based engine drives per-node programs that may only message
current graph neighbors, with a hard cap on payload entries per message.
On top of it sit distributed versions of the cluster cover and of both
pipelines.  Each node replays the same deterministic subroutines the
centralized code uses, on knowledge gathered from bounded-hop exchange,
so the merged outputs are expected to equal the reference results edge
for edge; the planar pipeline additionally supports an omniscient
post-run audit of the knowledge each deciding cell actually had.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from operator import attrgetter
from typing import Iterable, Mapping, Sequence

from .covers import CliqueCover, cover_cell_step
from .delaunay import _gabriel_open_disk_sign, delaunay
from .geometry import (
    GridSpec,
    Point,
    cell_parity,
    circumradius2,
    dist,
    grid_cells_of,
    iter_block,
    segments_properly_intersect,
)
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
    ordered_yao_steps,
    reverse_yao_arcs_for_node,
    select_connectors,
    yao_arcs_for_node,
)
from .pipelines import (
    LosParams,
    PlosParams,
    los_params,
    plos,
    plos_params,
)

__all__ = [
    "SimulationError",
    "PAYLOAD_CAP",
    "Message",
    "RoundRow",
    "RoundTrace",
    "NodeProgram",
    "run_protocol",
    "distributed_cluster_cover",
    "distributed_los",
    "distributed_plos",
]

# Hard per-message payload size, in scalar entries.  The widest record any
# protocol sends is the six-entry planarization rank record; chunked batches
# of narrow records fill messages to exactly this cap, and the communication
# claims are measured against it.
PAYLOAD_CAP = 8

Cell = tuple[int, int]
Pair = tuple[int, int]


class SimulationError(RuntimeError):
    """A protocol violated the engine's rules or failed to make progress."""


def _pair(u: int, v: int) -> Pair:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Message:
    """One message: a tuple of records, each a flat tuple of scalars.

    ``seq`` is the per-sender emission index; deliveries are sorted by
    (src, seq) so inbox order never depends on engine scheduling.
    """

    src: int
    dst: int
    kind: str
    payload: tuple[tuple, ...]
    seq: int = 0

    @cached_property
    def entries(self) -> int:
        return sum(len(rec) for rec in self.payload)


def chunk_records(
    records: Sequence[tuple], cap: int = PAYLOAD_CAP
) -> list[tuple[tuple, ...]]:
    """Pack records in order into payloads of at most cap entries each."""
    out: list[tuple[tuple, ...]] = []
    cur: list[tuple] = []
    used = 0
    for rec in records:
        need = len(rec)
        if need > cap:
            raise SimulationError(
                f"record with {need} entries cannot fit the {cap}-entry cap"
            )
        if cur and used + need > cap:
            out.append(tuple(cur))
            cur, used = [], 0
        cur.append(rec)
        used += need
    if cur:
        out.append(tuple(cur))
    return out


@dataclass(frozen=True)
class RoundRow:
    t: int
    msgs: int
    max_entries: int
    phase: str


@dataclass(frozen=True)
class RoundTrace:
    """Per-round message statistics of one protocol run."""

    rows: tuple[RoundRow, ...]

    @property
    def rounds_elapsed(self) -> int:
        return len(self.rows)

    @property
    def total_msgs(self) -> int:
        return sum(r.msgs for r in self.rows)

    @property
    def max_payload_entries(self) -> int:
        return max((r.max_entries for r in self.rows), default=0)

    def text(self) -> str:
        return "\n".join(
            f"round {r.t} msgs {r.msgs} max_payload_entries {r.max_entries}"
            for r in self.rows
        )

    def to_json(self) -> dict:
        return {
            "rounds_elapsed": self.rounds_elapsed,
            "total_msgs": self.total_msgs,
            "max_payload_entries": self.max_payload_entries,
            "rounds": [
                {
                    "round": r.t,
                    "msgs": r.msgs,
                    "max_payload_entries": r.max_entries,
                    "phase": r.phase,
                }
                for r in self.rows
            ],
        }


class NodeProgram:
    """Base class for per-node protocol logic.

    Subclasses implement on_round(t, inbox), emitting messages through
    ``send``/``broadcast`` and setting ``done`` when their schedule ends.
    A done program keeps receiving (final deliveries drain through it) but
    must not send.  Every handler must tolerate any execution order of the
    nodes within a round; the engine exercises permutations in tests.
    """

    def __init__(self, node: int, point: Point, nbrs: Mapping[int, float]):
        self.node = node
        self.point = point
        self.nbrs = dict(nbrs)
        self.done = False
        self.phase = "init"
        self._seq = 0
        self._out: list[Message] = []

    # -- messaging -----------------------------------------------------

    def send(self, dst: int, kind: str, records: Sequence[tuple]) -> None:
        for payload in chunk_records(records):
            self._out.append(Message(self.node, dst, kind, payload, self._seq))
            self._seq += 1

    def broadcast(self, kind: str, records: Sequence[tuple]) -> None:
        if not records:
            return
        chunks = chunk_records(records)
        for w in sorted(self.nbrs):
            for payload in chunks:
                self._out.append(Message(self.node, w, kind, payload, self._seq))
                self._seq += 1

    # -- engine interface ----------------------------------------------

    def step(self, t: int, inbox: list[Message]) -> list[Message]:
        for m in inbox:
            if m.src not in self.nbrs:
                raise SimulationError(
                    f"node {self.node} received a message from non-neighbor {m.src}"
                )
        was_done = self.done
        self._out = []
        self.on_round(t, inbox)
        out, self._out = self._out, []
        if was_done and out:
            raise SimulationError(f"done node {self.node} tried to send")
        return out

    def on_round(self, t: int, inbox: list[Message]) -> None:
        raise NotImplementedError


def run_protocol(
    inst: QudgInstance,
    programs: Mapping[int, NodeProgram],
    *,
    max_rounds: int = 64,
    payload_cap: int = PAYLOAD_CAP,
    order: Sequence[int] | None = None,
) -> RoundTrace:
    """Run programs to quiescence and return the round trace.

    A round delivers the previous round's messages (sorted by sender and
    emission index), then steps every node.  Rounds entered with every
    program already done count as drain, not elapsed time; the run ends
    when such a round also sends nothing.  Sending to a non-neighbor or
    exceeding the payload cap aborts the run.
    """
    ids = sorted(programs)
    if list(ids) != sorted(inst.nodes):
        raise SimulationError("programs must cover exactly the instance nodes")
    if order is None:
        order = ids
    elif sorted(order) != ids:
        raise SimulationError("order must be a permutation of the node ids")
    adj = inst.adjacency
    pending: list[Message] = []
    rows: list[RoundRow] = []
    for t in range(1, max_rounds + 1):
        idle_entry = all(programs[u].done for u in ids)
        by_dst: dict[int, list[Message]] = {}
        for m in pending:
            by_dst.setdefault(m.dst, []).append(m)
        for box in by_dst.values():
            box.sort(key=attrgetter("src", "seq"))
        sends: list[Message] = []
        max_entries = 0
        for u in order:
            out = programs[u].step(t, by_dst.get(u, []))
            for m in out:
                if m.src != u:
                    raise SimulationError(f"node {u} forged sender id {m.src}")
                if m.dst not in adj[u]:
                    raise SimulationError(
                        f"node {u} sent to non-neighbor {m.dst} in round {t}"
                    )
                if m.entries > payload_cap:
                    raise SimulationError(
                        f"message from {u} carries {m.entries} entries "
                        f"(cap {payload_cap})"
                    )
                max_entries = max(max_entries, m.entries)
            sends.extend(out)
        if not idle_entry:
            rows.append(
                RoundRow(t, len(sends), max_entries, programs[ids[0]].phase)
            )
        if not sends and all(programs[u].done for u in ids):
            return RoundTrace(tuple(rows))
        pending = sends
    undone = [u for u in ids if not programs[u].done]
    stuck = undone[0] if undone else ids[0]
    raise SimulationError(
        f"protocol did not quiesce within {max_rounds} rounds; "
        f"node {stuck} stuck in phase {programs[stuck].phase!r}"
    )


# ---------------------------------------------------------------------------
# shared replication machinery


class _CoverState:
    """One node's replica of the cluster-cover bookkeeping.

    ``known`` maps nodes to their centers as coverage becomes known; the
    cell resolution replays the reference cell step against it, which is
    exact because every center and host edge that can influence an own
    cell sits within direct radio range (2r + cell diagonal <= range).
    """

    def __init__(self, r: float):
        self.r = r
        self.known: dict[int, int] = {}
        self._balls: dict[int, dict[int, float]] = {}

    def learn(self, v: int, c: int) -> None:
        prev = self.known.get(v)
        if prev is not None and prev != c:
            raise SimulationError(
                f"conflicting coverage for node {v}: {prev} vs {c}"
            )
        self.known[v] = c

    def resolve_cell(
        self, members: Sequence[int], host_adj: Mapping[int, Mapping[int, float]]
    ) -> None:
        uncovered = {v for v in members if v not in self.known}
        if not uncovered:
            return

        def within(w: int) -> Mapping[int, float]:
            if w not in self._balls:
                self._balls[w] = dijkstra_lengths(host_adj, w, cutoff=self.r)
            return self._balls[w]

        prior = sorted(set(self.known.values()))
        grown, created = cover_cell_step(members, uncovered, prior, within)
        for w, added in grown:
            for v in added:
                self.learn(v, w)
        for w, mine in created:
            for v in mine:
                self.learn(v, w)


class _ProtocolProgram(NodeProgram):
    """Shared state for the pipeline protocols: coordinates, grid cells,
    and the cluster sub-protocol driven over a host-graph view."""

    def __init__(
        self,
        node: int,
        point: Point,
        nbrs: Mapping[int, float],
        grid: GridSpec,
        r: float,
        cell_memo: dict | None = None,
    ):
        super().__init__(node, point, nbrs)
        self.grid = grid
        self.coords: dict[int, Point] = {}
        # cell membership is derived from coordinates once per node; the
        # exact rational cell test is too slow to repeat every round, and
        # the runner shares one memo across all programs since the test is
        # a pure function of the coordinates
        self._cell_memo = {} if cell_memo is None else cell_memo
        self._cells_by_node: dict[int, tuple[Cell, ...]] = {}
        self._cell_members: dict[Cell, set[int]] = {}
        self._index_coord(node, point)
        self.my_cells = self._cells_by_node[node]
        self.cover = _CoverState(r)
        self._newly_covered = False
        self._forwarded: set[tuple[int, int]] = set()

    # -- geometry helpers ----------------------------------------------

    def _index_coord(self, v: int, p: Point) -> None:
        self.coords[v] = p
        key = (p.x, p.y)
        cells = self._cell_memo.get(key)
        if cells is None:
            cells = tuple(sorted(grid_cells_of(p, self.grid)))
            self._cell_memo[key] = cells
        self._cells_by_node[v] = cells
        for c in cells:
            self._cell_members.setdefault(c, set()).add(v)

    def cells_of(self, v: int) -> tuple[Cell, ...]:
        return self._cells_by_node[v]

    def members_of(self, cell: Cell) -> tuple[int, ...]:
        return tuple(sorted(self._cell_members.get(cell, ())))

    def my_cell_of_parity(self, s: int) -> Cell | None:
        for c in self.my_cells:
            if cell_parity(c) == s:
                return c
        return None

    def learn_coord(self, v: int, x: float, y: float) -> None:
        prev = self.coords.get(v)
        if prev is not None:
            if prev != Point(x, y):
                raise SimulationError(f"conflicting coordinates for node {v}")
            return
        self._index_coord(v, Point(x, y))

    def hello_records(self) -> list[tuple]:
        return [(self.node, self.point.x, self.point.y)]

    # -- cluster sub-protocol ------------------------------------------

    def cluster_forward(self, s: int) -> None:
        # (B) round: members of a parity-s cell forward what they know about
        # that cell's coverage so the resolving round sees it.  Records each
        # neighbor already heard from us are skipped; coverage never changes
        # once assigned, so forwarding a record once is enough.
        cell = self.my_cell_of_parity(s)
        if cell is None:
            return
        recs = []
        for v in self.members_of(cell):
            c = self.cover.known.get(v)
            if c is not None and (v, c) not in self._forwarded:
                self._forwarded.add((v, c))
                recs.append((v, c))
        self.broadcast("cv", recs)

    def cluster_resolve(self, s: int, host_adj) -> None:
        # (E) round: replay the reference cell step, then announce own
        # coverage the moment it is decided.
        cell = self.my_cell_of_parity(s)
        if cell is not None:
            before = self.node in self.cover.known
            self.cover.resolve_cell(self.members_of(cell), host_adj)
            if not before and self.node in self.cover.known:
                self._newly_covered = True
        if self._newly_covered:
            self.broadcast("cv", [(self.node, self.cover.known[self.node])])
            self._newly_covered = False

    @property
    def my_center(self) -> int:
        c = self.cover.known.get(self.node)
        if c is None:
            raise SimulationError(f"node {self.node} finished uncovered")
        return c


def _finish_isolated(prog: _ProtocolProgram) -> None:
    # no neighbors: the whole construction collapses to a self-cluster
    prog.cover.known[prog.node] = prog.node
    prog.done = True


def _merge_outputs(
    inst: QudgInstance,
    greedy: Iterable[Pair],
    connectors: Iterable[Pair],
    meta: dict,
) -> SpannerGraph:
    g = SpannerGraph(inst, meta=meta)
    for u, v in sorted(set(greedy)):
        g.add_edge(u, v, tag="greedy")
    for u, v in sorted(set(connectors)):
        g.add_edge(u, v, tag="connector")
    return g


def _representative_winners(
    records: Iterable[tuple[int, int, int, int, float]], me: int
) -> list[Pair]:
    """Minimum-id candidate per cluster pair, for pairs involving me.

    Mirrors the reference connector selection: ascending undirected edge
    id, first edge per unordered center pair wins.
    """
    best: dict[tuple[int, int], EdgeId] = {}
    for u, v, cu, cv, d in records:
        if cu == cv or me not in (cu, cv):
            continue
        key = (cu, cv) if cu < cv else (cv, cu)
        eid = undirected_edge_id(d, u, v)
        cur = best.get(key)
        if cur is None or eid < cur:
            best[key] = eid
    return [(e.src, e.dst) for e in best.values()]


# ---------------------------------------------------------------------------
# distributed cluster cover (standalone)


class _ClusterProgram(_ProtocolProgram):
    """Cluster cover over a pre-agreed host graph.

    Schedule: round 1 coordinates, round 2 incident host edges, rounds
    3..10 the four (forward, resolve) parity iterations.
    """

    def __init__(self, node, point, nbrs, grid, r, host_edges: list[tuple[int, int, float]],
                 cell_memo=None):
        super().__init__(node, point, nbrs, grid, r, cell_memo)
        self._host_mine = host_edges
        self.host_view: dict[int, dict[int, float]] = {}
        for u, v, d in host_edges:
            self.host_view.setdefault(u, {})[v] = d
            self.host_view.setdefault(v, {})[u] = d

    def on_round(self, t: int, inbox: list[Message]) -> None:
        for m in inbox:
            if m.kind == "co":
                for v, x, y in m.payload:
                    self.learn_coord(v, x, y)
            elif m.kind == "he":
                for u, v, d in m.payload:
                    self.host_view.setdefault(u, {})[v] = d
                    self.host_view.setdefault(v, {})[u] = d
            elif m.kind == "cv":
                for v, c in m.payload:
                    self.cover.learn(v, c)
        if self.done:
            return
        if t == 1:
            self.phase = "hello"
            self.broadcast("co", self.hello_records())
            if not self.nbrs:
                _finish_isolated(self)
        elif t == 2:
            self.phase = "host-share"
            self.broadcast("he", [(u, v, d) for u, v, d in self._host_mine])
        elif 3 <= t <= 10:
            s = (t - 3) // 2
            self.phase = f"cluster-{s}"
            if t % 2 == 1:
                self.cluster_forward(s)
            else:
                self.cluster_resolve(s, self.host_view)
            if t == 10:
                self.done = True


def distributed_cluster_cover(
    host: SpannerGraph,
    r: float,
    cover: CliqueCover,
    *,
    order: Sequence[int] | None = None,
) -> tuple[dict[int, int], dict[int, frozenset[int]], RoundTrace]:
    """Message-passing cluster cover; equals the reference bit for bit.

    Every node starts knowing its own incident host edges and the grid.
    Returns (center_of, members, trace).
    """
    inst = host.inst
    grid = cover.grid
    if r <= 0.0:
        raise SimulationError(f"cluster radius must be positive, got {r}")
    if Fraction(r) >= Fraction(grid.beta) - 4 * Fraction(grid.delta):
        raise SimulationError(f"cluster radius {r} reaches across cell overlaps")
    if 2.0 * r + grid.beta * math.sqrt(2.0) > inst.alpha:
        raise SimulationError(
            "clusters plus cell diagonal exceed the mandatory range; "
            "nodes could not gather the edges their decisions depend on"
        )
    by_node: dict[int, list[tuple[int, int, float]]] = {u: [] for u in inst.nodes}
    for (u, v), d in host.edges.items():
        by_node[u].append((u, v, d))
        by_node[v].append((u, v, d))
    memo: dict = {}
    programs = {
        u: _ClusterProgram(
            u, inst.points[u], inst.adjacency[u], grid, r, sorted(by_node[u]), memo
        )
        for u in inst.nodes
    }
    trace = run_protocol(inst, programs, max_rounds=14, order=order)
    center_of = {u: programs[u].my_center for u in inst.nodes}
    members: dict[int, set[int]] = {}
    for u, c in center_of.items():
        members.setdefault(c, set()).add(u)
    return (
        center_of,
        {c: frozenset(vs) for c, vs in members.items()},
        trace,
    )


# ---------------------------------------------------------------------------
# distributed cone pipeline


class _LosProgram(_ProtocolProgram):
    """Node program for the cone construction.

    Schedule: 1 coordinates; 2 own-cell greedy spanners, cross-cell cone
    picks; 3..10 cluster iterations over the greedy graph; 11 centers and
    survivor notices; 12 connector candidates.  A final drain round
    delivers the candidates to the cluster centers.
    """

    def __init__(self, node, point, nbrs, grid, params: LosParams, cell_memo=None):
        super().__init__(node, point, nbrs, grid, params.r, cell_memo)
        self.params = params
        self.my_spanners: dict[Cell, tuple[Pair, ...]] = {}
        self.h_view: dict[int, dict[int, float]] = {}
        self.yao_out: list[Pair] = []          # arcs I selected as tail
        self.tails_in: list[tuple[int, float]] = []
        self.eyy_in: list[Pair] = []           # surviving arcs I head
        self.survived_out: list[Pair] = []     # my yao arcs that survived
        self.center_of_nbr: dict[int, int] = {}
        self.cand_records: list[tuple[int, int, int, int, float]] = []

    def _absorb(self, m: Message) -> None:
        if m.kind == "co":
            for v, x, y in m.payload:
                self.learn_coord(v, x, y)
        elif m.kind == "he":
            for u, v, d in m.payload:
                self.h_view.setdefault(u, {})[v] = d
                self.h_view.setdefault(v, {})[u] = d
        elif m.kind == "ya":
            for u, v in m.payload:
                if v != self.node:
                    raise SimulationError("cone arc delivered to the wrong head")
                self.tails_in.append((u, dist(self.coords[u], self.point)))
        elif m.kind == "cv":
            for v, c in m.payload:
                self.cover.learn(v, c)
        elif m.kind == "ce":
            for v, c in m.payload:
                self.center_of_nbr[v] = c
        elif m.kind == "ys":
            for u, v in m.payload:
                self.survived_out.append((u, v))
        elif m.kind == "cd":
            for rec in m.payload:
                self.cand_records.append(rec)
        else:
            raise SimulationError(f"unknown message kind {m.kind!r}")

    def on_round(self, t: int, inbox: list[Message]) -> None:
        for m in inbox:
            self._absorb(m)
        if self.done:
            return
        if t == 1:
            self.phase = "hello"
            self.broadcast("co", self.hello_records())
            if not self.nbrs:
                _finish_isolated(self)
        elif t == 2:
            self.phase = "spanners"
            self._build_cells_and_spanners()
        elif 3 <= t <= 10:
            s = (t - 3) // 2
            self.phase = f"cluster-{s}"
            if t == 3:
                self.eyy_in = sorted(
                    reverse_yao_arcs_for_node(
                        self.node, self.tails_in, self.coords, self.params.k
                    )
                )
            if t % 2 == 1:
                self.cluster_forward(s)
            else:
                self.cluster_resolve(s, self.h_view)
        elif t == 11:
            self.phase = "centers"
            self.broadcast("ce", [(self.node, self.my_center)])
            for u, v in self.eyy_in:
                self.send(u, "ys", [(u, v)])
        elif t == 12:
            self.phase = "candidates"
            self.broadcast("cd", self._my_candidates())
            self.done = True

    def _build_cells_and_spanners(self) -> None:
        pts = self.coords
        for cell in self.my_cells:
            ids = self.members_of(cell)
            pairs = (
                tuple(cell_spanner_edges(ids, pts, self.params.eps))
                if len(ids) >= 2
                else ()
            )
            self.my_spanners[cell] = pairs
            for u, v in pairs:
                d = dist(pts[u], pts[v])
                self.h_view.setdefault(u, {})[v] = d
                self.h_view.setdefault(v, {})[u] = d
        mine = [
            (self.node, w, d)
            for w, d in sorted(self.h_view.get(self.node, {}).items())
        ]
        self.broadcast("he", mine)
        # cross-cell edges: instance neighbors sharing none of my cells
        my_set = set(self.my_cells)
        e0_nbrs = {
            v: d
            for v, d in self.nbrs.items()
            if not (my_set & set(self.cells_of(v)))
        }
        self.yao_out = yao_arcs_for_node(self.node, e0_nbrs, pts, self.params.k)
        for u, v in sorted(self.yao_out):
            self.send(v, "ya", [(u, v)])

    def _my_candidates(self) -> list[tuple[int, int, int, int, float]]:
        out = []
        arcs = list(self.eyy_in) + [
            (u, v) for u, v in self.survived_out if u == self.node
        ]
        for u, v in sorted(set(arcs)):
            cu = self.my_center if u == self.node else self.center_of_nbr[u]
            cv = self.my_center if v == self.node else self.center_of_nbr[v]
            out.append((u, v, cu, cv, dist(self.coords[u], self.coords[v])))
        return out

    def assertions(self) -> tuple[list[Pair], list[Pair]]:
        greedy = [p for pairs in self.my_spanners.values() for p in pairs]
        if self.cover.known.get(self.node) != self.node:
            return greedy, []
        # cluster centers pick the connectors
        records = self.cand_records + self._my_candidates()
        if self.params.mode == "literal":
            chosen = [
                _pair(u, v)
                for u, v, cu, cv, _ in records
                if cu == u and cv == v and cu != cv
            ]
        else:
            chosen = _representative_winners(records, self.node)
        return greedy, chosen


def distributed_los(
    inst: QudgInstance,
    eps: float,
    beta: float,
    delta: float,
    mode: str = "representative",
    params: LosParams | None = None,
    *,
    order: Sequence[int] | None = None,
) -> tuple[SpannerGraph, RoundTrace]:
    """Message-passing version of the cone pipeline.

    Returns (graph, trace); the graph's edges and tags equal the
    centralized result on the same instance and parameters.
    """
    if params is None:
        params = los_params(inst.alpha, beta, delta, eps, mode)
    else:
        params.validate()
    if len(components(SpannerGraph.full(inst))) != 1:
        raise SimulationError("instance is disconnected")
    grid = GridSpec(params.beta, params.delta)
    memo: dict = {}
    programs = {
        u: _LosProgram(u, inst.points[u], inst.adjacency[u], grid, params, memo)
        for u in inst.nodes
    }
    trace = run_protocol(inst, programs, max_rounds=16, order=order)
    greedy: list[Pair] = []
    connectors: list[Pair] = []
    for u in sorted(programs):
        g, c = programs[u].assertions()
        greedy.extend(g)
        connectors.extend(c)
    out = _merge_outputs(
        inst, greedy, connectors, {"kind": "distributed-los", "params": params}
    )
    out.meta["trace"] = trace
    return out, trace


# ---------------------------------------------------------------------------
# distributed planar pipeline


class _PlosProgram(_ProtocolProgram):
    """Node program for the planar construction.

    Schedule: 1 coordinates; 2 local triangle proposals and diametral
    notices; 3 witness/rank records for incident candidate edges; 4 drop
    verdicts from crossing contests; 5 surviving structure edges; 6
    per-cell degree bounding with selection notices; 7 apex forwarding of
    chain pairs that touch no member; 8-9 a two-round flood of the
    bounded graph; 10-17 the four parity stages, each a resolve round
    plus a status relay round; 18-25 cluster iterations; 26 centers; 27
    connector candidates plus a drain round.
    """

    def __init__(self, node, point, nbrs, grid, params: PlosParams, host: str,
                 cell_memo=None):
        super().__init__(node, point, nbrs, grid, params.r, cell_memo)
        self.params = params
        self.cluster_host = host
        # step 1 state
        self.my_triangles: set[tuple[int, int, int]] = set()
        self.tri_votes: dict[tuple[int, int, int], set[int]] = {}
        self.gabriel_mine: set[Pair] = set()
        self.witness_mine: dict[Pair, Fraction] = {}
        self.aux_heard: dict[Pair, tuple[int, Fraction, Point, Point]] = {}
        self.lost: set[Pair] = set()
        self.struct_mine: set[Pair] = set()
        self.struct_view: set[Pair] = set()
        # step 2/3 state
        self.ydel_mine: set[Pair] = set()
        self.chain_notices: set[Pair] = set()
        self.known_edges: set[Pair] = set()
        self.flood_heard: list[tuple] = []
        self.eliminated: set[Pair] = set()
        self.kept: set[Pair] = set()
        self.my_accepted: dict[Cell, tuple[Pair, ...]] = {}
        self.view_log: list[dict] = []
        self.status_relay: list[tuple[int, int, int]] = []
        # step 4 state
        self.center_of_nbr: dict[int, int] = {}
        self.cand_records: list[tuple[int, int, int, int, float]] = []

    # -- knowledge absorption ------------------------------------------

    def _absorb(self, m: Message) -> None:
        if m.kind == "co":
            for v, x, y in m.payload:
                self.learn_coord(v, x, y)
        elif m.kind == "tp":
            for a, b, c in m.payload:
                t = (a, b, c)
                if self.node not in t:
                    raise SimulationError("triangle proposal sent to a non-corner")
                self.tri_votes.setdefault(t, set()).add(m.src)
        elif m.kind == "gn":
            for c, d in m.payload:
                self.gabriel_mine.add((c, d))
        elif m.kind == "ax":
            for c, d, xo, yo, cls, r2 in m.payload:
                other = d if m.src == c else c
                self.learn_coord(other, xo, yo)
                e = (c, d)
                cur = self.aux_heard.get(e)
                rec = (cls, r2, self.coords[c], self.coords[d])
                if cur is not None and cur != rec:
                    raise SimulationError(f"conflicting rank records for edge {e}")
                self.aux_heard[e] = rec
        elif m.kind == "dv":
            for c, d in m.payload:
                self.lost.add((c, d))
        elif m.kind == "se":
            for a, b, xo, yo in m.payload:
                other = b if m.src == a else a
                self.learn_coord(other, xo, yo)
                self.struct_view.add((a, b))
        elif m.kind == "yn":
            for a, b in m.payload:
                if self.node not in (a, b):
                    raise SimulationError("selection notice sent to a non-endpoint")
                self.ydel_mine.add((a, b))
        elif m.kind == "cn":
            for a, b in m.payload:
                self.chain_notices.add((a, b))
        elif m.kind == "ye":
            for u, w, xw, yw in m.payload:
                self.learn_coord(w, xw, yw)
                self.known_edges.add(_pair(u, w))
                self.flood_heard.append((u, w))
        elif m.kind == "yf":
            for a, b, xa, ya, xb, yb in m.payload:
                self.learn_coord(a, xa, ya)
                self.learn_coord(b, xb, yb)
                self.known_edges.add(_pair(a, b))
        elif m.kind == "st":
            for a, b, keep in m.payload:
                e = (a, b)
                (self.kept if keep else self.eliminated).add(e)
                self.status_relay.append((a, b, keep))
        elif m.kind == "cv":
            for v, c in m.payload:
                self.cover.learn(v, c)
        elif m.kind == "ce":
            for v, c in m.payload:
                self.center_of_nbr[v] = c
        elif m.kind == "cd":
            for rec in m.payload:
                self.cand_records.append(rec)
        else:
            raise SimulationError(f"unknown message kind {m.kind!r}")

    # -- schedule ------------------------------------------------------

    def on_round(self, t: int, inbox: list[Message]) -> None:
        self.status_relay = []
        for m in inbox:
            self._absorb(m)
        if self.done:
            return
        if t == 1:
            self.phase = "hello"
            self.broadcast("co", self.hello_records())
            if not self.nbrs:
                _finish_isolated(self)
        elif t == 2:
            self.phase = "triangles"
            self._propose_triangles()
        elif t == 3:
            self.phase = "witnesses"
            self._share_ranks()
        elif t == 4:
            self.phase = "crossings"
            self._contest_crossings()
        elif t == 5:
            self.phase = "structure"
            self._share_structure()
        elif t == 6:
            self.phase = "degree"
            self._bound_degrees()
        elif t == 7:
            self.phase = "chains"
            self._forward_chains()
        elif t == 8:
            self.phase = "flood"
            recs = []
            for a, b in sorted(self.ydel_mine):
                w = b if a == self.node else a
                recs.append((self.node, w, self.coords[w].x, self.coords[w].y))
                self.known_edges.add(_pair(a, b))
            self.broadcast("ye", recs)
        elif t == 9:
            self.phase = "flood"
            seen = set()
            recs = []
            for u, w in self.flood_heard:
                e = _pair(u, w)
                if e in seen:
                    continue
                seen.add(e)
                pa, pb = self.coords[e[0]], self.coords[e[1]]
                recs.append((e[0], e[1], pa.x, pa.y, pb.x, pb.y))
            self.broadcast("yf", sorted(recs))
        elif 10 <= t <= 17:
            k = (t - 10) // 2
            if t % 2 == 0:
                self.phase = f"stage-{k}"
                self._resolve_stage(k)
            else:
                self.phase = f"relay-{k}"
                self.broadcast("st", sorted(set(self.status_relay)))
        elif 18 <= t <= 25:
            s = (t - 18) // 2
            self.phase = f"cluster-{s}"
            if t % 2 == 0:
                self.cluster_forward(s)
            else:
                self.cluster_resolve(s, self._host_adj())
        elif t == 26:
            self.phase = "centers"
            self.broadcast("ce", [(self.node, self.my_center)])
        elif t == 27:
            self.phase = "candidates"
            self.broadcast("cd", self._my_candidates())
            self.done = True

    # -- step 1: local Delaunay, witnesses, planarization ---------------

    def _propose_triangles(self) -> None:
        nbrs = sorted(self.nbrs)
        if len(nbrs) >= 2:
            local = [self.node] + nbrs
            tri = delaunay([self.coords[i] for i in local])
            for t in tri.triangles:
                if 0 not in t:
                    continue
                gt = tuple(sorted(local[i] for i in t))
                a, b, c = gt
                if (
                    self._has_edge(a, b)
                    and self._has_edge(a, c)
                    and self._has_edge(b, c)
                ):
                    self.my_triangles.add(gt)
        recs = sorted(self.my_triangles)
        for gt in recs:
            for corner in gt:
                if corner != self.node:
                    self.send(corner, "tp", [gt])
        # diametral-circle test for incident edges I am responsible for:
        # the smaller endpoint checks its own neighborhood
        for w in sorted(self.nbrs):
            if self.node < w:
                if self._diametral_empty(self.node, w):
                    e = (self.node, w)
                    self.gabriel_mine.add(e)
                    self.send(w, "gn", [e])

    def _has_edge(self, a: int, b: int) -> bool:
        # unit-disk adjacency is decidable from coordinates alone
        return dist(self.coords[a], self.coords[b]) <= 1.0

    def _diametral_empty(self, u: int, w: int) -> bool:
        pu, pw = self.coords[u], self.coords[w]
        for x, d in self.nbrs.items():
            if x == w:
                continue
            if _gabriel_open_disk_sign(pu, pw, self.coords[x]) < 0:
                return False
        return True

    def _confirmed_triangles(self) -> list[tuple[int, int, int]]:
        out = []
        for gt in sorted(self.my_triangles):
            others = {c for c in gt if c != self.node}
            if others <= self.tri_votes.get(gt, set()):
                out.append(gt)
        return out

    def _share_ranks(self) -> None:
        for gt in self._confirmed_triangles():
            r2 = circumradius2(*(self.coords[c] for c in gt))
            for e in ((gt[0], gt[1]), (gt[0], gt[2]), (gt[1], gt[2])):
                cur = self.witness_mine.get(e)
                if cur is None or r2 < cur:
                    self.witness_mine[e] = r2
        recs = []
        for e in sorted(set(self.gabriel_mine) | set(self.witness_mine)):
            if self.node not in e:
                continue
            other = e[1] if e[0] == self.node else e[0]
            po = self.coords[other]
            cls, r2 = self._rank_data(e)
            recs.append((e[0], e[1], po.x, po.y, cls, r2))
        self.broadcast("ax", recs)

    def _rank_data(self, e: Pair) -> tuple[int, Fraction]:
        if e in self.gabriel_mine:
            return 0, Fraction(0)
        return 1, self.witness_mine[e]

    def _my_candidates_step1(self) -> list[Pair]:
        return sorted(
            e
            for e in set(self.gabriel_mine) | set(self.witness_mine)
            if self.node in e
        )

    def _rank(self, e: Pair, cls: int, r2: Fraction) -> tuple:
        d = dist(self.coords[e[0]], self.coords[e[1]])
        return (cls, r2, undirected_edge_id(d, *e))

    def _contest_crossings(self) -> None:
        mine = self._my_candidates_step1()
        lost_now: set[Pair] = set()
        for e in mine:
            cls_e, r2_e = self._rank_data(e)
            re = self._rank(e, cls_e, r2_e)
            pe0, pe1 = self.coords[e[0]], self.coords[e[1]]
            for f, (cls_f, r2_f, pf0, pf1) in self.aux_heard.items():
                if set(e) & set(f):
                    continue
                if not segments_properly_intersect(pe0, pe1, pf0, pf1):
                    continue
                if self._rank(f, cls_f, r2_f) < re:
                    lost_now.add(e)
                    break
        self.lost.update(lost_now)
        for e in sorted(lost_now):
            other = e[1] if e[0] == self.node else e[0]
            self.send(other, "dv", [e])

    def _share_structure(self) -> None:
        self.struct_mine = {e for e in self._my_candidates_step1() if e not in self.lost}
        self.struct_view.update(self.struct_mine)
        recs = []
        for e in sorted(self.struct_mine):
            other = e[1] if e[0] == self.node else e[0]
            po = self.coords[other]
            recs.append((e[0], e[1], po.x, po.y))
        self.broadcast("se", recs)

    # -- step 2: per-cell degree bounding -------------------------------

    def _bound_degrees(self) -> None:
        # Selected pairs come in two shapes.  A spoke touches its apex, so
        # an endpoint computing the cell handles it; a chain pair may touch
        # no member at all, in which case the apex (adjacent to both ends by
        # the cone-width argument) gets the pair from one designated member
        # and forwards it the round after.
        notices: dict[int, set[Pair]] = {}
        relay: dict[int, set[Pair]] = {}
        for cell in self.my_cells:
            members = set(self.members_of(cell))
            incident = sorted(
                (u, v)
                for u, v in self.struct_view
                if u in members or v in members
            )
            if not incident:
                continue
            nodes = sorted({n for e in incident for n in e} | members)
            touches: dict[int, set[int]] = {}
            for a, b in incident:
                touches.setdefault(a, set()).add(b)
                touches.setdefault(b, set()).add(a)
            for apex, u, v in ordered_yao_steps(nodes, incident, self.coords):
                e = (u, v)
                if self.node in e:
                    self.ydel_mine.add(e)
                    other = v if u == self.node else u
                    notices.setdefault(other, set()).add(e)
                elif apex == self.node:
                    notices.setdefault(u, set()).add(e)
                    notices.setdefault(v, set()).add(e)
                elif apex not in members and u not in members and v not in members:
                    carrier = min(m for m in touches[apex] if m in members)
                    if carrier == self.node:
                        relay.setdefault(apex, set()).add(e)
        for dst in sorted(notices):
            if dst != self.node:
                self.send(dst, "yn", sorted(notices[dst]))
        for apex in sorted(relay):
            self.send(apex, "cn", sorted(relay[apex]))

    def _forward_chains(self) -> None:
        for a, b in sorted(self.chain_notices):
            for dst in (a, b):
                if dst not in self.nbrs:
                    raise SimulationError(
                        f"chain endpoint {dst} is not adjacent to apex {self.node}"
                    )
                self.send(dst, "yn", [(a, b)])

    # -- step 3: parity-staged weight reduction --------------------------

    def _believed_alive(self) -> set[Pair]:
        return self.known_edges - self.eliminated

    def _assigned_to(self, cell: Cell) -> list[Pair]:
        # assignment is a function of the full degree-bounded edge set,
        # decided before any stage runs, so iterate everything ever known
        mine = []
        for u, v in sorted(self.known_edges):
            shared = set(self.cells_of(u)) & set(self.cells_of(v))
            if shared and min(shared, key=lambda c: (cell_parity(c), c)) == cell:
                mine.append((u, v))
        return mine

    def _resolve_stage(self, stage: int) -> None:
        cell = self.my_cell_of_parity(stage)
        decided: list[tuple[int, int, int]] = []
        if cell is not None:
            decided = self._resolve_cell_edges(cell, stage)
        recs = [
            (a, b, keep)
            for a, b, keep in decided
            if self.node in (a, b)
        ]
        self.broadcast("st", sorted(recs))

    def _resolve_cell_edges(self, cell: Cell, stage: int) -> list[tuple[int, int, int]]:
        todo = self._assigned_to(cell)
        if not todo:
            return []
        mine = set(todo)
        snapshot = self._believed_alive()
        block = set(iter_block(cell))

        def in_block(z: int) -> bool:
            return not block.isdisjoint(self.cells_of(z))

        q_pairs = {
            e
            for e in snapshot
            if e not in mine and in_block(e[0]) and in_block(e[1])
        }
        allowed = {z for z in self.coords if in_block(z)}
        q_adj: dict[int, dict[int, float]] = {}
        for u, v in q_pairs:
            d = dist(self.coords[u], self.coords[v])
            q_adj.setdefault(u, {})[v] = d
            q_adj.setdefault(v, {})[u] = d
        self.view_log.append(
            {
                "cell": cell,
                "stage": stage,
                "q": frozenset(q_pairs),
                "assigned": tuple(todo),
            }
        )
        decided: list[tuple[int, int, int]] = []
        got: list[Pair] = []
        for eid in sorted(
            undirected_edge_id(dist(self.coords[u], self.coords[v]), u, v)
            for u, v in todo
        ):
            budget = (1.0 + self.params.eps) * eid.length
            reach = dijkstra_lengths(q_adj, eid.src, cutoff=budget, allowed=allowed)
            e = (eid.src, eid.dst)
            if eid.dst in reach:
                decided.append((e[0], e[1], 0))
                self.eliminated.add(e)
            else:
                decided.append((e[0], e[1], 1))
                self.kept.add(e)
                got.append(e)
                q_adj.setdefault(e[0], {})[e[1]] = eid.length
                q_adj.setdefault(e[1], {})[e[0]] = eid.length
        self.my_accepted[cell] = tuple(got)
        return decided

    # -- step 4: clustering and connectors -------------------------------

    def _host_adj(self) -> dict[int, dict[int, float]]:
        if self.cluster_host == "ydel":
            pairs = self._believed_alive()
        elif self.cluster_host == "h":
            pairs = self.kept
        else:
            pairs = self.struct_view
        adj: dict[int, dict[int, float]] = {}
        for u, v in pairs:
            d = dist(self.coords[u], self.coords[v])
            adj.setdefault(u, {})[v] = d
            adj.setdefault(v, {})[u] = d
        return adj

    def _my_candidates(self) -> list[tuple[int, int, int, int, float]]:
        out = []
        for u, v in sorted(self._believed_alive()):
            if self.node not in (u, v):
                continue
            cu = self.my_center if u == self.node else self.center_of_nbr[u]
            cv = self.my_center if v == self.node else self.center_of_nbr[v]
            out.append((u, v, cu, cv, dist(self.coords[u], self.coords[v])))
        return out

    def assertions(self) -> tuple[list[Pair], list[Pair]]:
        greedy = [p for pairs in self.my_accepted.values() for p in pairs]
        if self.params.mode == "literal":
            chosen = [
                _pair(u, v)
                for u, v, cu, cv, _ in self._my_candidates()
                if cu == u and cv == v and cu != cv
            ]
            return greedy, chosen
        if self.cover.known.get(self.node) != self.node:
            return greedy, []
        records = self.cand_records + self._my_candidates()
        return greedy, _representative_winners(records, self.node)


def _reference_assignment(
    ydel: frozenset[Pair], cover: CliqueCover
) -> dict[Cell, list[Pair]]:
    cell_sets = {u: set(cs) for u, cs in cover.cells_of.items()}
    assigned: dict[Cell, list[Pair]] = {}
    for u, v in sorted(ydel):
        shared = cell_sets[u] & cell_sets[v]
        if shared:
            home = min(shared, key=lambda c: (cell_parity(c), c))
            assigned.setdefault(home, []).append((u, v))
    return assigned


def _audit_block_views(
    ref: SpannerGraph, programs: Mapping[int, "_PlosProgram"]
) -> dict:
    """Compare every deciding node's query-graph view against the
    reference stage snapshots.

    A missing edge is fatal only when it is *relevant*: when some path
    through it between the endpoints of an edge under decision could fit
    that edge's budget.  Reach is measured in the full alive block graph
    of the stage, a superset of every query graph the greedy consults, so
    an edge classified irrelevant provably cannot change any verdict and
    a clean audit certifies the distributed outcome equals the reference.
    Spurious edges, assignment mismatches, and unresolved cells always
    raise.  Returns counts of the benign deficits.
    """
    cover: CliqueCover = ref.meta["cover"]
    stage_log = ref.meta["stage_log"]
    ydel: frozenset[Pair] = ref.meta["ydel"]
    eps = ref.meta["params"].eps
    pts = ref.inst.points
    assigned = _reference_assignment(ydel, cover)
    cell_nodes = {
        cell: set().union(*(cover.nodes_in(c) for c in iter_block(cell)))
        for cell in assigned
    }
    alive_at = {0: set(ydel)}
    for entry in stage_log:
        alive_at[entry["stage"] + 1] = set(entry["alive"])
    expected: dict[Cell, tuple] = {}
    for cell, todo in assigned.items():
        stage = cell_parity(cell)
        mine = set(todo)
        block = cell_nodes[cell]
        q = frozenset(
            e
            for e in alive_at[stage]
            if e not in mine and e[0] in block and e[1] in block
        )
        expected[cell] = (q, tuple(todo))

    def relevant(cell: Cell, missing: list[Pair]) -> list[Pair]:
        stage = cell_parity(cell)
        block = cell_nodes[cell]
        todo = assigned[cell]
        budgets = {
            (u, v): (1.0 + eps) * dist(pts[u], pts[v]) for u, v in todo
        }
        b_max = max(budgets.values())
        full_adj: dict[int, dict[int, float]] = {}
        for a, b in alive_at[stage]:
            if a in block and b in block:
                d = dist(pts[a], pts[b])
                full_adj.setdefault(a, {})[b] = d
                full_adj.setdefault(b, {})[a] = d
        ends = sorted({w for e in todo for w in e})
        reach = {
            w: dijkstra_lengths(full_adj, w, cutoff=b_max + 1e-9) for w in ends
        }
        bad = []
        for x, y in missing:
            d_xy = dist(pts[x], pts[y])
            for (u, v), b in budgets.items():
                thru = min(
                    reach[u].get(x, math.inf) + d_xy + reach[v].get(y, math.inf),
                    reach[u].get(y, math.inf) + d_xy + reach[v].get(x, math.inf),
                )
                if thru <= b + 1e-9:
                    bad.append((x, y))
                    break
        return bad

    benign = 0
    deficit_cells: set[Cell] = set()
    for u in sorted(programs):
        for entry in programs[u].view_log:
            cell = entry["cell"]
            want = expected.get(cell)
            if want is None:
                raise SimulationError(
                    f"node {u} resolved cell {cell} the reference never assigned"
                )
            if tuple(entry["assigned"]) != want[1]:
                raise SimulationError(
                    f"knowledge deficit: node {u} saw assignment "
                    f"{entry['assigned']} for cell {cell}, reference has {want[1]}"
                )
            if entry["q"] != want[0]:
                missing = sorted(want[0] - entry["q"])
                extra = sorted(entry["q"] - want[0])
                if extra:
                    raise SimulationError(
                        f"knowledge deficit at cell {cell} stage "
                        f"{entry['stage']}: node {u} has spurious edges {extra}"
                    )
                fatal = relevant(cell, missing)
                if fatal:
                    raise SimulationError(
                        f"knowledge deficit at cell {cell} stage "
                        f"{entry['stage']}: node {u} missing relevant edges "
                        f"{fatal}"
                    )
                benign += len(missing)
                deficit_cells.add(cell)
    for cell in assigned:
        if not any(
            entry["cell"] == cell for u in programs for entry in programs[u].view_log
        ):
            raise SimulationError(f"assigned cell {cell} was never resolved")
    return {"benign_missing": benign, "deficit_cells": len(deficit_cells)}


def distributed_plos(
    inst: QudgInstance,
    eps: float,
    beta: float,
    delta: float,
    mode: str = "representative",
    cluster_host: str = "ydel",
    params: PlosParams | None = None,
    *,
    knowledge_check: bool = True,
    order: Sequence[int] | None = None,
) -> tuple[SpannerGraph, RoundTrace]:
    """Message-passing version of the planar pipeline.

    The two-round flood gives every node the bounded-degree edges within
    two hops of itself; block edges further out than that stay unknown to
    a deciding node.  knowledge_check=True reruns the centralized
    pipeline and audits every decision's view against it: unknown edges
    that could have carried a budget-fitting witness path raise
    SimulationError instead of silently diverging, while provably
    irrelevant ones are tallied in meta["knowledge_audit"].  A clean
    audit therefore certifies the returned graph equals the reference.
    """
    if inst.alpha != 1:
        raise SimulationError("planar pipeline needs a unit disk instance")
    if params is None:
        params = plos_params(beta, delta, eps, mode)
    else:
        params.validate()
    if cluster_host not in ("ydel", "h", "pldel"):
        raise SimulationError(f"unknown cluster host {cluster_host!r}")
    grid = GridSpec(params.beta, params.delta)
    memo: dict = {}
    programs = {
        u: _PlosProgram(
            u, inst.points[u], inst.adjacency[u], grid, params, cluster_host, memo
        )
        for u in inst.nodes
    }
    trace = run_protocol(inst, programs, max_rounds=31, order=order)
    if knowledge_check:
        ref = plos(
            inst,
            eps,
            params.beta,
            params.delta,
            mode,
            cluster_host=cluster_host,
            collect=True,
            params=params,
        )
        audit = _audit_block_views(ref, programs)
    greedy: list[Pair] = []
    connectors: list[Pair] = []
    for u in sorted(programs):
        g, c = programs[u].assertions()
        greedy.extend(g)
        connectors.extend(c)
    out = _merge_outputs(
        inst,
        greedy,
        connectors,
        {
            "kind": "distributed-plos",
            "params": params,
            "cluster_host": cluster_host,
        },
    )
    if knowledge_check:
        out.meta["knowledge_audit"] = audit
    out.meta["trace"] = trace
    return out, trace

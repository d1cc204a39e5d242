"""Event graph model for message-passing executions.

An execution is recorded as a set of events, one per executed statement
instance, connected by three kinds of directed edges:

* ``S`` (sequential): consecutive events on the same rank, in program order.
* ``C`` (concurrent): a send-side event to the receive-side event that
  accepted its message, always across two distinct ranks.
* ``N`` (nonblocking): the initiation of a nonblocking operation to the
  completion event produced by the wait that reaped it, on one rank.

Happened-before is the transitive closure over all three edge kinds.

Two event-level error predicates are derived from the edge structure:
``is_isolated`` (a communication event that never found its counterpart)
and ``is_truncated`` (a matched pair whose sender supplied more data than
the receiver could accept).  The detector records the same verdicts at run
time; the graph predicates allow them to be re-checked after the fact.

Concurrent edges always start at a send-side message event (a blocking
send or a send initiation) and end at a receive-side event that has
completion semantics (a blocking receive or a receive completion).  Edges
into receive *initiations* are never created: a receive may legally be
posted long before the matching send is issued, so such an edge could
point backwards in time and admit cycles.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, replace

ANY = "any"

STATUS_SUCCESS = "success"
STATUS_FAILURE = "failure"

REASON_ISOLATED = "isolated"
REASON_TRUNCATED = "truncated"
REASON_ABORTED = "aborted"

_REASONS = (REASON_ISOLATED, REASON_TRUNCATED, REASON_ABORTED)


class EventKind(enum.Enum):
    """What a single event represents on its rank."""

    SEND = "send"
    RECV = "recv"
    SEND_INIT = "send_init"
    SEND_COMPLETE = "send_complete"
    RECV_INIT = "recv_init"
    RECV_COMPLETE = "recv_complete"
    CALC = "calc"

    @property
    def wire(self) -> str:
        return self.value


class RelationKind(enum.Enum):
    SEQUENTIAL = "S"
    CONCURRENT = "C"
    NONBLOCKING = "N"


# Kind groups used by edge-endpoint validation and isolation checks.
_SEND_SIDE = frozenset({EventKind.SEND, EventKind.SEND_INIT, EventKind.SEND_COMPLETE})
_RECV_SIDE = frozenset({EventKind.RECV, EventKind.RECV_INIT, EventKind.RECV_COMPLETE})
_INITS = frozenset({EventKind.SEND_INIT, EventKind.RECV_INIT})
_COMPLETIONS = frozenset({EventKind.SEND_COMPLETE, EventKind.RECV_COMPLETE})
_C_SOURCES = frozenset({EventKind.SEND, EventKind.SEND_INIT})
_C_TARGETS = frozenset({EventKind.RECV, EventKind.RECV_COMPLETE})


@dataclass(frozen=True, slots=True, order=True)
class EventId:
    """Identity of an event: owning rank and per-rank sequence number."""

    rank: int
    seq: int

    def __post_init__(self) -> None:
        if self.rank < 0:
            raise ValueError(f"rank must be >= 0, got {self.rank}")
        if self.seq < 0:
            raise ValueError(f"seq must be >= 0, got {self.seq}")


@dataclass(frozen=True, slots=True)
class Event:
    """One executed statement instance.

    ``partner`` and ``tag`` hold the values as written in the program
    (``"any"`` for wildcard receives, even after a match resolved them);
    the resolved counterpart is carried by the Concurrent edge instead.
    ``collective`` is ``(operation, root)`` when the event is a
    point-to-point constituent of an expanded collective.
    """

    id: EventId
    kind: EventKind
    routine: str
    logical_time: int
    source_file: str = "<scenario>"
    source_line: int = 0
    mode: str | None = None
    tag: int | str | None = None
    partner: int | str | None = None
    buf_len: int | None = None
    status: str = STATUS_SUCCESS
    reason: str | None = None
    collective: tuple[str, int] | None = None

    def __post_init__(self) -> None:
        if self.logical_time < 0:
            raise ValueError("logical_time must be >= 0")
        if self.status not in (STATUS_SUCCESS, STATUS_FAILURE):
            raise ValueError(f"bad status {self.status!r}")
        if (self.status == STATUS_FAILURE) != (self.reason is not None):
            raise ValueError("failure status and reason must come together")
        if self.reason is not None and self.reason not in _REASONS:
            raise ValueError(f"bad failure reason {self.reason!r}")
        if self.kind is EventKind.CALC and self.partner is not None:
            raise ValueError("calculation events have no partner")

    @property
    def rank(self) -> int:
        return self.id.rank

    @property
    def seq(self) -> int:
        return self.id.seq

    @property
    def is_failure(self) -> bool:
        return self.status == STATUS_FAILURE

    def failed(self, reason: str) -> "Event":
        """Copy of this event marked as the failure that ended its rank."""
        return replace(self, status=STATUS_FAILURE, reason=reason)


def is_send_side(kind: EventKind) -> bool:
    return kind in _SEND_SIDE


def is_recv_side(kind: EventKind) -> bool:
    return kind in _RECV_SIDE


class GraphError(ValueError):
    """Raised for structurally invalid graph operations."""


class EventGraph:
    """Mutable event graph for a fixed number of ranks.

    ``add_event`` enforces dense per-rank numbering and inserts sequential
    edges automatically; it is the construction path for whole executions.
    Graphs with gaps in the numbering (filtered views, merged local graphs
    after buffer eviction) are built through :meth:`assemble`, which skips
    the density requirement but still validates edges.
    """

    def __init__(self, process_count: int) -> None:
        if process_count <= 0:
            raise GraphError("process_count must be positive")
        self.process_count = process_count
        self._events: dict[EventId, Event] = {}
        self._rank_counts: dict[int, int] = {}
        self._out: dict[EventId, list[tuple[EventId, RelationKind]]] = {}
        self._in: dict[EventId, list[tuple[EventId, RelationKind]]] = {}
        self._edges: set[tuple[EventId, EventId, RelationKind]] = set()

    # -- construction -------------------------------------------------

    def add_event(self, event: Event) -> None:
        """Append ``event`` to its rank.

        The sequence number must equal the number of events already on the
        rank; a sequential edge from the predecessor is added automatically.
        """
        if event.rank >= self.process_count:
            raise GraphError(f"rank {event.rank} out of range")
        expected = self._rank_counts.get(event.rank, 0)
        if event.seq != expected:
            raise GraphError(
                f"rank {event.rank}: expected seq {expected}, got {event.seq}"
            )
        self._insert_event(event)
        self._rank_counts[event.rank] = expected + 1
        if event.seq > 0:
            prev = EventId(event.rank, event.seq - 1)
            self._insert_edge(prev, event.id, RelationKind.SEQUENTIAL)

    def add_relation(self, src: EventId, dst: EventId, kind: RelationKind) -> None:
        """Add one edge; endpoints must exist and typing rules must hold."""
        if src not in self._events or dst not in self._events:
            raise GraphError("relation endpoint not in graph")
        self._check_edge_typing(src, dst, kind)
        if src == dst or self.happened_before(dst, src):
            raise GraphError(f"edge {src} -> {dst} would create a cycle")
        self._insert_edge(src, dst, kind)

    @classmethod
    def assemble(
        cls,
        process_count: int,
        events: list[Event],
        edges: set[tuple[EventId, EventId, RelationKind]]
        | list[tuple[EventId, EventId, RelationKind]],
    ) -> "EventGraph":
        """Build a graph from explicit parts, allowing sparse numbering.

        Edge typing is validated; edges referencing absent events are
        rejected.  Cycle freedom is checked once at the end.
        """
        g = cls(process_count)
        for ev in sorted(events, key=lambda e: (e.logical_time, e.rank, e.seq)):
            if ev.rank >= process_count:
                raise GraphError(f"rank {ev.rank} out of range")
            g._insert_event(ev)
        for src, dst, kind in sorted(edges, key=lambda e: (e[0], e[1], e[2].value)):
            if src not in g._events or dst not in g._events:
                raise GraphError(f"edge endpoint missing: {src} -> {dst}")
            g._check_edge_typing(src, dst, kind)
            g._insert_edge(src, dst, kind)
        g._check_acyclic()
        return g

    def _insert_event(self, event: Event) -> None:
        if event.id in self._events:
            raise GraphError(f"duplicate event id {event.id}")
        self._events[event.id] = event
        self._out[event.id] = []
        self._in[event.id] = []

    def _insert_edge(self, src: EventId, dst: EventId, kind: RelationKind) -> None:
        key = (src, dst, kind)
        if key in self._edges:
            return
        self._edges.add(key)
        self._out[src].append((dst, kind))
        self._in[dst].append((src, kind))

    def _check_edge_typing(self, src: EventId, dst: EventId, kind: RelationKind) -> None:
        a, b = self._events[src], self._events[dst]
        if kind is RelationKind.SEQUENTIAL:
            if a.rank != b.rank or b.seq != a.seq + 1:
                raise GraphError("sequential edge must link consecutive events on one rank")
        elif kind is RelationKind.CONCURRENT:
            if a.rank == b.rank:
                raise GraphError("concurrent edge must cross ranks")
            if a.kind not in _C_SOURCES or b.kind not in _C_TARGETS:
                raise GraphError(
                    f"concurrent edge requires send-side -> receive-side, "
                    f"got {a.kind.value} -> {b.kind.value}"
                )
        elif kind is RelationKind.NONBLOCKING:
            if a.rank != b.rank:
                raise GraphError("nonblocking edge must stay on one rank")
            ok = (a.kind, b.kind) in (
                (EventKind.SEND_INIT, EventKind.SEND_COMPLETE),
                (EventKind.RECV_INIT, EventKind.RECV_COMPLETE),
            )
            if not ok:
                raise GraphError("nonblocking edge must link an initiation to its completion")

    def _check_acyclic(self) -> None:
        # Kahn's algorithm; any leftover node sits on a cycle.
        indeg = {eid: len(self._in[eid]) for eid in self._events}
        ready = deque(eid for eid, d in indeg.items() if d == 0)
        seen = 0
        while ready:
            eid = ready.popleft()
            seen += 1
            for nxt, _ in self._out[eid]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
        if seen != len(self._events):
            raise GraphError("graph contains a cycle")

    # -- queries ------------------------------------------------------

    def __len__(self) -> int:
        return len(self._events)

    def __contains__(self, eid: EventId) -> bool:
        return eid in self._events

    def event(self, eid: EventId) -> Event:
        return self._events[eid]

    def events(self) -> list[Event]:
        """All events in canonical (logical_time, rank, seq) order."""
        return sorted(
            self._events.values(), key=lambda e: (e.logical_time, e.rank, e.seq)
        )

    def edges(self) -> list[tuple[EventId, EventId, RelationKind]]:
        return sorted(self._edges, key=lambda e: (e[0], e[1], e[2].value))

    def successors(self, eid: EventId, kind: RelationKind | None = None):
        for nxt, k in self._out[eid]:
            if kind is None or k is kind:
                yield nxt, k

    def predecessors(self, eid: EventId, kind: RelationKind | None = None):
        for prv, k in self._in[eid]:
            if kind is None or k is kind:
                yield prv, k

    def happened_before(self, a: EventId, b: EventId) -> bool:
        """True when a chain of edges of any kind leads from ``a`` to ``b``.

        Irreflexive: ``happened_before(e, e)`` is False.
        """
        if a not in self._events or b not in self._events:
            raise GraphError("happened_before endpoint not in graph")
        if a == b:
            return False
        pending = deque([a])
        visited = {a}
        while pending:
            cur = pending.popleft()
            for nxt, _ in self._out[cur]:
                if nxt == b:
                    return True
                if nxt not in visited:
                    visited.add(nxt)
                    pending.append(nxt)
        return False

    def is_isolated(self, eid: EventId) -> bool:
        """True when a communication event lacks its counterpart.

        A blocking send needs an outgoing Concurrent edge and a blocking
        receive an incoming one.  A send initiation needs both its match
        (outgoing Concurrent edge) and its completion (outgoing Nonblocking
        edge); a receive initiation needs only its completion, because the
        Concurrent edge is attached to the completion event.  Completions
        need their Nonblocking edge, and a receive completion additionally
        its incoming Concurrent edge.
        """
        ev = self._events[eid]
        kind = ev.kind
        if kind is EventKind.CALC:
            raise GraphError("is_isolated is undefined for calculation events")
        has_out_c = any(True for _ in self.successors(eid, RelationKind.CONCURRENT))
        has_in_c = any(True for _ in self.predecessors(eid, RelationKind.CONCURRENT))
        has_out_n = any(True for _ in self.successors(eid, RelationKind.NONBLOCKING))
        has_in_n = any(True for _ in self.predecessors(eid, RelationKind.NONBLOCKING))
        if kind is EventKind.SEND:
            return not has_out_c
        if kind is EventKind.RECV:
            return not has_in_c
        if kind is EventKind.SEND_INIT:
            return not (has_out_c and has_out_n)
        if kind is EventKind.RECV_INIT:
            return not has_out_n
        if kind is EventKind.SEND_COMPLETE:
            return not has_in_n
        if kind is EventKind.RECV_COMPLETE:
            return not (has_in_n and has_in_c)
        raise GraphError(f"unhandled kind {kind}")

    def is_truncated(self, send_id: EventId, recv_id: EventId) -> bool:
        """True when the matched pair sent more data than the receiver allowed.

        The pair must be connected by a Concurrent edge from ``send_id`` to
        ``recv_id``.  A send shorter than the receive buffer is permitted.
        """
        if (send_id, recv_id, RelationKind.CONCURRENT) not in self._edges:
            raise GraphError(f"no concurrent edge {send_id} -> {recv_id}")
        send, recv = self._events[send_id], self._events[recv_id]
        if send.buf_len is None or recv.buf_len is None:
            raise GraphError("truncation check needs buffer lengths on both events")
        return send.buf_len > recv.buf_len

    def failure_events(self) -> dict[int, EventId | None]:
        """Map every rank to its failure event, or None for a clean rank.

        A rank stops at its first failure, so more than one failure event
        on a rank means the recording is corrupt.
        """
        out: dict[int, EventId | None] = {r: None for r in range(self.process_count)}
        for ev in self.events():
            if not ev.is_failure:
                continue
            if out[ev.rank] is not None:
                raise GraphError(
                    f"rank {ev.rank} has multiple failure events "
                    f"({out[ev.rank]} and {ev.id}); corrupt trace"
                )
            out[ev.rank] = ev.id
        return out

    # -- derived views ------------------------------------------------

    def _subgraph(self, keep: set[EventId]) -> "EventGraph":
        events = [self._events[eid] for eid in keep]
        edges = {
            (a, b, k) for (a, b, k) in self._edges if a in keep and b in keep
        }
        return EventGraph.assemble(self.process_count, events, edges)

    def default_view(self) -> "EventGraph":
        """Failures plus their direct predecessors, nothing else.

        Keeps every failure event, every event one edge upstream of a
        failure event (under any edge kind), and the edges among the kept
        events.
        """
        keep: set[EventId] = set()
        for ev in self.events():
            if ev.is_failure:
                keep.add(ev.id)
                for prv, _ in self.predecessors(ev.id):
                    keep.add(prv)
        return self._subgraph(keep)

    def isolate_processes(
        self, ranks: set[int] | frozenset[int], include_related: bool = False
    ) -> "EventGraph":
        """Restrict the graph to ``ranks``.

        With ``include_related``, every rank that shares a Concurrent edge
        with one of the requested ranks is retained as well (one hop, not
        transitive).
        """
        for r in ranks:
            if not 0 <= r < self.process_count:
                raise GraphError(f"rank {r} out of range")
        selected = set(ranks)
        if include_related:
            for a, b, kind in self._edges:
                if kind is not RelationKind.CONCURRENT:
                    continue
                if a.rank in ranks:
                    selected.add(b.rank)
                if b.rank in ranks:
                    selected.add(a.rank)
        keep = {eid for eid in self._events if eid.rank in selected}
        return self._subgraph(keep)

    # -- equality (structural) ----------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventGraph):
            return NotImplemented
        return (
            self.process_count == other.process_count
            and self._events == other._events
            and self._edges == other._edges
        )

    def __repr__(self) -> str:
        return (
            f"EventGraph(ranks={self.process_count}, events={len(self._events)}, "
            f"edges={len(self._edges)})"
        )

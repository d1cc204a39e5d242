from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mppd.event_graph import (
    REASON_ISOLATED,
    REASON_TRUNCATED,
    Event,
    EventGraph,
    EventId,
    EventKind,
    GraphError,
    RelationKind,
)
from oracles import default_view_ids, reachable, related_ranks

S = RelationKind.SEQUENTIAL
C = RelationKind.CONCURRENT
N = RelationKind.NONBLOCKING

_ROUTINES = {
    EventKind.SEND: "send",
    EventKind.RECV: "recv",
    EventKind.SEND_INIT: "isend",
    EventKind.SEND_COMPLETE: "wait",
    EventKind.RECV_INIT: "irecv",
    EventKind.RECV_COMPLETE: "wait",
    EventKind.CALC: "compute",
}


def ev(rank, seq, kind, t=0, **kw) -> Event:
    kw.setdefault("routine", _ROUTINES[kind])
    return Event(EventId(rank, seq), kind, logical_time=t, **kw)


def test_add_event_assigns_sequential_edges():
    g = EventGraph(1)
    g.add_event(ev(0, 0, EventKind.CALC, 0))
    g.add_event(ev(0, 1, EventKind.SEND, 1, partner=0))
    g.add_event(ev(0, 2, EventKind.CALC, 2))
    assert g.edges() == [
        (EventId(0, 0), EventId(0, 1), S),
        (EventId(0, 1), EventId(0, 2), S),
    ]


def test_add_event_rejects_gaps_and_duplicates():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.CALC))
    with pytest.raises(GraphError):
        g.add_event(ev(0, 2, EventKind.CALC))
    with pytest.raises(GraphError):
        g.add_event(ev(0, 0, EventKind.CALC))
    with pytest.raises(GraphError):
        g.add_event(ev(2, 0, EventKind.CALC))


def test_concurrent_edge_typing():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.SEND, 0, partner=1))
    g.add_event(ev(1, 0, EventKind.RECV, 1, partner=0))
    g.add_event(ev(1, 1, EventKind.RECV_INIT, 2, partner=0))
    g.add_relation(EventId(0, 0), EventId(1, 0), C)
    assert (EventId(0, 0), EventId(1, 0), C) in g.edges()
    # receive initiations never take concurrent edges
    with pytest.raises(GraphError):
        g.add_relation(EventId(0, 0), EventId(1, 1), C)


def test_concurrent_edge_must_cross_ranks():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.SEND, 0, partner=0))
    g.add_event(ev(0, 1, EventKind.RECV, 1, partner=0))
    with pytest.raises(GraphError):
        g.add_relation(EventId(0, 0), EventId(0, 1), C)


def test_nonblocking_edge_typing():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.RECV_INIT, 0, partner=1))
    g.add_event(ev(0, 1, EventKind.RECV_COMPLETE, 1))
    g.add_event(ev(1, 0, EventKind.SEND_INIT, 0, partner=0))
    g.add_event(ev(1, 1, EventKind.SEND_COMPLETE, 1))
    g.add_relation(EventId(0, 0), EventId(0, 1), N)
    g.add_relation(EventId(1, 0), EventId(1, 1), N)
    with pytest.raises(GraphError):  # init/completion sides must agree
        g2 = EventGraph(1)
        g2.add_event(ev(0, 0, EventKind.SEND_INIT, 0, partner=0))
        g2.add_event(ev(0, 1, EventKind.RECV_COMPLETE, 1))
        g2.add_relation(EventId(0, 0), EventId(0, 1), N)
    with pytest.raises(GraphError):  # never across ranks
        g.add_relation(EventId(1, 0), EventId(0, 1), N)


def test_relation_endpoints_must_exist():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.SEND, 0, partner=1))
    with pytest.raises(GraphError):
        g.add_relation(EventId(0, 0), EventId(1, 0), C)


def test_cycle_rejected():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.RECV, 0, partner=1))
    g.add_event(ev(0, 1, EventKind.SEND, 1, partner=1))
    g.add_event(ev(1, 0, EventKind.RECV, 0, partner=0))
    g.add_event(ev(1, 1, EventKind.SEND, 1, partner=0))
    g.add_relation(EventId(0, 1), EventId(1, 0), C)
    with pytest.raises(GraphError):
        g.add_relation(EventId(1, 1), EventId(0, 0), C)


def test_happened_before_transitive_and_irreflexive():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.CALC, 0))
    g.add_event(ev(0, 1, EventKind.SEND, 1, partner=1))
    g.add_event(ev(1, 0, EventKind.RECV, 2, partner=0))
    g.add_event(ev(1, 1, EventKind.CALC, 3))
    g.add_relation(EventId(0, 1), EventId(1, 0), C)
    assert g.happened_before(EventId(0, 0), EventId(1, 1))
    assert not g.happened_before(EventId(1, 1), EventId(0, 0))
    assert not g.happened_before(EventId(0, 0), EventId(0, 0))
    with pytest.raises(GraphError):
        g.happened_before(EventId(0, 9), EventId(0, 0))


def test_is_isolated_blocking_kinds():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.SEND, 0, partner=1))
    g.add_event(ev(1, 0, EventKind.RECV, 1, partner=0))
    g.add_event(ev(0, 1, EventKind.SEND, 2, partner=1))
    g.add_event(ev(1, 1, EventKind.RECV, 3, partner=0))
    g.add_relation(EventId(0, 0), EventId(1, 0), C)
    assert not g.is_isolated(EventId(0, 0))
    assert not g.is_isolated(EventId(1, 0))
    assert g.is_isolated(EventId(0, 1))
    assert g.is_isolated(EventId(1, 1))


def test_is_isolated_nonblocking_kinds():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.SEND_INIT, 0, partner=1))
    g.add_event(ev(0, 1, EventKind.SEND_COMPLETE, 3))
    g.add_event(ev(1, 0, EventKind.RECV_INIT, 0, partner=0))
    g.add_event(ev(1, 1, EventKind.RECV_COMPLETE, 3))
    # nothing wired: every piece is isolated
    for eid in (EventId(0, 0), EventId(0, 1), EventId(1, 0), EventId(1, 1)):
        assert g.is_isolated(eid)
    g.add_relation(EventId(0, 0), EventId(0, 1), N)
    g.add_relation(EventId(1, 0), EventId(1, 1), N)
    # matched message: send init gains C out, recv completion gains C in
    assert g.is_isolated(EventId(0, 0))  # still lacks its match
    g.add_relation(EventId(0, 0), EventId(1, 1), C)
    assert not g.is_isolated(EventId(0, 0))
    assert not g.is_isolated(EventId(0, 1))
    assert not g.is_isolated(EventId(1, 0))
    assert not g.is_isolated(EventId(1, 1))


def test_is_isolated_send_init_needs_both_edges():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.SEND_INIT, 0, partner=1))
    g.add_event(ev(1, 0, EventKind.RECV, 1, partner=0))
    g.add_relation(EventId(0, 0), EventId(1, 0), C)
    # matched but never waited on
    assert g.is_isolated(EventId(0, 0))


def test_is_isolated_rejects_calc():
    g = EventGraph(1)
    g.add_event(ev(0, 0, EventKind.CALC))
    with pytest.raises(GraphError):
        g.is_isolated(EventId(0, 0))


def test_is_truncated():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.SEND, 0, partner=1, buf_len=8))
    g.add_event(ev(1, 0, EventKind.RECV, 1, partner=0, buf_len=4))
    g.add_event(ev(0, 1, EventKind.SEND, 2, partner=1, buf_len=2))
    g.add_event(ev(1, 1, EventKind.RECV, 3, partner=0, buf_len=4))
    g.add_relation(EventId(0, 0), EventId(1, 0), C)
    g.add_relation(EventId(0, 1), EventId(1, 1), C)
    assert g.is_truncated(EventId(0, 0), EventId(1, 0))
    # shorter than the buffer is fine
    assert not g.is_truncated(EventId(0, 1), EventId(1, 1))
    with pytest.raises(GraphError):
        g.is_truncated(EventId(0, 0), EventId(1, 1))


def test_failure_events_one_per_rank():
    g = EventGraph(2)
    g.add_event(ev(0, 0, EventKind.SEND, 0, partner=1))
    g.add_event(
        ev(0, 1, EventKind.RECV, 1, partner=1, status="failure", reason=REASON_ISOLATED)
    )
    g.add_event(ev(1, 0, EventKind.CALC, 0))
    fe = g.failure_events()
    assert fe == {0: EventId(0, 1), 1: None}


def test_failure_events_rejects_double_failure():
    events = [
        ev(0, 0, EventKind.SEND, 0, partner=1, status="failure", reason=REASON_ISOLATED),
        ev(0, 1, EventKind.RECV, 1, partner=1, status="failure", reason=REASON_ISOLATED),
    ]
    g = EventGraph.assemble(2, events, set())
    with pytest.raises(GraphError):
        g.failure_events()


def test_default_view_single_failure_keeps_two_events():
    g = EventGraph(1)
    g.add_event(ev(0, 0, EventKind.CALC, 0))
    g.add_event(ev(0, 1, EventKind.CALC, 1))
    g.add_event(
        ev(0, 2, EventKind.RECV, 2, partner=0, status="failure", reason=REASON_ISOLATED)
    )
    view = g.default_view()
    assert {e.id for e in view.events()} == {EventId(0, 1), EventId(0, 2)}
    assert len(view) == 2
    assert view.edges() == [(EventId(0, 1), EventId(0, 2), S)]


def _tree_compositing_style_graph() -> EventGraph:
    """64 ranks, one failure each, 100 distinct direct predecessors.

    Per rank: two successful sends then a failing receive.  The sequential
    predecessor of each failure is (r, 1), 64 events.  Concurrent edges
    (r, 0) -> ((r+1) % 64, 2) for r < 36 add 36 more predecessors that
    overlap neither the failures nor the sequential predecessors.
    """
    g = EventGraph(64)
    for r in range(64):
        g.add_event(ev(r, 0, EventKind.SEND, 0, partner=(r + 1) % 64, buf_len=8))
        g.add_event(ev(r, 1, EventKind.SEND, 1, partner=(r + 1) % 64, buf_len=8))
        reason = REASON_TRUNCATED if 1 <= r <= 36 else REASON_ISOLATED
        g.add_event(
            ev(r, 2, EventKind.RECV, 2, partner="any", buf_len=4,
               status="failure", reason=reason)
        )
    for r in range(36):
        g.add_relation(EventId(r, 0), EventId((r + 1) % 64, 2), C)
    return g


def test_default_view_64_rank_case():
    g = _tree_compositing_style_graph()
    assert len(g) == 192
    view = g.default_view()
    got = {e.id for e in view.events()}
    assert got == default_view_ids(g)
    assert len(got) == 164
    failures = {e.id for e in view.events() if e.is_failure}
    assert len(failures) == 64
    assert len(got - failures) == 100


def test_default_view_keeps_connecting_edges_only():
    g = _tree_compositing_style_graph()
    view = g.default_view()
    kept = {e.id for e in view.events()}
    want = {
        (a, b, k) for a, b, k in g.edges() if a in kept and b in kept
    }
    assert set(view.edges()) == want


def test_isolate_processes_plain():
    g = _tree_compositing_style_graph()
    sub = g.isolate_processes({3, 7})
    assert {e.rank for e in sub.events()} == {3, 7}
    assert len(sub) == 6


def test_isolate_processes_with_related():
    g = _tree_compositing_style_graph()
    # rank 3 sends to rank 4 and receives from rank 2
    sub = g.isolate_processes({3}, include_related=True)
    assert {e.rank for e in sub.events()} == related_ranks(g, {3}) == {2, 3, 4}
    # one hop only: rank 1's tie to rank 2 must not drag rank 1 in
    assert 1 not in {e.rank for e in sub.events()}


def test_isolate_processes_rejects_bad_rank():
    g = EventGraph(2)
    with pytest.raises(GraphError):
        g.isolate_processes({5})


def test_assemble_round_trip_equality():
    g = _tree_compositing_style_graph()
    g2 = EventGraph.assemble(64, g.events(), set(g.edges()))
    assert g == g2


def test_assemble_allows_sparse_numbering():
    events = [
        ev(0, 3, EventKind.SEND, 5, partner=1),
        ev(0, 7, EventKind.RECV, 9, partner=1),
    ]
    g = EventGraph.assemble(2, events, set())
    assert len(g) == 2
    # a sequential edge across the gap is not legal
    with pytest.raises(GraphError):
        EventGraph.assemble(
            2, events, {(EventId(0, 3), EventId(0, 7), S)}
        )


def test_assemble_rejects_cycles():
    events = [
        ev(0, 0, EventKind.SEND, 0, partner=1),
        ev(0, 1, EventKind.RECV, 1, partner=1),
        ev(1, 0, EventKind.SEND, 0, partner=0),
        ev(1, 1, EventKind.RECV, 1, partner=0),
    ]
    edges = {
        (EventId(0, 0), EventId(0, 1), S),
        (EventId(1, 0), EventId(1, 1), S),
        (EventId(0, 0), EventId(1, 1), C),
        (EventId(1, 0), EventId(0, 1), C),
    }
    g = EventGraph.assemble(2, events, edges)  # crossing edges, no cycle
    assert len(g.edges()) == 4
    bad = {
        (EventId(0, 0), EventId(0, 1), S),
        (EventId(1, 0), EventId(1, 1), S),
        (EventId(0, 1), EventId(1, 0), C),
        (EventId(1, 1), EventId(0, 0), C),
    }
    with pytest.raises(GraphError):
        EventGraph.assemble(2, events, bad)


def test_event_validation():
    with pytest.raises(ValueError):
        Event(EventId(0, 0), EventKind.SEND, "send", logical_time=-1)
    with pytest.raises(ValueError):
        Event(EventId(0, 0), EventKind.SEND, "send", 0, status="failure")
    with pytest.raises(ValueError):
        Event(EventId(0, 0), EventKind.SEND, "send", 0, status="success",
              reason=REASON_ISOLATED)
    with pytest.raises(ValueError):
        Event(EventId(0, 0), EventKind.CALC, "compute", 0, partner=3)
    with pytest.raises(ValueError):
        EventId(-1, 0)


# -- property tests -------------------------------------------------


@st.composite
def graphs(draw):
    """Small random graphs built the way the runtime builds them.

    Times increase strictly along each rank and concurrent edges only go
    forward in time, which keeps every draw acyclic by construction.
    """
    nranks = draw(st.integers(1, 4))
    counts = [draw(st.integers(0, 5)) for _ in range(nranks)]
    g = EventGraph(nranks)
    sends: list[EventId] = []
    recvs: list[EventId] = []
    for r in range(nranks):
        t = 0
        for s in range(counts[r]):
            t += draw(st.integers(1, 3))
            kind = draw(st.sampled_from([EventKind.SEND, EventKind.RECV, EventKind.CALC]))
            failing = draw(st.booleans()) and s == counts[r] - 1 and kind is not EventKind.CALC
            e = ev(
                r, s, kind, t,
                partner=(r + 1) % nranks if kind is not EventKind.CALC else None,
                status="failure" if failing else "success",
                reason=REASON_ISOLATED if failing else None,
            )
            g.add_event(e)
            (sends if kind is EventKind.SEND else recvs if kind is EventKind.RECV else []).append(e.id)
    for sid in sends:
        for rid in recvs:
            if sid.rank == rid.rank:
                continue
            if g.event(sid).logical_time >= g.event(rid).logical_time:
                continue
            if draw(st.booleans()):
                try:
                    g.add_relation(sid, rid, C)
                except GraphError:
                    pass  # receiver already matched elsewhere is fine here
    return g


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_happened_before_matches_reachability_oracle(g: EventGraph):
    for e in g.events():
        want = reachable(g, e.id)
        got = {o.id for o in g.events() if g.happened_before(e.id, o.id)}
        assert got == want


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_default_view_matches_oracle(g: EventGraph):
    assert {e.id for e in g.default_view().events()} == default_view_ids(g)


@settings(max_examples=60, deadline=None)
@given(graphs())
def test_round_trip_preserves_graph(g: EventGraph):
    assert EventGraph.assemble(g.process_count, g.events(), set(g.edges())) == g


@settings(max_examples=60, deadline=None)
@given(graphs(), st.integers(0, 3))
def test_isolate_related_matches_oracle(g: EventGraph, rank: int):
    if rank >= g.process_count:
        rank %= g.process_count
    sub = g.isolate_processes({rank}, include_related=True)
    want = related_ranks(g, {rank})
    assert {e.rank for e in sub.events()} <= want
    # every related rank with events present must survive
    present = {e.rank for e in g.events() if e.rank in want}
    assert {e.rank for e in sub.events()} == present

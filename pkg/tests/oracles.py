"""Independent reference implementations used to pin expected test values.

Everything here is written against the documented behaviour only, using
the most naive data structures that work, so that agreement with the
package is meaningful.  Keep these free of imports from ``mppd`` internals
beyond the plain data types.
"""

from __future__ import annotations

from mppd.event_graph import (
    ANY,
    Event,
    EventGraph,
    EventId,
    EventKind,
    RelationKind,
)

SENDISH = {EventKind.SEND, EventKind.SEND_INIT}
RECVISH = {EventKind.RECV, EventKind.RECV_INIT}


def binomial_children(process_count: int, root: int) -> list[tuple[int, int]]:
    """(parent, child) pairs of the binomial broadcast tree, highest bit first.

    In virtual-rank space (vrank = (rank - root) mod n) the parent of a
    nonzero vrank clears its lowest set bit: parent(v) = v & (v - 1).
    Pairs come out sorted by (parent, child) in real rank terms.
    """
    pairs = []
    for v in range(1, process_count):
        pv = v & (v - 1)
        parent = (pv + root) % process_count
        child = (v + root) % process_count
        pairs.append((parent, child))
    return sorted(pairs)


def sweep_matching(attempts: list[Event]) -> dict[str, object]:
    """Replay communication attempts in global order and match them.

    ``attempts`` are the message-bearing events of an execution: blocking
    sends/receives and nonblocking initiations (which carry the envelope).
    Completions and calculations must not be passed in.  Events are
    processed in (logical_time, rank, seq) order.

    A send matches the oldest pending compatible receive; a receive
    matches the pending compatible send with the smallest key.  Returns
    the matched pairs, the ids left unmatched, and the matched pairs whose
    send length exceeds the receive length.
    """
    def compatible(send: Event, recv: Event) -> bool:
        if send.partner != recv.rank:
            return False
        if recv.partner not in (ANY, send.rank):
            return False
        if recv.tag not in (ANY, send.tag):
            return False
        return True

    key = lambda e: (e.logical_time, e.rank, e.seq)
    pending_sends: list[Event] = []
    pending_recvs: list[Event] = []
    pairs: list[tuple[EventId, EventId]] = []
    for ev in sorted(attempts, key=key):
        if ev.kind in SENDISH:
            cands = [r for r in pending_recvs if compatible(ev, r)]
            if cands:
                r = min(cands, key=key)
                pending_recvs.remove(r)
                pairs.append((ev.id, r.id))
            else:
                pending_sends.append(ev)
        elif ev.kind in RECVISH:
            cands = [s for s in pending_sends if compatible(s, ev)]
            if cands:
                s = min(cands, key=key)
                pending_sends.remove(s)
                pairs.append((s.id, ev.id))
            else:
                pending_recvs.append(ev)
        else:
            raise ValueError(f"not a message attempt: {ev.kind}")
    unmatched = {e.id for e in pending_sends} | {e.id for e in pending_recvs}
    by_id = {e.id: e for e in attempts}
    truncated = [
        (s, r)
        for s, r in pairs
        if by_id[s].buf_len is not None
        and by_id[r].buf_len is not None
        and by_id[s].buf_len > by_id[r].buf_len
    ]
    return {"pairs": pairs, "unmatched": unmatched, "truncated": truncated}


def default_view_ids(graph: EventGraph) -> set[EventId]:
    """Ids a default view must keep: failures and their direct predecessors."""
    keep: set[EventId] = set()
    for ev in graph.events():
        if ev.is_failure:
            keep.add(ev.id)
            for src, dst, _ in graph.edges():
                if dst == ev.id:
                    keep.add(src)
    return keep


def related_ranks(graph: EventGraph, ranks: set[int]) -> set[int]:
    """Ranks reachable from ``ranks`` over one Concurrent edge, plus ``ranks``."""
    out = set(ranks)
    for src, dst, kind in graph.edges():
        if kind is not RelationKind.CONCURRENT:
            continue
        if src.rank in ranks:
            out.add(dst.rank)
        if dst.rank in ranks:
            out.add(src.rank)
    return out


def reachable(graph: EventGraph, start: EventId) -> set[EventId]:
    """All ids strictly after ``start`` in happened-before order."""
    seen: set[EventId] = set()
    frontier = [start]
    while frontier:
        cur = frontier.pop()
        for src, dst, _ in graph.edges():
            if src == cur and dst not in seen:
                seen.add(dst)
                frontier.append(dst)
    return seen

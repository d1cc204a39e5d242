"""Run-time error detection: one manager per rank, driven by control messages.

Every rank p gets a manager M_p.  Processes never talk to each other
directly; a communication call sends a request to the caller's own
manager, managers negotiate the match between themselves, and the caller
learns the verdict through an ack or an abort.  Each manager keeps a
pending queue Q_p of requests with per-entry deadlines and a bounded
local graph E_p of admitted events, so a complete picture of the run
exists on every rank the moment anything goes wrong.

Manager life cycle per request, in protocol-state terms (C is the only
resting state; the others live inside a single message handling):

* S1 - a local send request arrives: enqueue with a deadline, forward a
  send request to the destination's manager.
* R1 - a local receive request arrives: match it against queued remote
  send requests, or enqueue it.
* R2 - a remote send request arrives: match it against queued local
  receives, or enqueue it (ready mode instead fails immediately).
* R3 - a match was made on the receive side: ack the sender's manager,
  then check truncation and either ack the receiver or abort it.
* S2 - the sender's manager hears back: check truncation and either ack
  or abort its process.

Blocking operations hold the process until the ack arrives.  Buffered,
eager-standard and ready sends return immediately and only poll for an
abort at their next instrumented call.  Nonblocking initiations leave
their queue entry in place until the wait arrives, so an initiation whose
handle is never reaped eventually times out like any other unmatched
request.

Failure bookkeeping is global-first-wins: a rank has at most one failure
event, run wide.  When two managers reach the same verdict about the same
event (both ends of a truncated pair do) the second recording is
idempotent; when they disagree, the later one falls back to admitting the
plain successful copy so that edges stay anchored.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .event_graph import (
    REASON_ABORTED,
    REASON_ISOLATED,
    REASON_TRUNCATED,
    STATUS_SUCCESS,
    Event,
    EventId,
    EventKind,
    RelationKind,
)

__all__ = [
    "ControlMessage",
    "FailureGate",
    "LocalGraph",
    "Manager",
    "ManagerStateName",
    "MessageKind",
    "ProtocolError",
    "QueueEntry",
    "match_request",
]


class ProtocolError(RuntimeError):
    """A control message that cannot occur in a well-formed run."""


class MessageKind(enum.Enum):
    REQ_P = "req_p"
    REQ_M = "req_m"
    ACK_M = "ack_m"
    ACK_P = "ack_p"
    ACK_R = "ack_r"
    ABORT_P = "abort_p"
    STOP_M = "stop_m"


# Same-tick handling order inside one manager inbox; lower goes first.
# Acks must beat stop so that a manager that is about to be stopped still
# finishes the handshake it is part of.
PRIORITY = {
    MessageKind.REQ_P: 0,
    MessageKind.REQ_M: 1,
    MessageKind.ACK_M: 2,
    MessageKind.ACK_P: 3,
    MessageKind.ACK_R: 3,
    MessageKind.ABORT_P: 4,
    MessageKind.STOP_M: 9,
}


class ManagerStateName(enum.Enum):
    C = "C"
    S1 = "S1"
    S2 = "S2"
    R1 = "R1"
    R2 = "R2"
    R3 = "R3"


@dataclass(frozen=True, slots=True)
class ControlMessage:
    """One hop of the detection protocol; transit always costs one tick."""

    kind: MessageKind
    sender: int
    to_rank: int
    to_process: bool = False
    event: Event | None = None
    about: EventId | None = None
    partner_event: Event | None = None
    partner_len: int | None = None
    blocking: bool = False
    wait_for: EventId | None = None
    shell: Event | None = None
    reason: str | None = None


@dataclass
class QueueEntry:
    """One pending request in Q_p.

    ``side`` is "local" for requests from the manager's own process and
    "remote" for send requests forwarded by other managers.  ``deferred``
    entries belong to nonblocking initiations: they stay queued after a
    match until the wait request arrives.
    """

    event: Event
    side: str
    deadline: int
    blocking: bool = False
    deferred: bool = False
    matched: bool = False
    partner_event: Event | None = None
    partner_len: int | None = None
    completion_requested: bool = False
    shell: Event | None = None


class FailureGate:
    """Globally enforces one failure event per rank, first detection wins.

    Both ends of a failed pair may report the same event; recording the
    identical (event, reason) twice is allowed and idempotent.  A
    conflicting second failure for a rank is refused.
    """

    def __init__(self) -> None:
        self._by_rank: dict[int, tuple[EventId, str]] = {}

    def record(self, event: Event) -> bool:
        if not event.is_failure:
            raise ValueError("gate records failure events only")
        claim = (event.id, event.reason)
        prev = self._by_rank.setdefault(event.rank, claim)
        return prev == claim

    def failed_ranks(self) -> set[int]:
        return set(self._by_rank)


class LocalGraph:
    """E_p: the events a manager has admitted, plus their C/N edges.

    Bounded by ``capacity`` (None = unlimited): admitting beyond it evicts
    the successful event with the smallest logical time.  Failure events
    are never evicted.  Edges are kept even when an endpoint is evicted;
    the final merge only keeps edges whose endpoints survived somewhere.
    """

    def __init__(self, rank: int, capacity: int | None = None) -> None:
        if capacity is not None and capacity < 1:
            raise ValueError("capacity must be positive or None")
        self.rank = rank
        self.capacity = capacity
        self.events: dict[EventId, Event] = {}
        self.edges: set[tuple[EventId, EventId, RelationKind]] = set()

    def admit(self, event: Event) -> None:
        self.events[event.id] = event
        self.evict_if_full()

    def connect(self, src: EventId, dst: EventId, kind: RelationKind) -> None:
        self.edges.add((src, dst, kind))

    def evict_if_full(self) -> None:
        if self.capacity is None:
            return
        while len(self.events) > self.capacity:
            victims = [e for e in self.events.values() if not e.is_failure]
            if not victims:
                return
            oldest = min(victims, key=lambda e: (e.logical_time, e.rank, e.seq))
            del self.events[oldest.id]


def match_request(
    queue: list[QueueEntry], incoming: Event, side: str
) -> QueueEntry | None:
    """Oldest unmatched entry on ``side`` compatible with ``incoming``.

    With side "remote" the queue entries are forwarded send requests and
    ``incoming`` is a receive; with side "local" the entries are posted
    receives and ``incoming`` is a send.  Scanning in insertion order
    keeps same-channel messages non-overtaking.  Nothing is dequeued.
    """
    sendish = (EventKind.SEND, EventKind.SEND_INIT)
    recvish = (EventKind.RECV, EventKind.RECV_INIT)
    for entry in queue:
        if entry.side != side or entry.matched:
            continue
        if side == "remote":
            send, recv = entry.event, incoming
        else:
            send, recv = incoming, entry.event
        if send.kind not in sendish or recv.kind not in recvish:
            continue
        if send.partner != recv.rank:
            continue
        if recv.partner not in ("any", send.rank):
            continue
        if recv.tag not in ("any", send.tag):
            continue
        return entry
    return None


class Manager:
    """M_p: the detection state machine for one rank.

    Driven by the runtime: ``on_control`` for each delivered message,
    ``scan_timeouts`` once per tick, and the two direct notifications for
    calculation events and crashes (those cost no message hop).  Emits
    messages through the fabric, never touching other managers' state.
    """

    def __init__(self, rank: int, timeout_ticks: int, gate: FailureGate,
                 fabric, capacity: int | None = None) -> None:
        self.rank = rank
        self.timeout_ticks = timeout_ticks
        self.gate = gate
        self.fabric = fabric
        self.queue: list[QueueEntry] = []
        self.graph = LocalGraph(rank, capacity)
        self.terminated = False
        self.last_states: list[ManagerStateName] = [ManagerStateName.C]

    # -- message handling (one transient excursion from C per message) --

    def on_control(self, msg: ControlMessage, now: int) -> None:
        if self.terminated:
            return
        self.last_states = [ManagerStateName.C]
        kind = msg.kind
        if kind is MessageKind.REQ_P:
            if msg.wait_for is not None:
                self._on_wait_request(msg, now)
            elif msg.event.kind in (EventKind.SEND, EventKind.SEND_INIT):
                self._send_initiating(msg, now)
            else:
                self._receive_initiating(msg, now)
        elif kind is MessageKind.REQ_M:
            self._send_request_receiving(msg, now)
        elif kind is MessageKind.ACK_M:
            self._message_sending(msg, now)
        elif kind is MessageKind.STOP_M:
            self._on_stop()
        else:
            raise ProtocolError(f"manager {self.rank} got {kind}")
        if not self.terminated:
            self.last_states.append(ManagerStateName.C)

    def _send_initiating(self, msg: ControlMessage, now: int) -> None:
        # S1: enqueue with a deadline, forward the request to the
        # destination's manager.  An unroutable destination is dropped by
        # the fabric and the entry can only time out.
        self.last_states.append(ManagerStateName.S1)
        event = msg.event
        self.queue.append(
            QueueEntry(
                event, "local", now + self.timeout_ticks,
                blocking=msg.blocking,
                deferred=event.kind is EventKind.SEND_INIT,
            )
        )
        self._emit(
            MessageKind.REQ_M, to_rank=event.partner, event=event,
            blocking=msg.blocking,
        )

    def _receive_initiating(self, msg: ControlMessage, now: int) -> None:
        # R1: match against queued remote send requests, else enqueue.
        self.last_states.append(ManagerStateName.R1)
        recv = msg.event
        remote = match_request(self.queue, recv, "remote")
        if remote is None:
            self.queue.append(
                QueueEntry(
                    recv, "local", now + self.timeout_ticks,
                    blocking=msg.blocking,
                    deferred=recv.kind is EventKind.RECV_INIT,
                )
            )
            return
        self.queue.remove(remote)
        if recv.kind is EventKind.RECV:
            self._message_receiving(recv, remote.event, now)
        else:
            entry = QueueEntry(
                recv, "local", now + self.timeout_ticks, deferred=True,
                matched=True, partner_event=remote.event,
                partner_len=remote.event.buf_len,
            )
            self.queue.append(entry)
            self._emit(
                MessageKind.ACK_M, to_rank=remote.event.rank,
                about=remote.event.id, partner_event=recv,
                partner_len=recv.buf_len,
            )

    def _send_request_receiving(self, msg: ControlMessage, now: int) -> None:
        # R2: match the forwarded send against queued local receives.
        self.last_states.append(ManagerStateName.R2)
        send = msg.event
        local = match_request(self.queue, send, "local")
        if local is None:
            if send.mode == "ready":
                # No posted receive: the ready send is wrong by definition
                # and its failure belongs to the sender's event.
                failed = send.failed(REASON_ISOLATED)
                if self.gate.record(failed):
                    self.graph.admit(failed)
                self._halt_run()
                return
            self.queue.append(
                QueueEntry(send, "remote", now + self.timeout_ticks)
            )
            return
        if local.event.kind is EventKind.RECV:
            self.queue.remove(local)
            self._message_receiving(local.event, send, now)
        else:
            local.matched = True
            local.partner_event = send
            local.partner_len = send.buf_len
            self._emit(
                MessageKind.ACK_M, to_rank=send.rank, about=send.id,
                partner_event=local.event, partner_len=local.event.buf_len,
            )
            if local.completion_requested:
                self._complete(local, now)

    def _message_receiving(self, recv: Event, send: Event, now: int) -> None:
        # R3: ack the sender's manager first, then judge the receive.
        self.last_states.append(ManagerStateName.R3)
        self._emit(
            MessageKind.ACK_M, to_rank=send.rank, about=send.id,
            partner_event=recv, partner_len=recv.buf_len,
        )
        if send.buf_len > recv.buf_len:
            self._record_failure(recv.failed(REASON_TRUNCATED))
            self._admit_partner(send.failed(REASON_TRUNCATED))
            self.graph.connect(send.id, recv.id, RelationKind.CONCURRENT)
            self._emit(
                MessageKind.ABORT_P, to_rank=self.rank, to_process=True,
                about=recv.id, reason=REASON_TRUNCATED,
            )
            self._halt_run(abort_own_later=True)
            return
        self.graph.admit(recv)
        self.graph.admit(send)
        self.graph.connect(send.id, recv.id, RelationKind.CONCURRENT)
        self._emit(
            MessageKind.ACK_R, to_rank=self.rank, to_process=True,
            about=recv.id,
        )

    def _message_sending(self, msg: ControlMessage, now: int) -> None:
        # S2: the receive side answered; judge the send.
        self.last_states.append(ManagerStateName.S2)
        entry = next(
            (e for e in self.queue
             if e.side == "local" and e.event.id == msg.about),
            None,
        )
        if entry is None:
            raise ProtocolError(
                f"manager {self.rank}: ack for unknown event {msg.about}"
            )
        partner, plen = msg.partner_event, msg.partner_len
        if entry.event.buf_len > plen:
            self.queue.remove(entry)
            self._record_failure(entry.event.failed(REASON_TRUNCATED))
            self._admit_partner(partner.failed(REASON_TRUNCATED))
            if partner.kind is EventKind.RECV:
                self.graph.connect(
                    entry.event.id, partner.id, RelationKind.CONCURRENT
                )
            self._emit(
                MessageKind.ABORT_P, to_rank=self.rank, to_process=True,
                about=entry.event.id, reason=REASON_TRUNCATED,
            )
            self._halt_run(abort_own_later=True)
            return
        entry.matched = True
        entry.partner_event = partner
        entry.partner_len = plen
        if entry.deferred:
            if entry.completion_requested:
                self._complete(entry, now)
            return
        self.queue.remove(entry)
        self.graph.admit(entry.event)
        self.graph.admit(partner)
        if partner.kind is EventKind.RECV:
            self.graph.connect(
                entry.event.id, partner.id, RelationKind.CONCURRENT
            )
        self._emit(
            MessageKind.ACK_P, to_rank=self.rank, to_process=True,
            about=entry.event.id,
        )

    def _on_wait_request(self, msg: ControlMessage, now: int) -> None:
        entry = next(
            (e for e in self.queue
             if e.side == "local" and e.event.id == msg.wait_for),
            None,
        )
        if entry is None:
            raise ProtocolError(
                f"manager {self.rank}: wait for unknown event {msg.wait_for}"
            )
        entry.completion_requested = True
        entry.shell = msg.shell
        if entry.matched:
            self._complete(entry, now)

    def _complete(self, entry: QueueEntry, now: int) -> None:
        """Finish a matched nonblocking operation at its wait."""
        self.queue.remove(entry)
        init, shell = entry.event, entry.shell
        partner = entry.partner_event
        if (
            init.kind is EventKind.RECV_INIT
            and partner.buf_len > init.buf_len
        ):
            # Receive-side truncation surfaces on the completion event;
            # the initiation itself did nothing wrong.
            self._record_failure(shell.failed(REASON_TRUNCATED))
            self.graph.admit(init)
            self._admit_partner(partner.failed(REASON_TRUNCATED))
            self.graph.connect(partner.id, shell.id, RelationKind.CONCURRENT)
            self.graph.connect(init.id, shell.id, RelationKind.NONBLOCKING)
            self._emit(
                MessageKind.ABORT_P, to_rank=self.rank, to_process=True,
                about=shell.id, reason=REASON_TRUNCATED,
            )
            self._halt_run(abort_own_later=True)
            return
        self.graph.admit(init)
        self.graph.admit(shell)
        self.graph.admit(partner)
        if init.kind is EventKind.RECV_INIT:
            self.graph.connect(partner.id, shell.id, RelationKind.CONCURRENT)
        elif partner.kind is EventKind.RECV:
            self.graph.connect(init.id, partner.id, RelationKind.CONCURRENT)
        self.graph.connect(init.id, shell.id, RelationKind.NONBLOCKING)
        ack = (
            MessageKind.ACK_R
            if init.kind is EventKind.RECV_INIT
            else MessageKind.ACK_P
        )
        self._emit(ack, to_rank=self.rank, to_process=True, about=init.id)

    # -- timeouts and direct notifications ------------------------------

    def scan_timeouts(self, now: int) -> bool:
        """Fail the earliest expired entry, if any.  Runs in state C.

        Only local entries produce a verdict: each manager indicts its own
        process's events.  An expired remote entry means the sender's
        manager vanished without a word, so this one just stops the run;
        blaming the dead rank is the localizer's job, not the detector's.
        """
        if self.terminated:
            return False
        expired = [e for e in self.queue if e.deadline <= now]
        if not expired:
            return False
        entry = min(
            expired,
            key=lambda e: (e.deadline, e.event.rank, e.event.seq),
        )
        if entry.side == "local":
            failed = entry.event.failed(REASON_ISOLATED)
            if self.gate.record(failed):
                self.graph.admit(failed)
            self._emit(
                MessageKind.ABORT_P, to_rank=self.rank, to_process=True,
                about=entry.event.id, reason=REASON_ISOLATED,
            )
            self._halt_run(abort_own_later=True)
        else:
            self._halt_run()
        return True

    def admit_calc(self, event: Event) -> None:
        """Record a calculation event; no handshake, no latency."""
        if self.terminated:
            return
        self.graph.admit(event)

    def notify_crash(self, event: Event) -> None:
        """The process died at ``event``.

        Records an aborted calculation failure and goes silent.  No stop
        is broadcast: the other ranks discover the death through their own
        timeouts, each from its own point of view.
        """
        if self.terminated:
            return
        failed = event.failed(REASON_ABORTED)
        if self.gate.record(failed):
            self.graph.admit(failed)
        self.terminated = True
        self.queue.clear()

    def vanish(self) -> None:
        """Disappear without recording or telling anyone.

        Models a crash that takes the co-located manager down with the
        process; survivors can only find out through their own timeouts.
        """
        self.terminated = True
        self.queue.clear()

    # -- internals -------------------------------------------------------

    def _record_failure(self, event: Event) -> None:
        # Own-rank verdicts; only refusable when another manager indicted
        # this rank in the same tick, in which case that verdict stands.
        if self.gate.record(event):
            self.graph.admit(event)

    def _admit_partner(self, failed_copy: Event) -> None:
        # Keep the pair anchored even when the partner's rank already has
        # a different failure: fall back to the successful copy.
        if self.gate.record(failed_copy):
            self.graph.admit(failed_copy)
        else:
            self.graph.admit(
                replace(failed_copy, status=STATUS_SUCCESS, reason=None)
            )

    def _halt_run(self, abort_own_later: bool = False) -> None:
        """Stop every rank.  The detecting manager dies immediately."""
        for r in range(self.fabric.process_count):
            if r != self.rank:
                self._emit(MessageKind.STOP_M, to_rank=r)
        self.terminated = True
        self.queue.clear()
        if not abort_own_later:
            self.fabric.kill_process(self.rank)

    def _on_stop(self) -> None:
        self.terminated = True
        self.queue.clear()
        self.fabric.kill_process(self.rank)

    def _emit(self, kind: MessageKind, **kw) -> None:
        self.fabric.emit(ControlMessage(kind=kind, sender=self.rank, **kw))

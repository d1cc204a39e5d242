"""Deterministic discrete-event simulator for scenarios under detection.

Logical time advances in integer ticks.  Every message hop, application
or control, costs exactly one tick; computation advances the clock by its
stated duration; everything else within a tick is ordered by fixed rules
(rank ascending, then emission order), so a run is a pure function of the
scenario and the configuration.

Tick phases:

1. deliver control messages to managers (per manager: message-kind
   priority, then emission order),
2. deliver acks and aborts to processes,
3. advance processes rank-ascending; a process executes statements until
   it blocks, starts computing, finishes, or dies,
4. let managers fail expired queue entries,
5. jump the clock to the next tick that has scheduled work; none left
   means the run is over.

Delivering before scanning timeouts means a match that arrives on the
deadline tick still wins.  A process that unblocks in phase 2 continues
executing in phase 3 of the same tick.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .detector import (
    PRIORITY,
    ControlMessage,
    FailureGate,
    Manager,
    MessageKind,
)
from .event_graph import (
    ANY,
    Event,
    EventGraph,
    EventId,
    EventKind,
    GraphError,
    RelationKind,
)
from .scenario import (
    Bcast,
    Compute,
    Crash,
    Gather,
    IRecv,
    ISend,
    Recv,
    Scenario,
    Send,
    Statement,
    Wait,
    WaitAll,
)

__all__ = [
    "COLLECTIVE_TAG_BASE",
    "RunOutcome",
    "SimConfig",
    "Simulator",
    "decompose_collective",
    "run",
]

# Constituents of expanded collectives use tags far above the range user
# scenarios plausibly pick, namespaced by root and operation.
COLLECTIVE_TAG_BASE = 2 ** 30


@dataclass(frozen=True, slots=True)
class SimConfig:
    """Knobs of a run.

    ``seed`` is accepted for interface stability but has no observable
    effect: every ordering in the simulator is fixed, so runs are always
    bit-reproducible.  ``buffer_capacity_events`` of None means unlimited.
    Standard-mode sends up to ``eager_threshold`` length complete without
    waiting for the receiver, like buffered sends; longer ones behave
    synchronously.
    """

    timeout_ticks: int = 1000
    seed: int = 0
    buffer_capacity_events: int | None = None
    eager_threshold: int = 64
    silent_crash: bool = False

    def __post_init__(self) -> None:
        if self.timeout_ticks < 1:
            raise ValueError("timeout_ticks must be >= 1")
        if self.eager_threshold < 0:
            raise ValueError("eager_threshold must be >= 0")
        if (
            self.buffer_capacity_events is not None
            and self.buffer_capacity_events < 1
        ):
            raise ValueError("buffer_capacity_events must be positive or None")


@dataclass(frozen=True)
class RunOutcome:
    """Everything a run leaves behind."""

    graph: EventGraph
    terminated_abnormally: bool
    aborted_ranks: frozenset[int]
    crash_outside_routines: frozenset[int]
    final_tick: int
    scenario_name: str
    process_count: int
    timeout_ticks: int


def _bcast_schedule(n: int, vrank: int) -> list[tuple[str, int]]:
    # Binomial tree, highest bit first: parent of v clears v's lowest set
    # bit, so the root reaches everyone in ceil(log2 n) rounds.
    ops: list[tuple[str, int]] = []
    mask = 1
    while mask < n:
        if vrank & mask:
            ops.append(("recv", vrank - mask))
            break
        mask <<= 1
    mask >>= 1
    while mask > 0:
        if vrank + mask < n:
            ops.append(("send", vrank + mask))
        mask >>= 1
    return ops


def _gather_schedule(n: int, vrank: int) -> list[tuple[str, int]]:
    # Exact reversal of the broadcast tree, leaves first.
    ops: list[tuple[str, int]] = []
    mask = 1
    while mask < n:
        if vrank & mask == 0:
            if vrank + mask < n:
                ops.append(("recv", vrank + mask))
        else:
            ops.append(("send", vrank - mask))
            break
        mask <<= 1
    return ops


def decompose_collective(
    stmt: Bcast | Gather, participants: set[int], root: int | None = None
) -> dict[int, list[Statement]]:
    """Expand a collective into per-rank point-to-point statements.

    Returns, for every participant, the blocking standard-mode sends and
    receives it must execute, in order, along a deterministic binomial
    tree rooted at ``root``.  All constituents of one collective share a
    reserved tag derived from the root and the operation, so concurrent
    collectives with different roots cannot cross-match.
    """
    if not participants:
        raise ValueError("participants must be nonempty")
    if root is None:
        root = stmt.root
    if root not in participants:
        raise ValueError(f"root {root} not among participants")
    order = sorted(participants)
    pos = {r: i for i, r in enumerate(order)}
    n = len(order)
    offset = 0 if isinstance(stmt, Bcast) else 1
    tag = COLLECTIVE_TAG_BASE + root * 2 + offset
    schedule = _bcast_schedule if isinstance(stmt, Bcast) else _gather_schedule
    out: dict[int, list[Statement]] = {}
    for rank in order:
        vrank = (pos[rank] - pos[root]) % n
        stmts: list[Statement] = []
        for op, peer_v in schedule(n, vrank):
            peer = order[(peer_v + pos[root]) % n]
            if op == "send":
                stmts.append(
                    Send(peer, tag, stmt.length, "standard", line=stmt.line)
                )
            else:
                stmts.append(Recv(peer, tag, stmt.length, line=stmt.line))
        out[rank] = stmts
    return out


@dataclass(frozen=True, slots=True)
class _Item:
    """An executable step: the statement plus recording metadata."""

    stmt: Statement
    routine: str
    collective: tuple[str, int] | None = None


def _expand_script(
    script: tuple[Statement, ...], rank: int, n: int
) -> list[_Item]:
    items: list[_Item] = []
    for stmt in script:
        if isinstance(stmt, (Bcast, Gather)):
            meta = (stmt.routine, stmt.root)
            if 0 <= stmt.root < n:
                parts = decompose_collective(stmt, set(range(n)))[rank]
            elif isinstance(stmt, Bcast):
                # Root outside the run: point at the phantom directly, so
                # the fault surfaces as an isolated wait on it.
                parts = [Recv(stmt.root, COLLECTIVE_TAG_BASE + stmt.root * 2,
                              stmt.length, line=stmt.line)]
            else:
                parts = [Send(stmt.root, COLLECTIVE_TAG_BASE + stmt.root * 2 + 1,
                              stmt.length, "standard", line=stmt.line)]
            items.extend(_Item(p, stmt.routine, meta) for p in parts)
        else:
            items.append(_Item(stmt, stmt.routine))
    return items


class _Fabric:
    """Message transport: one tick of latency, total emission order.

    Send requests addressed outside the rank range, or from a rank to
    itself, are silently dropped; the sender's queue entry can then only
    time out, which is exactly how such faults are meant to surface.
    """

    def __init__(self, process_count: int) -> None:
        self.process_count = process_count
        self.now = 0
        self.in_flight: list[tuple[int, int, ControlMessage]] = []
        self._serial = 0
        self.kill_process = lambda rank: None

    def emit(self, msg: ControlMessage) -> None:
        to = msg.to_rank
        if msg.kind is MessageKind.REQ_M:
            if not 0 <= to < self.process_count or to == msg.sender:
                return
        elif not 0 <= to < self.process_count:
            return
        self._serial += 1
        self.in_flight.append((self.now + 1, self._serial, msg))

    def take_due(self, tick: int, to_process: bool) -> list[tuple[int, ControlMessage]]:
        due = [
            (serial, msg)
            for arrival, serial, msg in self.in_flight
            if arrival == tick and msg.to_process == to_process
        ]
        self.in_flight = [
            item
            for item in self.in_flight
            if not (item[0] == tick and item[2].to_process == to_process)
        ]
        return due

    def next_arrival(self) -> int | None:
        return min((a for a, _, _ in self.in_flight), default=None)


class _SimProcess:
    """One simulated rank: a program counter over expanded statements."""

    def __init__(self, rank: int, items: list[_Item], manager: Manager,
                 fabric: _Fabric, config: SimConfig, source_file: str,
                 s_ledger: list[tuple[EventId, EventId]]) -> None:
        self.rank = rank
        self.items = items
        self.manager = manager
        self.fabric = fabric
        self.config = config
        self.source_file = source_file
        self.s_ledger = s_ledger
        self.pc = 0
        self.seq_next = 0
        self.status = "running"
        self.blocked: tuple[str, object] | None = None
        self.resume_at = 0
        self.abort_pending = False
        self.handles: dict[str, Event] = {}
        self.crashed_silently = False

    # -- event plumbing --------------------------------------------------

    def _new_event(self, kind: EventKind, item: _Item, now: int, *,
                   mode: str | None = None, tag=None, partner=None,
                   buf_len: int | None = None) -> Event:
        event = Event(
            EventId(self.rank, self.seq_next), kind, item.routine,
            logical_time=now, source_file=self.source_file,
            source_line=item.stmt.line, mode=mode, tag=tag, partner=partner,
            buf_len=buf_len, collective=item.collective,
        )
        if self.seq_next > 0:
            self.s_ledger.append(
                (EventId(self.rank, self.seq_next - 1), event.id)
            )
        self.seq_next += 1
        return event

    def _request(self, event: Event, *, blocking: bool) -> None:
        self.fabric.emit(
            ControlMessage(
                MessageKind.REQ_P, sender=self.rank, to_rank=self.rank,
                event=event, blocking=blocking,
            )
        )

    def _die(self) -> None:
        self.status = "dead"
        self.blocked = None

    # -- deliveries ------------------------------------------------------

    def deliver(self, msg: ControlMessage) -> None:
        if self.status in ("done", "dead"):
            return
        if msg.kind is MessageKind.ABORT_P:
            if self.status == "blocked":
                self._die()
            else:
                self.abort_pending = True
            return
        if msg.kind in (MessageKind.ACK_P, MessageKind.ACK_R):
            if self.status != "blocked":
                return
            what, payload = self.blocked
            if what in ("send_ack", "recv_ack") and payload == msg.about:
                self.status = "running"
                self.blocked = None
            elif what == "wait":
                payload.discard(msg.about)
                if not payload:
                    self.status = "running"
                    self.blocked = None

    # -- execution -------------------------------------------------------

    def advance(self, now: int) -> None:
        if self.status == "computing" and now >= self.resume_at:
            self.status = "running"
        while self.status == "running":
            if self.pc >= len(self.items):
                self.status = "done"
                return
            item = self.items[self.pc]
            stmt = item.stmt
            if isinstance(stmt, (Send, Recv, ISend, IRecv, Wait, WaitAll)):
                # Instrumented call: the only points where a pending abort
                # is observed.
                if self.abort_pending:
                    self._die()
                    return
            self.pc += 1
            if isinstance(stmt, Compute):
                event = self._new_event(EventKind.CALC, item, now)
                self.manager.admit_calc(event)
                self.resume_at = now + stmt.duration
                self.status = "computing"
                return
            if isinstance(stmt, Crash):
                if self.config.silent_crash:
                    self.crashed_silently = True
                    self.manager.vanish()
                else:
                    event = self._new_event(EventKind.CALC, item, now)
                    self.manager.notify_crash(event)
                self._die()
                return
            if isinstance(stmt, Send):
                event = self._new_event(
                    EventKind.SEND, item, now, mode=stmt.mode, tag=stmt.tag,
                    partner=stmt.dst, buf_len=stmt.length,
                )
                blocking = stmt.mode == "synchronous" or (
                    stmt.mode == "standard"
                    and stmt.length > self.config.eager_threshold
                )
                self._request(event, blocking=blocking)
                if blocking:
                    self.status = "blocked"
                    self.blocked = ("send_ack", event.id)
                    return
                continue
            if isinstance(stmt, Recv):
                event = self._new_event(
                    EventKind.RECV, item, now, tag=stmt.tag,
                    partner=stmt.src, buf_len=stmt.length,
                )
                self._request(event, blocking=True)
                self.status = "blocked"
                self.blocked = ("recv_ack", event.id)
                return
            if isinstance(stmt, ISend):
                event = self._new_event(
                    EventKind.SEND_INIT, item, now, mode="standard",
                    tag=stmt.tag, partner=stmt.dst, buf_len=stmt.length,
                )
                self.handles[stmt.handle] = event
                self._request(event, blocking=False)
                continue
            if isinstance(stmt, IRecv):
                event = self._new_event(
                    EventKind.RECV_INIT, item, now, tag=stmt.tag,
                    partner=stmt.src, buf_len=stmt.length,
                )
                self.handles[stmt.handle] = event
                self._request(event, blocking=False)
                continue
            if isinstance(stmt, (Wait, WaitAll)):
                names = (
                    (stmt.handle,) if isinstance(stmt, Wait) else stmt.handles
                )
                pending: set[EventId] = set()
                for name in names:
                    init = self.handles[name]
                    shell_kind = (
                        EventKind.SEND_COMPLETE
                        if init.kind is EventKind.SEND_INIT
                        else EventKind.RECV_COMPLETE
                    )
                    shell = self._new_event(
                        shell_kind, item, now, tag=init.tag,
                        partner=init.partner, buf_len=init.buf_len,
                    )
                    self.fabric.emit(
                        ControlMessage(
                            MessageKind.REQ_P, sender=self.rank,
                            to_rank=self.rank, wait_for=init.id, shell=shell,
                        )
                    )
                    pending.add(init.id)
                self.status = "blocked"
                self.blocked = ("wait", pending)
                return
            raise AssertionError(f"unhandled statement {stmt!r}")


class Simulator:
    """Executes one scenario tick by tick.  See the module docstring."""

    def __init__(self, scenario: Scenario, config: SimConfig | None = None):
        self.scenario = scenario
        self.config = config or SimConfig()
        n = scenario.process_count
        self.tick = 0
        self.fabric = _Fabric(n)
        self.gate = FailureGate()
        self.s_ledger: list[tuple[EventId, EventId]] = []
        self.managers = [
            Manager(
                r, self.config.timeout_ticks, self.gate, self.fabric,
                self.config.buffer_capacity_events,
            )
            for r in range(n)
        ]
        self.processes = [
            _SimProcess(
                r, _expand_script(scenario.scripts[r], r, n),
                self.managers[r], self.fabric, self.config, scenario.name,
                self.s_ledger,
            )
            for r in range(n)
        ]
        self.fabric.kill_process = self._kill

    def _kill(self, rank: int) -> None:
        proc = self.processes[rank]
        if proc.status not in ("done", "dead"):
            proc.status = "dead"
            proc.blocked = None

    def step(self) -> bool:
        """Run all phases of the current tick; False when nothing remains."""
        self._run_tick()
        nxt = self._next_tick()
        if nxt is None:
            return False
        self.tick = nxt
        self.fabric.now = nxt
        return True

    def _run_tick(self) -> None:
        now = self.tick
        for_managers = self.fabric.take_due(now, to_process=False)
        for_managers.sort(key=lambda sm: (sm[1].to_rank, PRIORITY[sm[1].kind], sm[0]))
        for _, msg in for_managers:
            self.managers[msg.to_rank].on_control(msg, now)
        for_processes = self.fabric.take_due(now, to_process=True)
        for_processes.sort(key=lambda sm: (sm[1].to_rank, sm[0]))
        for _, msg in for_processes:
            self.processes[msg.to_rank].deliver(msg)
        for proc in self.processes:
            proc.advance(now)
        for manager in self.managers:
            manager.scan_timeouts(now)

    def _next_tick(self) -> int | None:
        candidates = []
        arrival = self.fabric.next_arrival()
        if arrival is not None:
            candidates.append(arrival)
        for proc in self.processes:
            if proc.status == "computing":
                candidates.append(proc.resume_at)
        for manager in self.managers:
            if not manager.terminated:
                candidates.extend(e.deadline for e in manager.queue)
        if not candidates:
            return None
        nxt = min(candidates)
        if nxt <= self.tick:
            raise AssertionError(f"clock would not advance past {self.tick}")
        return nxt

    def run(self) -> RunOutcome:
        while self.step():
            pass
        return self._outcome()

    def _outcome(self) -> RunOutcome:
        events: dict[EventId, Event] = {}
        for manager in self.managers:
            for ev in manager.graph.events.values():
                held = events.get(ev.id)
                if held is None or held == ev:
                    events[ev.id] = ev
                    continue
                # Copies may differ only in failure marking; the failed
                # view wins so the final graph carries the verdict.
                if ev.is_failure and not held.is_failure:
                    if replace(ev, status="success", reason=None) != held:
                        raise GraphError(f"inconsistent copies of {ev.id}")
                    events[ev.id] = ev
                elif held.is_failure and not ev.is_failure:
                    if replace(held, status="success", reason=None) != ev:
                        raise GraphError(f"inconsistent copies of {ev.id}")
                else:
                    raise GraphError(f"inconsistent copies of {ev.id}")
        edges: set[tuple[EventId, EventId, RelationKind]] = set()
        for manager in self.managers:
            edges |= manager.graph.edges
        edges |= {
            (a, b, RelationKind.SEQUENTIAL) for a, b in self.s_ledger
        }
        edges = {
            (a, b, k) for a, b, k in edges if a in events and b in events
        }
        graph = EventGraph.assemble(
            self.scenario.process_count, list(events.values()), edges
        )
        crash_outside = frozenset(
            p.rank for p in self.processes if p.crashed_silently
        )
        # A rank is aborted when a manager indicted it: its failure event
        # is in the graph.  Ranks merely stopped by the halt broadcast and
        # silent crashes carry no verdict and are not listed.
        aborted = frozenset(
            ev.rank for ev in graph.events() if ev.is_failure
        )
        failed = bool(aborted)
        return RunOutcome(
            graph=graph,
            terminated_abnormally=failed or bool(crash_outside),
            aborted_ranks=aborted,
            crash_outside_routines=crash_outside,
            final_tick=self.tick,
            scenario_name=self.scenario.name,
            process_count=self.scenario.process_count,
            timeout_ticks=self.config.timeout_ticks,
        )


def run(scenario: Scenario, config: SimConfig | None = None) -> RunOutcome:
    """Execute ``scenario`` to completion, abort, or quiescence."""
    return Simulator(scenario, config).run()

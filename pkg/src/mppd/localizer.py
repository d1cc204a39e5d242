"""Backtracking fault localization over a completed event graph.

Stage one maps every rank to its failure event, or None for a rank that
recorded none.  Stage two walks communication dependencies: starting from
each rank in ascending order, it follows the partner named by the current
failure event until it reaches a rank that already has a verdict, a rank
with no failure event, a calculation failure, or a rank it has already
visited on this walk (a cycle).  Every walk contributes the ranks it
proved faulty as one group, and each group is classified as one of four
situations: a calculation fault, a non-occurred event, a deadlock, or a
buffer overflow.

Two dependency dead ends are settled by policy rather than by the walk
itself.  A failed wildcard receive names no concrete partner, and
inventing one would fabricate a dependency, so the walk ends there and
the failed rank alone is blamed.  A partner outside the known ranks ends
the walk the same way, with a diagnostic naming the bogus rank.

The walk deliberately keeps one quirk of the formulation it follows:
rank 0 doubles as the "clean" sentinel value, so a cycle traced from
rank 0 back to itself reports nothing on that first walk.  A later
iteration of the outer loop recovers the cycle, so reports are complete;
only the grouping order shifts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .event_graph import ANY, Event, EventGraph, EventId, EventKind

__all__ = [
    "BacktraceContext",
    "FailureSituation",
    "Group",
    "LocalizationReport",
    "backtrace_comm_dep",
    "classify",
    "localize",
]


class FailureSituation(enum.Enum):
    CALCULATION_FAULT = "CalculationFault"
    NON_OCCURRED_EVENT = "NonOccurredEvent"
    DEADLOCK = "Deadlock"
    BUFFER_OVERFLOW = "BufferOverflow"


@dataclass(frozen=True, slots=True)
class Group:
    """Ranks proved faulty by one walk, with the situation they are in."""

    ranks: frozenset[int]
    situation: FailureSituation
    evidence: tuple[EventId, ...]


@dataclass(frozen=True)
class LocalizationReport:
    faulty: frozenset[int]
    failure_events: dict[int, EventId | None]
    groups: tuple[Group, ...]
    unlocalizable: bool = False
    reason: str | None = None
    diagnostics: tuple[str, ...] = ()


@dataclass
class BacktraceContext:
    """Mutable state threaded through one localization run."""

    ranks: frozenset[int]
    failures: dict[int, Event | None]
    faulty: set[int] = field(default_factory=set)
    added: list[int] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)

    def mark(self, rank: int) -> None:
        if rank not in self.faulty:
            self.faulty.add(rank)
            self.added.append(rank)


def backtrace_comm_dep(
    p: int, p_dep: tuple[int, ...], ctx: BacktraceContext
) -> int:
    """Walk the dependency chain from ``p``; see the module docstring.

    Returns 0 when ``p`` needs no blame from this walk, -1 when the chain
    ended one hop ago at a terminal fault, -2 when it ended at a missing
    event, and a rank number while unwinding out of a detected cycle.
    """
    fe = ctx.failures.get(p)
    if p in ctx.faulty or (fe is None and not p_dep):
        return 0
    if fe is not None and fe.kind is EventKind.CALC:
        return -1
    if fe is None:
        return -2
    if p in p_dep:
        return p
    q = fe.partner
    if q == ANY:
        ctx.mark(p)
        ctx.diagnostics.append(
            f"rank {p}: failed wildcard receive names no partner; "
            "dependency chain ends here"
        )
        return -1
    if q not in ctx.ranks:
        ctx.mark(p)
        ctx.diagnostics.append(f"rank {p}: invalid partner rank {q}")
        return -1
    retval = backtrace_comm_dep(q, p_dep + (p,), ctx)
    if retval != 0:
        ctx.mark(q)
    if retval == p:
        retval = 0
    elif retval < 0:
        retval += 1
    return retval


def classify(
    group: frozenset[int] | set[int],
    graph: EventGraph,
    failure_events: dict[int, EventId | None],
) -> FailureSituation:
    """Name the situation a faulty group is in.

    The group's own events decide: a calculation failure anywhere means a
    calculation fault; a missing or wildcard failure event means the
    expected communication never occurred; a cycle closed by a truncated
    pair is a buffer overflow; any other cycle is a deadlock.
    """
    if not group:
        raise ValueError("cannot classify an empty group")
    ids = [failure_events.get(r) for r in group]
    events = [graph.event(i) for i in ids if i is not None]
    if any(e.kind is EventKind.CALC for e in events):
        return FailureSituation.CALCULATION_FAULT
    if any(i is None for i in ids):
        return FailureSituation.NON_OCCURRED_EVENT
    if any(e.partner == ANY for e in events):
        return FailureSituation.NON_OCCURRED_EVENT
    eids = {e.id for e in events}
    for a, b, _ in graph.edges():
        if a in eids and b in eids and graph.is_truncated(a, b):
            return FailureSituation.BUFFER_OVERFLOW
    if len(events) >= 2 and all(e.reason == "truncated" for e in events):
        # A truncated pair whose edge did not survive still names itself.
        return FailureSituation.BUFFER_OVERFLOW
    return FailureSituation.DEADLOCK


def localize(
    ranks: set[int],
    graph: EventGraph,
    *,
    terminated_abnormally: bool = False,
) -> LocalizationReport:
    """Run both stages over ``graph`` for the given ``ranks``.

    ``terminated_abnormally`` is the run outcome flag; with it set, a
    graph holding no failure events at all yields an unlocalizable
    report, the honest answer when every process died silently.
    """
    all_fes = graph.failure_events()
    fe_ids = {p: all_fes.get(p) for p in sorted(ranks)}
    failures = {
        p: graph.event(i) if i is not None else None
        for p, i in fe_ids.items()
    }
    if all(i is None for i in fe_ids.values()):
        return LocalizationReport(
            faulty=frozenset(),
            failure_events=fe_ids,
            groups=(),
            unlocalizable=terminated_abnormally,
            reason="no failure events recorded" if terminated_abnormally else None,
        )
    ctx = BacktraceContext(ranks=frozenset(ranks), failures=failures)
    groups: list[Group] = []
    for p in sorted(ranks):
        ctx.added = []
        if backtrace_comm_dep(p, (), ctx) != 0:
            ctx.mark(p)
        if ctx.added:
            members = frozenset(ctx.added)
            evidence = tuple(
                sorted(fe_ids[r] for r in members if fe_ids[r] is not None)
            )
            groups.append(
                Group(members, classify(members, graph, fe_ids), evidence)
            )
    return LocalizationReport(
        faulty=frozenset(ctx.faulty),
        failure_events=fe_ids,
        groups=tuple(groups),
        diagnostics=tuple(ctx.diagnostics),
    )

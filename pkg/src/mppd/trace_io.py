"""Trace files: the JSON-lines contract between runtime, CLI, and viewer.

A trace is UTF-8 text, one JSON object per line:

* line 1, the header: format_version, scenario_name, process_count,
  timeout_ticks, generated_by;
* one line per event, numbered 1..n in (time, rank, seq) order;
* one line per relation, referencing event numbers;
* the final line, the run outcome.

Serialization is canonical: the same graph and outcome always produce
byte-identical files, which keeps golden files honest and diffs small.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import __version__
from .event_graph import (
    Event,
    EventGraph,
    EventId,
    EventKind,
    GraphError,
    RelationKind,
)

__all__ = ["FORMAT_VERSION", "TraceError", "TraceMeta", "read_trace", "write_trace"]

FORMAT_VERSION = 1


class TraceError(ValueError):
    """A trace file that cannot be accepted, with the offending line."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, slots=True)
class TraceMeta:
    """Everything a trace carries besides the graph itself."""

    scenario_name: str
    process_count: int
    timeout_ticks: int
    terminated_abnormally: bool
    aborted_ranks: frozenset[int]
    crash_outside_routines: frozenset[int]
    final_tick: int
    generated_by: str = f"mppd {__version__}"


def _event_record(no: int, event: Event) -> dict:
    return {
        "no": no,
        "rank": event.rank,
        "seq": event.seq,
        "kind": event.kind.wire,
        "routine": event.routine,
        "mode": event.mode,
        "tag": event.tag,
        "partner": event.partner,
        "len": event.buf_len,
        "file": event.source_file,
        "line": event.source_line,
        "time": event.logical_time,
        "status": event.status,
        "reason": event.reason,
        "collective": list(event.collective) if event.collective else None,
    }


def event_numbers(graph: EventGraph) -> dict[EventId, int]:
    """The canonical 1-based numbering used by traces and reports."""
    return {e.id: i + 1 for i, e in enumerate(graph.events())}


def trace_document(graph: EventGraph, outcome) -> dict:
    """The trace as one JSON-ready object; write_trace flattens this.

    ``outcome`` may be a RunOutcome or a TraceMeta; only its metadata
    attributes are read.
    """
    events = graph.events()
    numbers = {e.id: i + 1 for i, e in enumerate(events)}
    rels = sorted(
        (numbers[a], numbers[b], kind.value) for a, b, kind in graph.edges()
    )
    return {
        "header": {
            "format_version": FORMAT_VERSION,
            "scenario_name": outcome.scenario_name,
            "process_count": graph.process_count,
            "timeout_ticks": outcome.timeout_ticks,
            "generated_by": f"mppd {__version__}",
        },
        "events": [_event_record(i + 1, e) for i, e in enumerate(events)],
        "relations": [
            {"rel": [src, dst], "kind": kind} for src, dst, kind in rels
        ],
        "outcome": {
            "terminated_abnormally": outcome.terminated_abnormally,
            "aborted_ranks": sorted(outcome.aborted_ranks),
            "crash_outside_routines": sorted(outcome.crash_outside_routines),
            "final_tick": outcome.final_tick,
        },
    }


def dumps_trace(graph: EventGraph, outcome) -> str:
    """The trace file text: one JSON object per line."""
    doc = trace_document(graph, outcome)
    lines = [json.dumps(doc["header"])]
    lines += [json.dumps(record) for record in doc["events"]]
    lines += [json.dumps(record) for record in doc["relations"]]
    lines.append(json.dumps({"outcome": doc["outcome"]}))
    return "\n".join(lines) + "\n"


def write_trace(graph: EventGraph, outcome, path) -> None:
    """Write ``graph`` plus ``outcome`` metadata to ``path``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_trace(graph, outcome))


def _parse_event(obj: dict, lineno: int) -> Event:
    try:
        collective = obj.get("collective")
        return Event(
            EventId(obj["rank"], obj["seq"]),
            EventKind(obj["kind"]),
            obj["routine"],
            logical_time=obj["time"],
            source_file=obj["file"],
            source_line=obj["line"],
            mode=obj["mode"],
            tag=obj["tag"],
            partner=obj["partner"],
            buf_len=obj["len"],
            status=obj["status"],
            reason=obj["reason"],
            collective=tuple(collective) if collective else None,
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise TraceError(lineno, f"bad event record: {exc}") from exc


def read_trace(path) -> tuple[EventGraph, TraceMeta]:
    """Parse ``path``; inverse of write_trace for well-formed files."""
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise TraceError(1, "empty trace file")
    try:
        header = json.loads(raw[0])
    except json.JSONDecodeError as exc:
        raise TraceError(1, f"malformed header: {exc}") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise TraceError(
            1, f"unsupported format_version {version!r}; this reader "
            f"handles {FORMAT_VERSION}"
        )
    for key in ("scenario_name", "process_count", "timeout_ticks"):
        if key not in header:
            raise TraceError(1, f"header is missing {key!r}")
    by_no: dict[int, Event] = {}
    edges: set[tuple[EventId, EventId, RelationKind]] = set()
    outcome = None
    for lineno, text in enumerate(raw[1:], start=2):
        if not text.strip():
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TraceError(lineno, f"malformed line: {exc}") from exc
        if outcome is not None:
            raise TraceError(lineno, "content after the outcome line")
        if "no" in obj:
            event = _parse_event(obj, lineno)
            if obj["no"] in by_no:
                raise TraceError(lineno, f"duplicate event number {obj['no']}")
            by_no[obj["no"]] = event
        elif "rel" in obj:
            try:
                src_no, dst_no = obj["rel"]
                kind = RelationKind(obj["kind"])
            except (KeyError, ValueError, TypeError) as exc:
                raise TraceError(lineno, f"bad relation record: {exc}") from exc
            if src_no not in by_no or dst_no not in by_no:
                raise TraceError(
                    lineno,
                    f"relation references undeclared event "
                    f"{src_no if src_no not in by_no else dst_no}",
                )
            edges.add((by_no[src_no].id, by_no[dst_no].id, kind))
        elif "outcome" in obj:
            outcome = obj["outcome"]
        else:
            raise TraceError(lineno, "unrecognized record")
    if outcome is None:
        raise TraceError(len(raw), "missing outcome line")
    expected = list(range(1, len(by_no) + 1))
    if sorted(by_no) != expected:
        raise TraceError(2, "event numbering is not a gapless 1..n range")
    try:
        graph = EventGraph.assemble(
            header["process_count"], list(by_no.values()), edges
        )
    except GraphError as exc:
        raise TraceError(2, f"inconsistent graph: {exc}") from exc
    meta = TraceMeta(
        scenario_name=header["scenario_name"],
        process_count=header["process_count"],
        timeout_ticks=header["timeout_ticks"],
        terminated_abnormally=bool(outcome.get("terminated_abnormally")),
        aborted_ranks=frozenset(outcome.get("aborted_ranks", ())),
        crash_outside_routines=frozenset(
            outcome.get("crash_outside_routines", ())
        ),
        final_tick=outcome.get("final_tick", 0),
        generated_by=header.get("generated_by", ""),
    )
    return graph, meta

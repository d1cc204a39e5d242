"""Scenario language: per-rank scripts of communication and calculation steps.

A scenario is a line-oriented text file::

    processes 2
    # rank 0 greets rank 1
    proc 0:
        ssend to 1 tag 0 len 4
    proc 1:
        recv from 0 tag 0 len 4

Keywords are lowercase.  ``recv``/``irecv`` accept ``any`` for source and
tag.  ``#`` starts a comment.  A rank without a ``proc`` section runs an
empty script.  Scenarios deliberately admit faults (out-of-range partner
ranks, mismatched lengths, ``crash``): those parse cleanly and at most
earn a warning from :func:`validate`, because injecting them is the point.

``sendrecv`` is surface syntax: it parses into an ``isend``, an ``irecv``
and a ``waitall`` of both synthetic handles, which cannot deadlock against
another ``sendrecv``.  The canonical printer folds the triple back into
one line, so parse and print round-trip.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .event_graph import ANY

__all__ = [
    "ANY",
    "Bcast",
    "Compute",
    "Crash",
    "Gather",
    "IRecv",
    "ISend",
    "Recv",
    "Scenario",
    "ScenarioError",
    "Send",
    "Statement",
    "Wait",
    "WaitAll",
    "parse_scenario",
    "print_scenario",
    "validate",
]

MODES = ("standard", "buffered", "synchronous", "ready")

_MODE_BY_KEYWORD = {
    "send": "standard",
    "bsend": "buffered",
    "ssend": "synchronous",
    "rsend": "ready",
}
_KEYWORD_BY_MODE = {v: k for k, v in _MODE_BY_KEYWORD.items()}


class ScenarioError(ValueError):
    """Parse or structural error, carrying the offending line number."""

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True, slots=True)
class Send:
    dst: int
    tag: int
    length: int
    mode: str = "standard"
    line: int = field(default=0, compare=False)

    @property
    def routine(self) -> str:
        return _KEYWORD_BY_MODE[self.mode]


@dataclass(frozen=True, slots=True)
class Recv:
    src: int | str
    tag: int | str
    length: int
    line: int = field(default=0, compare=False)

    routine = "recv"


@dataclass(frozen=True, slots=True)
class ISend:
    dst: int
    tag: int
    length: int
    handle: str
    routine: str = "isend"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class IRecv:
    src: int | str
    tag: int | str
    length: int
    handle: str
    routine: str = "irecv"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class Wait:
    handle: str
    line: int = field(default=0, compare=False)

    routine = "wait"


@dataclass(frozen=True, slots=True)
class WaitAll:
    handles: tuple[str, ...]
    routine: str = "waitall"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class Compute:
    duration: int
    line: int = field(default=0, compare=False)

    routine = "compute"


@dataclass(frozen=True, slots=True)
class Crash:
    line: int = field(default=0, compare=False)

    routine = "crash"


@dataclass(frozen=True, slots=True)
class Bcast:
    root: int
    length: int
    line: int = field(default=0, compare=False)

    routine = "bcast"


@dataclass(frozen=True, slots=True)
class Gather:
    root: int
    length: int
    line: int = field(default=0, compare=False)

    routine = "gather"


Statement = (
    Send | Recv | ISend | IRecv | Wait | WaitAll | Compute | Crash | Bcast | Gather
)


@dataclass(frozen=True)
class Scenario:
    """A parsed scenario: one ordered script per rank."""

    process_count: int
    scripts: tuple[tuple[Statement, ...], ...]
    name: str = "scenario"

    def __post_init__(self) -> None:
        if self.process_count <= 0:
            raise ValueError("process_count must be positive")
        if len(self.scripts) != self.process_count:
            raise ValueError(
                f"need {self.process_count} scripts, got {len(self.scripts)}"
            )


_PROC_RE = re.compile(r"^proc\s+(\d+)\s*:$")


class _LineParser:
    """Tokenized view of one statement line with positioned errors."""

    def __init__(self, tokens: list[str], line: int) -> None:
        self.tokens = tokens
        self.line = line
        self.pos = 0

    def fail(self, message: str) -> "ScenarioError":
        return ScenarioError(self.line, message)

    def next(self, what: str) -> str:
        if self.pos >= len(self.tokens):
            raise self.fail(f"expected {what}")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def keyword(self, word: str) -> None:
        tok = self.next(f"'{word}'")
        if tok != word:
            raise self.fail(f"expected '{word}', got '{tok}'")

    def integer(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise self.fail(f"expected integer {what}, got '{tok}'") from None

    def length(self, what: str = "length") -> int:
        n = self.integer(what)
        if n < 0:
            raise self.fail(f"negative length {n}")
        return n

    def rank_or_any(self, what: str) -> int | str:
        tok = self.next(what)
        if tok == ANY:
            return ANY
        try:
            return int(tok)
        except ValueError:
            raise self.fail(f"expected rank or 'any' for {what}, got '{tok}'") from None

    def tag_or_any(self) -> int | str:
        tok = self.next("tag")
        if tok == ANY:
            return ANY
        try:
            return int(tok)
        except ValueError:
            raise self.fail(f"expected tag or 'any', got '{tok}'") from None

    def rest(self, what: str) -> list[str]:
        if self.pos >= len(self.tokens):
            raise self.fail(f"expected {what}")
        out = self.tokens[self.pos :]
        self.pos = len(self.tokens)
        return out

    def done(self) -> None:
        if self.pos != len(self.tokens):
            raise self.fail(f"trailing tokens: {' '.join(self.tokens[self.pos:])}")


def _parse_statement(p: _LineParser, sendrecv_count: int) -> list[Statement]:
    word = p.next("statement keyword")
    ln = p.line
    if word in _MODE_BY_KEYWORD:
        p.keyword("to")
        dst = p.integer("destination rank")
        p.keyword("tag")
        tag = p.integer("tag")
        p.keyword("len")
        length = p.length()
        p.done()
        return [Send(dst, tag, length, _MODE_BY_KEYWORD[word], line=ln)]
    if word == "recv":
        p.keyword("from")
        src = p.rank_or_any("source rank")
        p.keyword("tag")
        tag = p.tag_or_any()
        p.keyword("len")
        length = p.length()
        p.done()
        return [Recv(src, tag, length, line=ln)]
    if word == "isend":
        p.keyword("to")
        dst = p.integer("destination rank")
        p.keyword("tag")
        tag = p.integer("tag")
        p.keyword("len")
        length = p.length()
        p.keyword("handle")
        handle = p.next("handle name")
        p.done()
        return [ISend(dst, tag, length, handle, line=ln)]
    if word == "irecv":
        p.keyword("from")
        src = p.rank_or_any("source rank")
        p.keyword("tag")
        tag = p.tag_or_any()
        p.keyword("len")
        length = p.length()
        p.keyword("handle")
        handle = p.next("handle name")
        p.done()
        return [IRecv(src, tag, length, handle, line=ln)]
    if word == "wait":
        handle = p.next("handle name")
        p.done()
        return [Wait(handle, line=ln)]
    if word == "waitall":
        handles = tuple(p.rest("handle names"))
        return [WaitAll(handles, line=ln)]
    if word == "compute":
        ticks = p.integer("tick count")
        if ticks < 1:
            raise p.fail(f"compute duration must be >= 1, got {ticks}")
        p.done()
        return [Compute(ticks, line=ln)]
    if word == "crash":
        p.done()
        return [Crash(line=ln)]
    if word == "bcast":
        p.keyword("root")
        root = p.integer("root rank")
        p.keyword("len")
        length = p.length()
        p.done()
        return [Bcast(root, length, line=ln)]
    if word == "gather":
        p.keyword("root")
        root = p.integer("root rank")
        p.keyword("len")
        length = p.length()
        p.done()
        return [Gather(root, length, line=ln)]
    if word == "sendrecv":
        p.keyword("to")
        dst = p.integer("destination rank")
        p.keyword("stag")
        stag = p.integer("send tag")
        p.keyword("slen")
        slen = p.length("send length")
        p.keyword("from")
        src = p.rank_or_any("source rank")
        p.keyword("rtag")
        rtag = p.tag_or_any()
        p.keyword("rlen")
        rlen = p.length("receive length")
        p.done()
        hs = f"__sr{sendrecv_count}s"
        hr = f"__sr{sendrecv_count}r"
        return [
            ISend(dst, stag, slen, hs, routine="sendrecv", line=ln),
            IRecv(src, rtag, rlen, hr, routine="sendrecv", line=ln),
            WaitAll((hs, hr), routine="sendrecv", line=ln),
        ]
    raise p.fail(f"unknown statement '{word}'")


def _check_handles(script: list[Statement], rank: int) -> None:
    introduced: set[str] = set()
    waited: set[str] = set()

    def wait_one(handle: str, line: int) -> None:
        if handle not in introduced:
            raise ScenarioError(line, f"proc {rank}: undefined handle '{handle}'")
        if handle in waited:
            raise ScenarioError(line, f"proc {rank}: handle '{handle}' waited twice")
        waited.add(handle)

    for st in script:
        if isinstance(st, (ISend, IRecv)):
            if st.handle in introduced:
                raise ScenarioError(
                    st.line, f"proc {rank}: duplicate handle '{st.handle}'"
                )
            introduced.add(st.handle)
        elif isinstance(st, Wait):
            wait_one(st.handle, st.line)
        elif isinstance(st, WaitAll):
            if not st.handles:
                raise ScenarioError(st.line, f"proc {rank}: waitall needs handles")
            for h in st.handles:
                wait_one(h, st.line)


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    """Parse scenario source text.

    Raises :class:`ScenarioError` with a line number on malformed input,
    undefined or reused handles, and negative lengths.  Out-of-range
    partner ranks are not errors; see :func:`validate`.
    """
    process_count: int | None = None
    scripts: dict[int, list[Statement]] = {}
    current: list[Statement] | None = None
    sendrecv_seen = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        code = raw.split("#", 1)[0].strip()
        if not code:
            continue
        if process_count is None:
            p = _LineParser(code.split(), lineno)
            p.keyword("processes")
            n = p.integer("process count")
            p.done()
            if n < 1:
                raise ScenarioError(lineno, "process count must be >= 1")
            process_count = n
            continue
        m = _PROC_RE.match(code)
        if m:
            rank = int(m.group(1))
            if rank >= process_count:
                raise ScenarioError(
                    lineno, f"proc {rank} out of range for {process_count} processes"
                )
            if rank in scripts:
                raise ScenarioError(lineno, f"duplicate section for proc {rank}")
            current = scripts.setdefault(rank, [])
            sendrecv_seen = 0
            continue
        if current is None:
            raise ScenarioError(lineno, "statement before any 'proc <r>:' section")
        stmts = _parse_statement(_LineParser(code.split(), lineno), sendrecv_seen)
        if len(stmts) == 3:
            sendrecv_seen += 1
        current.extend(stmts)

    if process_count is None:
        raise ScenarioError(1, "missing 'processes <N>' header")
    for rank, script in scripts.items():
        _check_handles(script, rank)
    return Scenario(
        process_count,
        tuple(tuple(scripts.get(r, [])) for r in range(process_count)),
        name=name,
    )


def validate(s: Scenario) -> list[str]:
    """Warnings for statically visible fault injections.

    Scenarios that warn still run; these faults are meant to be injectable.
    Flags out-of-range partner and root ranks and collective calls whose
    roots disagree across ranks.
    """
    warnings: list[str] = []

    def check_rank(rank: int, st: Statement, value: int | str, role: str) -> None:
        if value == ANY:
            return
        if not 0 <= int(value) < s.process_count:
            warnings.append(
                f"proc {rank} line {st.line}: {role} rank {value} out of range"
            )

    for rank, script in enumerate(s.scripts):
        for st in script:
            if isinstance(st, (Send, ISend)):
                check_rank(rank, st, st.dst, "destination")
            elif isinstance(st, (Recv, IRecv)):
                check_rank(rank, st, st.src, "source")
            elif isinstance(st, (Bcast, Gather)):
                check_rank(rank, st, st.root, "root")

    for op_type, label in ((Bcast, "bcast"), (Gather, "gather")):
        per_rank = [
            [st for st in script if isinstance(st, op_type)] for script in s.scripts
        ]
        depth = max((len(calls) for calls in per_rank), default=0)
        for i in range(depth):
            roots = {calls[i].root for calls in per_rank if len(calls) > i}
            if len(roots) > 1:
                warnings.append(
                    f"{label} call {i}: inconsistent roots {sorted(roots)}"
                )
    return warnings


def _print_statement(st: Statement) -> str:
    if isinstance(st, Send):
        return f"{st.routine} to {st.dst} tag {st.tag} len {st.length}"
    if isinstance(st, Recv):
        return f"recv from {st.src} tag {st.tag} len {st.length}"
    if isinstance(st, ISend):
        return f"isend to {st.dst} tag {st.tag} len {st.length} handle {st.handle}"
    if isinstance(st, IRecv):
        return f"irecv from {st.src} tag {st.tag} len {st.length} handle {st.handle}"
    if isinstance(st, Wait):
        return f"wait {st.handle}"
    if isinstance(st, WaitAll):
        return "waitall " + " ".join(st.handles)
    if isinstance(st, Compute):
        return f"compute {st.duration}"
    if isinstance(st, Crash):
        return "crash"
    if isinstance(st, Bcast):
        return f"bcast root {st.root} len {st.length}"
    if isinstance(st, Gather):
        return f"gather root {st.root} len {st.length}"
    raise TypeError(f"unknown statement {st!r}")


def print_scenario(s: Scenario) -> str:
    """Canonical text for ``s``; ``parse_scenario`` inverts it exactly.

    Desugared ``sendrecv`` triples are folded back into single lines.
    """
    lines = [f"processes {s.process_count}"]
    for rank, script in enumerate(s.scripts):
        lines.append(f"proc {rank}:")
        i = 0
        while i < len(script):
            st = script[i]
            if (
                isinstance(st, ISend)
                and st.routine == "sendrecv"
                and i + 2 < len(script)
                and isinstance(script[i + 1], IRecv)
                and isinstance(script[i + 2], WaitAll)
                and script[i + 1].routine == "sendrecv"
                and script[i + 2].routine == "sendrecv"
                and script[i + 2].handles == (st.handle, script[i + 1].handle)
            ):
                rcv = script[i + 1]
                lines.append(
                    f"    sendrecv to {st.dst} stag {st.tag} slen {st.length} "
                    f"from {rcv.src} rtag {rcv.tag} rlen {rcv.length}"
                )
                i += 3
                continue
            lines.append("    " + _print_statement(st))
            i += 1
    return "\n".join(lines) + "\n"

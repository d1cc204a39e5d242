"""Command line front end.

Four subcommands cover the whole pipeline: ``run`` executes a scenario
and writes a trace, ``localize`` prints a fault report for a trace,
``view`` exports a reduced subgraph as a new trace file, and ``serve``
exposes a trace plus its localization over HTTP for the browser viewer.

Exit codes: 0 for a normal run, 2 when `run` detected a failure (the
trace is still written), 1 for usage errors such as unreadable input.
"""

from __future__ import annotations

import argparse
import json
import mimetypes
import os
import sys
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import NoReturn
from urllib.parse import parse_qs, urlparse

from .event_graph import EventGraph, GraphError
from .localizer import LocalizationReport, localize
from .runtime import SimConfig, run
from .scenario import ScenarioError, parse_scenario, validate
from .trace_io import (
    TraceError,
    TraceMeta,
    dumps_trace,
    event_numbers,
    read_trace,
    trace_document,
    write_trace,
)

TIMEOUT_ENV = "MPPD_TIMEOUT_TICKS"

# Slotted dataclass: defaults are not reachable as class attributes.
_DEFAULTS = SimConfig()

_PLACEHOLDER_PAGE = """<!doctype html>
<html>
<head><meta charset="utf-8"><title>mppd</title></head>
<body>
<h1>mppd trace server</h1>
<p>No viewer assets were found. The API is fully usable without them:</p>
<ul>
<li><a href="/api/trace">/api/trace</a></li>
<li><a href="/api/localization">/api/localization</a></li>
<li><a href="/api/view?mode=default">/api/view?mode=&amp;ranks=&amp;related=</a></li>
</ul>
</body>
</html>
"""


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract reserves 2 for
    detected failures, so usage problems are remapped to 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


# -- report serialization ----------------------------------------------


def report_document(report: LocalizationReport, graph: EventGraph) -> dict:
    """The localization report as one JSON-ready object.

    Events are referenced by their trace numbers so the document can be
    joined against the trace itself.
    """
    numbers = event_numbers(graph)
    return {
        "faulty": sorted(report.faulty),
        "failure_events": {
            str(rank): (None if eid is None else numbers[eid])
            for rank, eid in sorted(report.failure_events.items())
        },
        "groups": [
            {
                "ranks": sorted(g.ranks),
                "situation": g.situation.value,
                "evidence": sorted(numbers[e] for e in g.evidence),
            }
            for g in report.groups
        ],
        "unlocalizable": report.unlocalizable,
        "reason": report.reason,
        "diagnostics": list(report.diagnostics),
    }


def format_report(report: LocalizationReport, graph: EventGraph) -> str:
    """Human-readable rendering of a localization report."""
    if report.unlocalizable:
        lines = [f"unlocalizable: {report.reason}"]
        lines += [f"  {d}" for d in report.diagnostics]
        return "\n".join(lines) + "\n"

    numbers = event_numbers(graph)
    if not report.faulty:
        return "no faulty processes\n"

    lines = ["faulty processes: " + ", ".join(str(r) for r in sorted(report.faulty))]
    for group in report.groups:
        ranks = ", ".join(str(r) for r in sorted(group.ranks))
        events = ", ".join(str(n) for n in sorted(numbers[e] for e in group.evidence))
        line = f"group: ranks {ranks}; situation {group.situation.value}"
        if events:
            line += f"; events {events}"
        lines.append(line)

    lines.append("failure events:")
    for rank, eid in sorted(report.failure_events.items()):
        if eid is not None:
            ev = graph.event(eid)
            lines.append(
                f"  rank {rank}: event {numbers[eid]}, {ev.routine}"
                f" at {ev.source_file}:{ev.source_line} ({ev.reason})"
            )
        elif rank in report.faulty:
            lines.append(f"  rank {rank}: no failure event recorded")

    if report.diagnostics:
        lines.append("diagnostics:")
        lines += [f"  {d}" for d in report.diagnostics]
    return "\n".join(lines) + "\n"


# -- shared helpers -----------------------------------------------------


def _load_trace(path: str) -> "tuple[EventGraph, TraceMeta]":
    try:
        return read_trace(path)
    except FileNotFoundError:
        raise _CliError(f"no such file: {path}")
    except (TraceError, GraphError) as exc:
        raise _CliError(f"{path}: {exc}")
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}")


class _CliError(Exception):
    """Carries a user-facing message up to the subcommand boundary."""


def _parse_ranks(text: str) -> set[int]:
    ranks: set[int] = set()
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            raise _CliError(f"bad rank list {text!r}")
        try:
            rank = int(piece)
        except ValueError:
            raise _CliError(f"bad rank list {text!r}: {piece!r} is not an integer")
        if rank < 0:
            raise _CliError(f"bad rank list {text!r}: rank {rank} is negative")
        ranks.add(rank)
    return ranks


def _select_view(
    graph: EventGraph, mode: str, ranks: set[int] | None, related: bool
) -> EventGraph:
    if mode == "default":
        return graph.default_view()
    if mode == "all":
        return graph
    if mode in ("ranks", "custom"):
        if not ranks:
            raise _CliError("mode 'ranks' needs a non-empty rank list")
        try:
            return graph.isolate_processes(ranks, include_related=related)
        except GraphError as exc:
            raise _CliError(str(exc))
    raise _CliError(f"unknown mode {mode!r}")


def _localize_trace(graph: EventGraph, meta: TraceMeta) -> LocalizationReport:
    return localize(
        set(range(graph.process_count)),
        graph,
        terminated_abnormally=meta.terminated_abnormally,
    )


# -- subcommands --------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    try:
        text = Path(args.scenario).read_text(encoding="utf-8")
    except FileNotFoundError:
        return _fail(f"no such file: {args.scenario}")
    except OSError as exc:
        return _fail(f"cannot read {args.scenario}: {exc}")

    try:
        scenario = parse_scenario(text, name=Path(args.scenario).stem)
    except ScenarioError as exc:
        return _fail(f"{args.scenario}: {exc}")

    for warning in validate(scenario):
        print(f"warning: {warning}", file=sys.stderr)

    timeout = args.timeout_ticks
    if timeout is None:
        raw = os.environ.get(TIMEOUT_ENV)
        if raw is not None:
            try:
                timeout = int(raw)
            except ValueError:
                return _fail(f"{TIMEOUT_ENV} must be an integer, got {raw!r}")
    if timeout is None:
        timeout = _DEFAULTS.timeout_ticks

    try:
        config = SimConfig(
            timeout_ticks=timeout,
            seed=args.seed,
            buffer_capacity_events=args.buffer_capacity,
            eager_threshold=args.eager_threshold,
            silent_crash=args.silent_crash,
        )
    except ValueError as exc:
        return _fail(str(exc))

    outcome = run(scenario, config)

    trace_path = args.trace
    if trace_path is None:
        trace_path = str(Path(args.scenario).with_suffix(".trace"))
    try:
        write_trace(outcome.graph, outcome, trace_path)
    except OSError as exc:
        return _fail(f"cannot write {trace_path}: {exc}")

    count = len(outcome.graph.events())
    print(f"wrote {trace_path} ({count} events, final tick {outcome.final_tick})")
    if outcome.terminated_abnormally:
        aborted = ", ".join(str(r) for r in sorted(outcome.aborted_ranks))
        print(f"failure detected; aborted ranks: {aborted or 'none'}")
        return 2
    return 0


def cmd_localize(args: argparse.Namespace) -> int:
    try:
        graph, meta = _load_trace(args.trace)
    except _CliError as exc:
        return _fail(str(exc))

    report = _localize_trace(graph, meta)
    if args.format == "json":
        print(json.dumps(report_document(report, graph), indent=2))
    else:
        sys.stdout.write(format_report(report, graph))
    return 0


def cmd_view(args: argparse.Namespace) -> int:
    try:
        graph, meta = _load_trace(args.trace)
        ranks = _parse_ranks(args.ranks) if args.ranks is not None else None
        if args.mode == "ranks" and ranks is None:
            raise _CliError("mode 'ranks' needs --ranks")
        if ranks is not None and args.mode != "ranks":
            raise _CliError("--ranks only applies to --mode ranks")
        subgraph = _select_view(graph, args.mode, ranks, args.related)
    except _CliError as exc:
        return _fail(str(exc))

    out_path = args.out
    if out_path is None:
        out_path = str(Path(args.trace).with_suffix(".view.trace"))
    try:
        write_trace(subgraph, meta, out_path)
    except OSError as exc:
        return _fail(f"cannot write {out_path}: {exc}")
    print(f"wrote {out_path} ({len(subgraph.events())} events)")
    return 0


# -- HTTP server ---------------------------------------------------------


class TraceServer(ThreadingHTTPServer):
    """Immutable loaded trace shared by all request threads."""

    daemon_threads = True

    def __init__(
        self,
        address: tuple[str, int],
        graph: EventGraph,
        meta: TraceMeta,
        assets_dir: Path | None,
    ) -> None:
        super().__init__(address, _Handler)
        self.graph = graph
        self.meta = meta
        self.assets_dir = assets_dir
        self.trace_doc = trace_document(graph, meta)
        self.report_doc = report_document(_localize_trace(graph, meta), graph)


class _Handler(BaseHTTPRequestHandler):
    server: TraceServer

    def log_message(self, format: str, *args) -> None:
        pass

    def _send_json(self, payload: dict, status: HTTPStatus = HTTPStatus.OK) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_page(self, body: bytes, content_type: str) -> None:
        self.send_response(HTTPStatus.OK)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _api_view(self, query: dict[str, list[str]]) -> None:
        mode = query.get("mode", ["default"])[0] or "default"
        ranks_raw = query.get("ranks", [""])[0]
        related = query.get("related", [""])[0].lower() in ("1", "true", "yes", "on")
        try:
            ranks = _parse_ranks(ranks_raw) if ranks_raw else None
            subgraph = _select_view(self.server.graph, mode, ranks, related)
        except _CliError as exc:
            self._send_json({"error": str(exc)}, HTTPStatus.BAD_REQUEST)
            return
        self._send_json(trace_document(subgraph, self.server.meta))

    def _static(self, path: str) -> None:
        rel = path.lstrip("/") or "index.html"
        base = self.server.assets_dir
        if base is not None and base.is_dir():
            candidate = (base / rel).resolve()
            root = base.resolve()
            inside = candidate == root or root in candidate.parents
            if inside and candidate.is_file():
                ctype = mimetypes.guess_type(candidate.name)[0] or "application/octet-stream"
                self._send_page(candidate.read_bytes(), ctype)
                return
        if rel == "index.html":
            self._send_page(_PLACEHOLDER_PAGE.encode("utf-8"), "text/html; charset=utf-8")
            return
        self._send_json({"error": "not found"}, HTTPStatus.NOT_FOUND)

    def do_GET(self) -> None:
        parsed = urlparse(self.path)
        if parsed.path == "/api/trace":
            self._send_json(self.server.trace_doc)
        elif parsed.path == "/api/localization":
            self._send_json(self.server.report_doc)
        elif parsed.path == "/api/view":
            self._api_view(parse_qs(parsed.query))
        elif parsed.path.startswith("/api/"):
            self._send_json({"error": "not found"}, HTTPStatus.NOT_FOUND)
        else:
            self._static(parsed.path)


def build_server(
    trace_path: str, host: str, port: int, assets_dir: str | None
) -> TraceServer:
    """Load ``trace_path`` and return a ready (not yet serving) server."""
    graph, meta = _load_trace(trace_path)
    assets = Path(assets_dir) if assets_dir is not None else None
    return TraceServer((host, port), graph, meta, assets)


def cmd_serve(args: argparse.Namespace) -> int:
    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        return _fail(f"bad bind address {args.bind!r}, expected HOST:PORT")
    try:
        server = build_server(args.trace, host, int(port_text), args.assets)
    except _CliError as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(f"cannot bind {args.bind}: {exc}")

    actual = server.server_address
    print(f"serving on http://{actual[0]}:{actual[1]}/ (Ctrl-C to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# -- argument parsing ----------------------------------------------------


def build_arg_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mppd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and write a trace")
    p_run.add_argument("scenario", help="scenario file to execute")
    p_run.add_argument("--trace", "-o", default=None, help="trace output path")
    p_run.add_argument(
        "--timeout-ticks",
        type=int,
        default=None,
        help=f"detector timeout (overrides ${TIMEOUT_ENV})",
    )
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument(
        "--eager-threshold",
        type=int,
        default=_DEFAULTS.eager_threshold,
        help="max standard-send length delivered eagerly",
    )
    p_run.add_argument(
        "--buffer-capacity",
        type=int,
        default=None,
        help="per-manager event capacity (default: unlimited)",
    )
    p_run.add_argument(
        "--silent-crash",
        action="store_true",
        help="crashes kill the detector too, leaving no failure record",
    )
    p_run.set_defaults(func=cmd_run)

    p_loc = sub.add_parser("localize", help="print a fault report for a trace")
    p_loc.add_argument("trace", help="trace file to analyze")
    p_loc.add_argument("--format", choices=("text", "json"), default="text")
    p_loc.set_defaults(func=cmd_localize)

    p_view = sub.add_parser("view", help="export a reduced view of a trace")
    p_view.add_argument("trace", help="trace file to slice")
    p_view.add_argument("--mode", choices=("default", "all", "ranks"), default="default")
    p_view.add_argument("--ranks", default=None, help="comma-separated ranks for --mode ranks")
    p_view.add_argument(
        "--related",
        action="store_true",
        help="with --mode ranks, also keep one-hop communication partners",
    )
    p_view.add_argument("--out", default=None, help="output trace path")
    p_view.set_defaults(func=cmd_view)

    p_serve = sub.add_parser("serve", help="serve a trace and viewer over HTTP")
    p_serve.add_argument("trace", help="trace file to serve")
    p_serve.add_argument("--bind", default="127.0.0.1:8000", help="HOST:PORT to listen on")
    p_serve.add_argument(
        "--assets",
        default=os.path.join("frontend", "dist"),
        help="directory with viewer assets (placeholder page if absent)",
    )
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

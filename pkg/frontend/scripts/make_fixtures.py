#!/usr/bin/env python3
"""Regenerate the committed API fixtures.

Each canonical scenario is executed with the mppd CLI, the resulting
trace is served with ``mppd serve``, and the exact HTTP response bodies
are stored under tests/fixtures/. The viewer's conformance tests compare
rendered output against these bodies, so they must be real responses,
not hand-written approximations. Traces are deterministic; rerunning
this script leaves unchanged fixtures untouched.

Requires the mppd package to be installed (``pip install -e ..``).
"""

from __future__ import annotations

import json
import os
import re
import subprocess
import sys
import tempfile
import urllib.request
from pathlib import Path

HERE = Path(__file__).resolve().parent
FIXTURES = HERE.parent / "tests" / "fixtures"
TIMEOUT_TICKS = "12"

CRASH_CHAIN = """\
processes 4
proc 0:
    recv from 1 tag 0 len 4
proc 1:
    recv from 2 tag 0 len 4
proc 2:
    recv from 3 tag 0 len 4
proc 3:
    crash
"""

MISSING_RECV = """\
processes 4
proc 0:
    ssend to 1 tag 0 len 4
proc 1:
    recv from 0 tag 0 len 4
proc 2:
    compute 1
proc 3:
    ssend to 2 tag 5 len 4
"""

CYCLE_THREE = """\
processes 4
proc 0:
    compute 2
proc 1:
    ssend to 2 tag 0 len 4
    recv from 3 tag 0 len 4
proc 2:
    ssend to 3 tag 0 len 4
    recv from 1 tag 0 len 4
proc 3:
    ssend to 1 tag 0 len 4
    recv from 2 tag 0 len 4
"""

TRUNCATED_PAIR = """\
processes 4
proc 0:
    ssend to 1 tag 0 len 4
proc 1:
    recv from 0 tag 0 len 4
proc 2:
    ssend to 3 tag 0 len 8
proc 3:
    recv from 2 tag 0 len 4
"""

# Rank 2 talks to rank 1 successfully before hanging on rank 3, so the
# related toggle has a one-hop communicator to add.
RELATED_PAIR = """\
processes 4
proc 0:
    compute 1
proc 1:
    recv from 2 tag 0 len 4
proc 2:
    ssend to 1 tag 0 len 4
    ssend to 3 tag 1 len 4
proc 3:
    compute 1
"""

# name -> (scenario text, expected faulty ranks, expected situation)
SCENARIOS = {
    "crash_chain": (CRASH_CHAIN, [3], "CalculationFault"),
    "missing_recv": (MISSING_RECV, [2, 3], "NonOccurredEvent"),
    "cycle_three": (CYCLE_THREE, [1, 2, 3], "Deadlock"),
    "truncated_pair": (TRUNCATED_PAIR, [2, 3], "BufferOverflow"),
    "related_pair": (RELATED_PAIR, [2, 3], "NonOccurredEvent"),
}

BANNER = re.compile(r"http://([\d.]+):(\d+)/")


def fetch(port: int, path: str) -> bytes:
    with urllib.request.urlopen(f"http://127.0.0.1:{port}{path}") as resp:
        return resp.read()


def run_scenario(workdir: Path, name: str, text: str) -> Path:
    scenario = workdir / f"{name}.scn"
    scenario.write_text(text, encoding="utf-8")
    trace = workdir / f"{name}.trace"
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "mppd.cli",
            "run",
            str(scenario),
            "--trace",
            str(trace),
            "--timeout-ticks",
            TIMEOUT_TICKS,
        ],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 2:
        raise SystemExit(
            f"{name}: expected a detected failure (exit 2), got "
            f"{proc.returncode}: {proc.stderr}"
        )
    return trace


def with_server(trace: Path):
    env = dict(os.environ, PYTHONUNBUFFERED="1")
    proc = subprocess.Popen(
        [sys.executable, "-m", "mppd.cli", "serve", str(trace), "--bind", "127.0.0.1:0"],
        stdout=subprocess.PIPE,
        text=True,
        env=env,
    )
    assert proc.stdout is not None
    banner = proc.stdout.readline()
    match = BANNER.search(banner)
    if not match:
        proc.kill()
        raise SystemExit(f"serve did not report its address: {banner!r}")
    return proc, int(match.group(2))


def check_report(name: str, body: bytes, faulty: list[int], situation: str) -> None:
    report = json.loads(body)
    if report["faulty"] != faulty:
        raise SystemExit(f"{name}: faulty {report['faulty']}, expected {faulty}")
    situations = {g["situation"] for g in report["groups"]}
    if situations != {situation}:
        raise SystemExit(f"{name}: situations {situations}, expected {situation}")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        for name, (text, faulty, situation) in SCENARIOS.items():
            trace = run_scenario(workdir, name, text)
            server, port = with_server(trace)
            try:
                ranks = ",".join(str(r) for r in faulty)
                bodies = {
                    "trace": fetch(port, "/api/trace"),
                    "localization": fetch(port, "/api/localization"),
                    "view.default": fetch(port, "/api/view?mode=default"),
                    "view.all": fetch(port, "/api/view?mode=all"),
                    "view.custom": fetch(port, f"/api/view?mode=custom&ranks={ranks}"),
                    "view.custom_related": fetch(
                        port, f"/api/view?mode=custom&ranks={ranks}&related=1"
                    ),
                }
            finally:
                server.terminate()
                server.wait()
            check_report(name, bodies["localization"], faulty, situation)
            for kind, body in bodies.items():
                (FIXTURES / f"{name}.{kind}.json").write_bytes(body)
            print(f"{name}: {len(bodies)} fixtures")


if __name__ == "__main__":
    main()

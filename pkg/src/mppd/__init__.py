"""Fault localization for message-passing programs.

Scenarios written in a small scripting language are executed on a
deterministic simulator whose per-rank managers detect isolation,
truncation and aborts at run time, producing an event graph that a
backtracking localizer then narrows to the faulty ranks.
"""

__version__ = "0.1.0"

from .event_graph import (
    ANY,
    Event,
    EventGraph,
    EventId,
    EventKind,
    GraphError,
    RelationKind,
)
from .localizer import FailureSituation, LocalizationReport, localize
from .runtime import RunOutcome, SimConfig, Simulator, run
from .scenario import Scenario, ScenarioError, parse_scenario, print_scenario, validate
from .trace_io import TraceError, TraceMeta, read_trace, write_trace

__all__ = [
    "ANY",
    "Event",
    "EventGraph",
    "EventId",
    "EventKind",
    "FailureSituation",
    "GraphError",
    "LocalizationReport",
    "RelationKind",
    "RunOutcome",
    "Scenario",
    "ScenarioError",
    "SimConfig",
    "Simulator",
    "TraceError",
    "TraceMeta",
    "__version__",
    "localize",
    "parse_scenario",
    "print_scenario",
    "read_trace",
    "run",
    "validate",
    "write_trace",
]

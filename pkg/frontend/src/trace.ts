/**
 * Trace document dialect as served by the mppd HTTP API.
 *
 * A document is {header, events, relations, outcome}; the same records a
 * trace file carries one per line. Parsing validates everything up front
 * so the renderer never sees a half-usable document: a malformed trace is
 * an error banner, not a partial scene.
 */

export type EventKind =
  | "send"
  | "recv"
  | "send_init"
  | "send_complete"
  | "recv_init"
  | "recv_complete"
  | "calc";

export type EventStatus = "success" | "failure";

export type FailureReason = "isolated" | "truncated" | "aborted";

export type RelationKind = "S" | "C" | "N";

export interface TraceHeader {
  format_version: number;
  scenario_name: string;
  process_count: number;
  timeout_ticks: number;
  generated_by: string;
}

export interface TraceEvent {
  no: number;
  rank: number;
  seq: number;
  kind: EventKind;
  routine: string;
  mode: string | null;
  tag: number | "any" | null;
  partner: number | "any" | null;
  len: number | null;
  file: string;
  line: number;
  time: number;
  status: EventStatus;
  reason: FailureReason | null;
  collective: [string, number] | null;
}

export interface TraceRelation {
  src: number;
  dst: number;
  kind: RelationKind;
}

export interface TraceOutcome {
  terminated_abnormally: boolean;
  aborted_ranks: number[];
  crash_outside_routines: number[];
  final_tick: number;
}

export interface TraceDocument {
  header: TraceHeader;
  events: TraceEvent[];
  relations: TraceRelation[];
  outcome: TraceOutcome;
}

export class TraceFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "TraceFormatError";
  }
}

const EVENT_KINDS = new Set<string>([
  "send",
  "recv",
  "send_init",
  "send_complete",
  "recv_init",
  "recv_complete",
  "calc",
]);

const REASONS = new Set<string>(["isolated", "truncated", "aborted"]);

const RELATION_KINDS = new Set<string>(["S", "C", "N"]);

function fail(path: string, expected: string): never {
  throw new TraceFormatError(`${path}: expected ${expected}`);
}

function asObject(value: unknown, path: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    fail(path, "an object");
  }
  return value as Record<string, unknown>;
}

function asNumber(value: unknown, path: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    fail(path, "a number");
  }
  return value;
}

function asString(value: unknown, path: string): string {
  if (typeof value !== "string") {
    fail(path, "a string");
  }
  return value;
}

function asBoolean(value: unknown, path: string): boolean {
  if (typeof value !== "boolean") {
    fail(path, "a boolean");
  }
  return value;
}

function asRankArray(value: unknown, path: string): number[] {
  if (!Array.isArray(value)) {
    fail(path, "an array of ranks");
  }
  return value.map((v, i) => asNumber(v, `${path}[${i}]`));
}

function numberOrAnyOrNull(
  value: unknown,
  path: string
): number | "any" | null {
  if (value === null || value === "any") {
    return value;
  }
  return asNumber(value, path);
}

function parseHeader(value: unknown): TraceHeader {
  const raw = asObject(value, "header");
  return {
    format_version: asNumber(raw.format_version, "header.format_version"),
    scenario_name: asString(raw.scenario_name, "header.scenario_name"),
    process_count: asNumber(raw.process_count, "header.process_count"),
    timeout_ticks: asNumber(raw.timeout_ticks, "header.timeout_ticks"),
    generated_by: asString(raw.generated_by, "header.generated_by"),
  };
}

function parseEvent(value: unknown, index: number): TraceEvent {
  const path = `events[${index}]`;
  const raw = asObject(value, path);
  const kind = asString(raw.kind, `${path}.kind`);
  if (!EVENT_KINDS.has(kind)) {
    fail(`${path}.kind`, "a known event kind");
  }
  const status = asString(raw.status, `${path}.status`);
  if (status !== "success" && status !== "failure") {
    fail(`${path}.status`, '"success" or "failure"');
  }
  let reason: FailureReason | null = null;
  if (raw.reason !== null) {
    const text = asString(raw.reason, `${path}.reason`);
    if (!REASONS.has(text)) {
      fail(`${path}.reason`, "a known failure reason");
    }
    reason = text as FailureReason;
  }
  if (status === "failure" && reason === null) {
    fail(`${path}.reason`, "a reason on a failure event");
  }
  let collective: [string, number] | null = null;
  if (raw.collective !== null && raw.collective !== undefined) {
    if (!Array.isArray(raw.collective) || raw.collective.length !== 2) {
      fail(`${path}.collective`, "[operation, root] or null");
    }
    collective = [
      asString(raw.collective[0], `${path}.collective[0]`),
      asNumber(raw.collective[1], `${path}.collective[1]`),
    ];
  }
  return {
    no: asNumber(raw.no, `${path}.no`),
    rank: asNumber(raw.rank, `${path}.rank`),
    seq: asNumber(raw.seq, `${path}.seq`),
    kind: kind as EventKind,
    routine: asString(raw.routine, `${path}.routine`),
    mode: raw.mode === null ? null : asString(raw.mode, `${path}.mode`),
    tag: numberOrAnyOrNull(raw.tag, `${path}.tag`),
    partner: numberOrAnyOrNull(raw.partner, `${path}.partner`),
    len: raw.len === null ? null : asNumber(raw.len, `${path}.len`),
    file: asString(raw.file, `${path}.file`),
    line: asNumber(raw.line, `${path}.line`),
    time: asNumber(raw.time, `${path}.time`),
    status,
    reason,
    collective,
  };
}

function parseRelation(value: unknown, index: number): TraceRelation {
  const path = `relations[${index}]`;
  const raw = asObject(value, path);
  if (!Array.isArray(raw.rel) || raw.rel.length !== 2) {
    fail(`${path}.rel`, "[src, dst]");
  }
  const kind = asString(raw.kind, `${path}.kind`);
  if (!RELATION_KINDS.has(kind)) {
    fail(`${path}.kind`, '"S", "C", or "N"');
  }
  return {
    src: asNumber(raw.rel[0], `${path}.rel[0]`),
    dst: asNumber(raw.rel[1], `${path}.rel[1]`),
    kind: kind as RelationKind,
  };
}

function parseOutcome(value: unknown): TraceOutcome {
  const raw = asObject(value, "outcome");
  return {
    terminated_abnormally: asBoolean(
      raw.terminated_abnormally,
      "outcome.terminated_abnormally"
    ),
    aborted_ranks: asRankArray(raw.aborted_ranks, "outcome.aborted_ranks"),
    crash_outside_routines: asRankArray(
      raw.crash_outside_routines,
      "outcome.crash_outside_routines"
    ),
    final_tick: asNumber(raw.final_tick, "outcome.final_tick"),
  };
}

/**
 * Validate a raw JSON value into a TraceDocument.
 *
 * Throws TraceFormatError on any structural defect: unknown enum values,
 * duplicate event numbers, or a relation pointing at an event the
 * document does not contain.
 */
export function parseTraceDocument(raw: unknown): TraceDocument {
  const doc = asObject(raw, "document");
  const header = parseHeader(doc.header);
  if (!Array.isArray(doc.events)) {
    fail("events", "an array");
  }
  const events = doc.events.map(parseEvent);
  const seen = new Set<number>();
  for (const ev of events) {
    if (seen.has(ev.no)) {
      throw new TraceFormatError(`events: duplicate event number ${ev.no}`);
    }
    seen.add(ev.no);
  }
  if (!Array.isArray(doc.relations)) {
    fail("relations", "an array");
  }
  const relations = doc.relations.map(parseRelation);
  for (const rel of relations) {
    if (!seen.has(rel.src) || !seen.has(rel.dst)) {
      throw new TraceFormatError(
        `relations: ${rel.kind} edge ${rel.src}->${rel.dst} references a missing event`
      );
    }
  }
  const outcome = parseOutcome(doc.outcome);
  return { header, events, relations, outcome };
}

/** Map event numbers to their records. */
export function eventsByNumber(doc: TraceDocument): Map<number, TraceEvent> {
  return new Map(doc.events.map((ev) => [ev.no, ev]));
}

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  eventsByNumber,
  parseTraceDocument,
  TraceFormatError,
} from "../src/trace.js";

const FIXTURES = join(__dirname, "fixtures");

function fixture(name: string): unknown {
  return JSON.parse(readFileSync(join(FIXTURES, name), "utf-8"));
}

function validDocument(): Record<string, unknown> {
  return fixture("cycle_three.trace.json") as Record<string, unknown>;
}

describe("parseTraceDocument", () => {
  it("accepts every committed fixture", () => {
    for (const name of [
      "crash_chain",
      "missing_recv",
      "cycle_three",
      "truncated_pair",
      "related_pair",
    ]) {
      for (const kind of ["trace", "view.default", "view.all", "view.custom"]) {
        const doc = parseTraceDocument(fixture(`${name}.${kind}.json`));
        expect(doc.header.process_count).toBe(4);
      }
    }
  });

  it("reads events, relations, and the outcome", () => {
    const doc = parseTraceDocument(validDocument());
    expect(doc.events.length).toBe(4);
    expect(doc.outcome.terminated_abnormally).toBe(true);
    expect(doc.relations.every((r) => ["S", "C", "N"].includes(r.kind))).toBe(
      true
    );
    const byNo = eventsByNumber(doc);
    expect(byNo.get(1)?.rank).toBeDefined();
  });

  it("rejects a non-object document", () => {
    expect(() => parseTraceDocument([])).toThrow(TraceFormatError);
    expect(() => parseTraceDocument(null)).toThrow(TraceFormatError);
    expect(() => parseTraceDocument("trace")).toThrow(TraceFormatError);
  });

  it("rejects a missing header field", () => {
    const doc = validDocument();
    const header = { ...(doc.header as Record<string, unknown>) };
    delete header.process_count;
    expect(() => parseTraceDocument({ ...doc, header })).toThrow(
      /header\.process_count/
    );
  });

  it("rejects an unknown event kind", () => {
    const doc = validDocument();
    const events = (doc.events as Record<string, unknown>[]).map((e) => ({
      ...e,
    }));
    events[0].kind = "teleport";
    expect(() => parseTraceDocument({ ...doc, events })).toThrow(
      /events\[0\]\.kind/
    );
  });

  it("rejects a failure event without a reason", () => {
    const doc = validDocument();
    const events = (doc.events as Record<string, unknown>[]).map((e) => ({
      ...e,
    }));
    const failed = events.findIndex((e) => e.status === "failure");
    events[failed].reason = null;
    expect(() => parseTraceDocument({ ...doc, events })).toThrow(
      TraceFormatError
    );
  });

  it("rejects duplicate event numbers", () => {
    const doc = validDocument();
    const events = (doc.events as Record<string, unknown>[]).map((e) => ({
      ...e,
    }));
    events[1].no = events[0].no;
    expect(() => parseTraceDocument({ ...doc, events })).toThrow(/duplicate/);
  });

  it("rejects a relation to a missing event", () => {
    const doc = validDocument();
    const relations = [
      ...(doc.relations as unknown[]),
      { rel: [1, 999], kind: "C" },
    ];
    expect(() => parseTraceDocument({ ...doc, relations })).toThrow(
      /missing event/
    );
  });

  it("rejects an unknown relation kind", () => {
    const doc = validDocument();
    const relations = [{ rel: [1, 2], kind: "Z" }];
    expect(() => parseTraceDocument({ ...doc, relations })).toThrow(
      /relations\[0\]\.kind/
    );
  });

  it("accepts wildcard partner and tag", () => {
    const doc = validDocument();
    const events = (doc.events as Record<string, unknown>[]).map((e) => ({
      ...e,
    }));
    events[0].partner = "any";
    events[0].tag = "any";
    const parsed = parseTraceDocument({ ...doc, events });
    expect(parsed.events[0].partner).toBe("any");
    expect(parsed.events[0].tag).toBe("any");
  });
});

/**
 * Conformance against the committed API responses: what the viewer
 * draws is exactly what /api/view returned, for every canonical trace
 * and every view mode, and the isolation toggles only ever narrow a
 * view. Fixtures are real HTTP response bodies captured by
 * scripts/make_fixtures.py.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { beforeEach, describe, expect, it } from "vitest";

import { dialogRows } from "../src/dialog.js";
import { drawnEventNumbers, renderFromRaw } from "../src/render.js";
import { parseTraceDocument, type TraceDocument } from "../src/trace.js";

const CANONICAL = [
  "crash_chain",
  "missing_recv",
  "cycle_three",
  "truncated_pair",
] as const;

const MODES = ["default", "all", "custom", "custom_related"] as const;

function raw(name: string): unknown {
  return JSON.parse(readFileSync(join(__dirname, "fixtures", name), "utf-8"));
}

function drawn(host: HTMLElement, name: string, mode: string): Set<number> {
  const payload = raw(`${name}.view.${mode}.json`);
  const doc = renderFromRaw(host, payload, raw(`${name}.localization.json`));
  expect(doc).not.toBeNull();
  return new Set(drawnEventNumbers(host));
}

function responseEvents(name: string, mode: string): Set<number> {
  const doc = parseTraceDocument(raw(`${name}.view.${mode}.json`));
  return new Set(doc.events.map((e) => e.no));
}

/**
 * Event numbers are per-document (each reduced view numbers its own
 * events from 1), so cross-view comparisons go through the stable
 * (rank, seq) identity instead.
 */
function drawnIdentities(
  host: HTMLElement,
  name: string,
  mode: string
): Set<string> {
  const payload = raw(`${name}.view.${mode}.json`);
  const doc = renderFromRaw(host, payload, raw(`${name}.localization.json`));
  expect(doc).not.toBeNull();
  const byNo = new Map(doc!.events.map((e) => [e.no, e]));
  return new Set(
    drawnEventNumbers(host).map((no) => {
      const ev = byNo.get(no)!;
      return `${ev.rank}:${ev.seq}`;
    })
  );
}

let host: HTMLElement;

beforeEach(() => {
  document.body.replaceChildren();
  host = document.createElement("div");
  document.body.append(host);
});

describe("drawn set equals the /api/view response", () => {
  for (const name of CANONICAL) {
    it(name, () => {
      for (const mode of MODES) {
        expect(drawn(host, name, mode)).toEqual(responseEvents(name, mode));
      }
    });
  }
});

describe("isolation subset chain: custom is within custom+related is within all", () => {
  for (const name of [...CANONICAL, "related_pair"]) {
    it(name, () => {
      const custom = drawnIdentities(host, name, "custom");
      const related = drawnIdentities(host, name, "custom_related");
      const all = drawnIdentities(host, name, "all");
      for (const id of custom) {
        expect(related.has(id)).toBe(true);
      }
      for (const id of related) {
        expect(all.has(id)).toBe(true);
      }
    });
  }

  it("the related toggle genuinely adds a one-hop communicator", () => {
    const custom = drawnIdentities(host, "related_pair", "custom");
    const related = drawnIdentities(host, "related_pair", "custom_related");
    const all = drawnIdentities(host, "related_pair", "all");
    expect(related.size).toBeGreaterThan(custom.size);
    expect(all.size).toBeGreaterThan(related.size);
  });
});

describe("dialog content for canonical failure events", () => {
  for (const name of CANONICAL) {
    it(name, () => {
      const doc: TraceDocument = parseTraceDocument(raw(`${name}.view.all.json`));
      for (const ev of doc.events.filter((e) => e.status === "failure")) {
        const rows = dialogRows(ev);
        const byLabel = new Map(rows.map((r) => [r.label, r.value]));
        expect(byLabel.get("event")).toBe(String(ev.no));
        expect(byLabel.get("rank")).toBe(String(ev.rank));
        expect(byLabel.get("source")).toBe(`${ev.file}:${ev.line}`);
        expect(byLabel.get("routine")).toContain(ev.routine);
        expect(byLabel.get("error reason")).toBe(ev.reason);
      }
    });
  }
});

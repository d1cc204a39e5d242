import { readFileSync } from "node:fs";
import { join } from "node:path";
import { beforeEach, describe, expect, it } from "vitest";

import { openDialogEvent } from "../src/dialog.js";
import {
  drawnEventNumbers,
  renderError,
  renderFromRaw,
  renderTimeline,
} from "../src/render.js";
import { parseReport, type LocalizationReport } from "../src/report.js";
import { parseTraceDocument, type TraceDocument } from "../src/trace.js";

function raw(name: string): unknown {
  return JSON.parse(readFileSync(join(__dirname, "fixtures", name), "utf-8"));
}

function fixture(name: string): TraceDocument {
  return parseTraceDocument(raw(name));
}

function report(name: string): LocalizationReport {
  return parseReport(raw(name));
}

function click(el: Element): void {
  el.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}

let host: HTMLElement;

beforeEach(() => {
  document.body.replaceChildren();
  host = document.createElement("div");
  document.body.append(host);
});

describe("renderTimeline", () => {
  it("draws exactly the document's events", () => {
    const doc = fixture("cycle_three.view.all.json");
    renderTimeline(host, doc, null);
    expect(drawnEventNumbers(host).sort((a, b) => a - b)).toEqual(
      doc.events.map((e) => e.no).sort((a, b) => a - b)
    );
  });

  it("shows faulty ranks and the situation in the summary panel", () => {
    renderTimeline(
      host,
      fixture("cycle_three.view.default.json"),
      report("cycle_three.localization.json")
    );
    const summary = host.querySelector(".summary")!;
    expect(summary.textContent).toContain("faulty processes: 1, 2, 3");
    expect(summary.textContent).toContain("Deadlock");
  });

  it("reports a clean trace as having no faulty processes", () => {
    const clean: LocalizationReport = {
      faulty: [],
      failure_events: {},
      groups: [],
      unlocalizable: false,
      reason: null,
      diagnostics: [],
    };
    renderTimeline(host, fixture("cycle_three.view.all.json"), clean);
    expect(host.querySelector(".summary")!.textContent).toContain(
      "no faulty processes"
    );
  });

  it("shows the unlocalizable reason", () => {
    const unlocalizable: LocalizationReport = {
      faulty: [],
      failure_events: {},
      groups: [],
      unlocalizable: true,
      reason: "no failure events recorded",
      diagnostics: [],
    };
    renderTimeline(host, fixture("cycle_three.view.all.json"), unlocalizable);
    expect(host.querySelector(".summary")!.textContent).toContain(
      "unlocalizable: no failure events recorded"
    );
  });

  it("styles failure edges dotted and success edges solid", () => {
    renderTimeline(host, fixture("truncated_pair.view.all.json"), null);
    const dotted = host.querySelectorAll("line.edge-failed[stroke-dasharray]");
    expect(dotted.length).toBeGreaterThan(0);
    const solid = [...host.querySelectorAll("line.edge-C")].filter(
      (l) => !l.classList.contains("edge-failed")
    );
    expect(solid.length).toBeGreaterThan(0);
    for (const line of solid) {
      expect(line.hasAttribute("stroke-dasharray")).toBe(false);
    }
  });
});

describe("renderError", () => {
  it("shows a banner and nothing else", () => {
    renderError(host, "trace is broken");
    expect(host.querySelector(".error-banner")!.textContent).toBe(
      "trace is broken"
    );
    expect(host.querySelector("svg")).toBeNull();
    expect(host.querySelector(".summary")).toBeNull();
  });
});

describe("renderFromRaw", () => {
  it("renders a valid payload and returns the document", () => {
    const doc = renderFromRaw(host, raw("crash_chain.view.all.json"), null);
    expect(doc).not.toBeNull();
    expect(host.querySelector("svg")).not.toBeNull();
  });

  it("turns a malformed payload into an error banner, nothing partial", () => {
    const doc = renderFromRaw(host, { header: {} }, null);
    expect(doc).toBeNull();
    expect(host.querySelector(".error-banner")).not.toBeNull();
    expect(host.querySelector("svg")).toBeNull();
    expect(drawnEventNumbers(host)).toEqual([]);
  });

  it("rejects a malformed report too", () => {
    const doc = renderFromRaw(host, raw("crash_chain.view.all.json"), {
      faulty: "everyone",
    });
    expect(doc).toBeNull();
    expect(host.querySelector(".error-banner")).not.toBeNull();
  });
});

describe("inspect dialog", () => {
  it("opens on a failure node with all rows and the error reason", () => {
    const doc = fixture("crash_chain.view.all.json");
    renderTimeline(host, doc, null);
    const failure = doc.events.find((e) => e.status === "failure")!;
    click(host.querySelector(`circle[data-no="${failure.no}"]`)!);
    const dialog = host.querySelector(".dialog")!;
    const labels = [...dialog.querySelectorAll("dt")].map((d) => d.textContent);
    expect(labels).toEqual([
      "event",
      "rank",
      "source",
      "routine",
      "status",
      "error reason",
    ]);
    const values = [...dialog.querySelectorAll("dd")].map((d) => d.textContent);
    expect(values[0]).toBe(String(failure.no));
    expect(values[1]).toBe(String(failure.rank));
    expect(values[2]).toBe(`${failure.file}:${failure.line}`);
    expect(values[3]).toContain(failure.routine);
    expect(values[4]).toBe("failure");
    expect(values[5]).toBe(failure.reason);
  });

  it("shows no error reason row for a successful event", () => {
    const doc = fixture("truncated_pair.view.all.json");
    renderTimeline(host, doc, null);
    const ok = doc.events.find((e) => e.status === "success")!;
    click(host.querySelector(`circle[data-no="${ok.no}"]`)!);
    const labels = [...host.querySelectorAll(".dialog dt")].map(
      (d) => d.textContent
    );
    expect(labels).not.toContain("error reason");
    expect(labels).toContain("routine");
  });

  it("does not open from a click on empty lane space", () => {
    renderTimeline(host, fixture("cycle_three.view.all.json"), null);
    click(host.querySelector("svg")!);
    click(host.querySelector("line.lane-base")!);
    expect(host.querySelector(".dialog")).toBeNull();
  });

  it("closes when the shown event leaves the view", () => {
    renderTimeline(host, fixture("cycle_three.view.all.json"), null);
    click(host.querySelector('circle[data-no="4"]')!);
    expect(openDialogEvent(host)).toBe(4);
    // The default view drops event 4 (rank 0 computed, nothing failed).
    renderTimeline(host, fixture("cycle_three.view.default.json"), null);
    expect(host.querySelector(".dialog")).toBeNull();
  });

  it("stays open across a re-render that keeps the event", () => {
    renderTimeline(host, fixture("cycle_three.view.all.json"), null);
    click(host.querySelector('circle[data-no="1"]')!);
    renderTimeline(host, fixture("cycle_three.view.default.json"), null);
    expect(openDialogEvent(host)).toBe(1);
  });

  it("the close button closes it", () => {
    const doc = fixture("cycle_three.view.all.json");
    renderTimeline(host, doc, null);
    click(host.querySelector('circle[data-no="1"]')!);
    (host.querySelector(".dialog-close") as HTMLElement).click();
    expect(host.querySelector(".dialog")).toBeNull();
  });
});

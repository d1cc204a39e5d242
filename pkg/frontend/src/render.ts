/**
 * DOM rendering. The scene is drawn into an SVG, one lane per rank,
 * with a summary panel above it. Solid lines are successful
 * communications; dotted lines mark failures. A malformed document
 * renders as an error banner and nothing else.
 */

import { buildScene, NODE_RADIUS } from "./layout.js";
import { closeDialog, openDialog, openDialogEvent } from "./dialog.js";
import { parseReport, type LocalizationReport } from "./report.js";
import {
  eventsByNumber,
  parseTraceDocument,
  TraceFormatError,
  type TraceDocument,
} from "./trace.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface RenderOptions {
  onSelect?: (no: number) => void;
}

function svgElement(
  host: HTMLElement,
  name: string,
  attrs: Record<string, string>
): SVGElement {
  const el = host.ownerDocument.createElementNS(SVG_NS, name) as SVGElement;
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, value);
  }
  return el;
}

function summaryText(report: LocalizationReport): string[] {
  if (report.unlocalizable) {
    return [`unlocalizable: ${report.reason}`];
  }
  if (report.faulty.length === 0) {
    return ["no faulty processes"];
  }
  const lines = [`faulty processes: ${report.faulty.join(", ")}`];
  for (const group of report.groups) {
    lines.push(`ranks ${group.ranks.join(", ")}: ${group.situation}`);
  }
  return lines;
}

function renderSummary(
  host: HTMLElement,
  report: LocalizationReport | null
): void {
  const panel = host.ownerDocument.createElement("div");
  panel.className = "summary";
  if (report) {
    for (const text of summaryText(report)) {
      const line = host.ownerDocument.createElement("div");
      line.textContent = text;
      panel.append(line);
    }
  }
  host.append(panel);
}

/** Replace host content with an error banner; nothing else is drawn. */
export function renderError(host: HTMLElement, message: string): void {
  host.replaceChildren();
  const banner = host.ownerDocument.createElement("div");
  banner.className = "error-banner";
  banner.textContent = message;
  host.append(banner);
}

export function renderTimeline(
  host: HTMLElement,
  doc: TraceDocument,
  report: LocalizationReport | null,
  opts: RenderOptions = {}
): void {
  const scene = buildScene(doc);
  const events = eventsByNumber(doc);
  const openEvent = openDialogEvent(host);
  host.replaceChildren();

  renderSummary(host, report);

  const svg = svgElement(host, "svg", {
    class: "timeline",
    width: String(scene.width),
    height: String(scene.height),
    viewBox: `0 0 ${scene.width} ${scene.height}`,
  }) as SVGSVGElement;

  for (const lane of scene.lanes) {
    const label = svgElement(host, "text", {
      class: "lane-label",
      x: "8",
      y: String(lane.y + 4),
    });
    label.textContent = `rank ${lane.rank}`;
    svg.append(label);
    svg.append(
      svgElement(host, "line", {
        class: "lane-base",
        x1: "88",
        y1: String(lane.y),
        x2: String(scene.width - 8),
        y2: String(lane.y),
      })
    );
  }

  for (const edge of scene.edges) {
    const attrs: Record<string, string> = {
      class: `edge edge-${edge.kind}${edge.dotted ? " edge-failed" : ""}`,
      x1: String(edge.x1),
      y1: String(edge.y1),
      x2: String(edge.x2),
      y2: String(edge.y2),
    };
    if (edge.dotted) {
      attrs["stroke-dasharray"] = "3 4";
    }
    svg.append(svgElement(host, "line", attrs));
  }

  for (const stub of scene.stubs) {
    svg.append(
      svgElement(host, "line", {
        class: "edge stub edge-failed",
        "stroke-dasharray": "3 4",
        x1: String(stub.x1),
        y1: String(stub.y1),
        x2: String(stub.x2),
        y2: String(stub.y2),
      })
    );
  }

  for (const node of scene.nodes) {
    const circle = svgElement(host, "circle", {
      class: node.failed ? "node failed" : "node",
      "data-no": String(node.no),
      cx: String(node.x),
      cy: String(node.y),
      r: String(NODE_RADIUS),
      fill: node.color,
    });
    circle.addEventListener("click", () => {
      const ev = events.get(node.no);
      if (ev) {
        openDialog(host, ev);
        opts.onSelect?.(node.no);
      }
    });
    svg.append(circle);
  }

  host.append(svg);

  // A dialog left over from the previous view closes unless its event
  // is still drawn.
  if (openEvent !== null) {
    const ev = events.get(openEvent);
    if (ev) {
      openDialog(host, ev);
    } else {
      closeDialog(host);
    }
  }
}

/**
 * Parse and render raw API payloads. Any format error becomes an error
 * banner with no partial render. Returns the parsed document, or null
 * when it was rejected.
 */
export function renderFromRaw(
  host: HTMLElement,
  rawDoc: unknown,
  rawReport: unknown | null,
  opts: RenderOptions = {}
): TraceDocument | null {
  let doc: TraceDocument;
  let report: LocalizationReport | null = null;
  try {
    doc = parseTraceDocument(rawDoc);
    if (rawReport !== null) {
      report = parseReport(rawReport);
    }
  } catch (err) {
    if (err instanceof TraceFormatError || (err as Error).name === "ReportFormatError") {
      renderError(host, (err as Error).message);
      return null;
    }
    throw err;
  }
  renderTimeline(host, doc, report, opts);
  return doc;
}

/** Event numbers currently drawn, in document order. */
export function drawnEventNumbers(host: HTMLElement): number[] {
  return [...host.querySelectorAll<SVGElement>("circle[data-no]")].map((el) =>
    Number(el.getAttribute("data-no"))
  );
}

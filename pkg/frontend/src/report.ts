/** Localization report as served by /api/localization. */

export interface ReportGroup {
  ranks: number[];
  situation: string;
  evidence: number[];
}

export interface LocalizationReport {
  faulty: number[];
  failure_events: Record<string, number | null>;
  groups: ReportGroup[];
  unlocalizable: boolean;
  reason: string | null;
  diagnostics: string[];
}

export class ReportFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ReportFormatError";
  }
}

function numbers(value: unknown, path: string): number[] {
  if (
    !Array.isArray(value) ||
    value.some((v) => typeof v !== "number" || !Number.isFinite(v))
  ) {
    throw new ReportFormatError(`${path}: expected an array of numbers`);
  }
  return value as number[];
}

export function parseReport(raw: unknown): LocalizationReport {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ReportFormatError("report: expected an object");
  }
  const doc = raw as Record<string, unknown>;
  if (!Array.isArray(doc.groups)) {
    throw new ReportFormatError("report.groups: expected an array");
  }
  const groups = doc.groups.map((g, i) => {
    if (typeof g !== "object" || g === null) {
      throw new ReportFormatError(`report.groups[${i}]: expected an object`);
    }
    const raw = g as Record<string, unknown>;
    if (typeof raw.situation !== "string") {
      throw new ReportFormatError(
        `report.groups[${i}].situation: expected a string`
      );
    }
    return {
      ranks: numbers(raw.ranks, `report.groups[${i}].ranks`),
      situation: raw.situation,
      evidence: numbers(raw.evidence, `report.groups[${i}].evidence`),
    };
  });
  const fe = doc.failure_events;
  if (typeof fe !== "object" || fe === null || Array.isArray(fe)) {
    throw new ReportFormatError("report.failure_events: expected an object");
  }
  const failure_events: Record<string, number | null> = {};
  for (const [rank, no] of Object.entries(fe)) {
    if (no !== null && typeof no !== "number") {
      throw new ReportFormatError(
        `report.failure_events[${rank}]: expected a number or null`
      );
    }
    failure_events[rank] = no;
  }
  if (typeof doc.unlocalizable !== "boolean") {
    throw new ReportFormatError("report.unlocalizable: expected a boolean");
  }
  if (doc.reason !== null && typeof doc.reason !== "string") {
    throw new ReportFormatError("report.reason: expected a string or null");
  }
  if (
    !Array.isArray(doc.diagnostics) ||
    doc.diagnostics.some((d) => typeof d !== "string")
  ) {
    throw new ReportFormatError("report.diagnostics: expected strings");
  }
  return {
    faulty: numbers(doc.faulty, "report.faulty"),
    failure_events,
    groups,
    unlocalizable: doc.unlocalizable,
    reason: doc.reason,
    diagnostics: doc.diagnostics as string[],
  };
}

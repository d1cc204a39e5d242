/**
 * Click-to-inspect dialog. Shows, for one event: its number, rank,
 * source position, routine with arguments, status, and the error reason
 * when the event failed.
 */

import type { TraceEvent } from "./trace.js";

export interface DialogRow {
  label: string;
  value: string;
}

function describeArguments(ev: TraceEvent): string {
  if (ev.collective) {
    return `root ${ev.collective[1]}, len ${ev.len}`;
  }
  switch (ev.kind) {
    case "send":
    case "send_init":
      return `to ${ev.partner}, tag ${ev.tag}, len ${ev.len}`;
    case "recv":
    case "recv_init":
      return `from ${ev.partner}, tag ${ev.tag}, len ${ev.len}`;
    case "send_complete":
    case "recv_complete":
      return `partner ${ev.partner}, tag ${ev.tag}, len ${ev.len}`;
    case "calc":
      return "";
  }
}

export function describeRoutine(ev: TraceEvent): string {
  const args = describeArguments(ev);
  return args ? `${ev.routine}(${args})` : ev.routine;
}

export function dialogRows(ev: TraceEvent): DialogRow[] {
  const rows: DialogRow[] = [
    { label: "event", value: String(ev.no) },
    { label: "rank", value: String(ev.rank) },
    { label: "source", value: `${ev.file}:${ev.line}` },
    { label: "routine", value: describeRoutine(ev) },
    { label: "status", value: ev.status },
  ];
  if (ev.reason !== null) {
    rows.push({ label: "error reason", value: ev.reason });
  }
  return rows;
}

export function openDialog(host: HTMLElement, ev: TraceEvent): void {
  closeDialog(host);
  const dialog = host.ownerDocument.createElement("div");
  dialog.className = "dialog";
  dialog.dataset.no = String(ev.no);
  const list = host.ownerDocument.createElement("dl");
  for (const row of dialogRows(ev)) {
    const dt = host.ownerDocument.createElement("dt");
    dt.textContent = row.label;
    const dd = host.ownerDocument.createElement("dd");
    dd.textContent = row.value;
    list.append(dt, dd);
  }
  dialog.append(list);
  const close = host.ownerDocument.createElement("button");
  close.className = "dialog-close";
  close.textContent = "close";
  close.addEventListener("click", () => closeDialog(host));
  dialog.append(close);
  host.append(dialog);
}

export function closeDialog(host: HTMLElement): void {
  host.querySelector(".dialog")?.remove();
}

/** Event number of the open dialog, or null when none is open. */
export function openDialogEvent(host: HTMLElement): number | null {
  const dialog = host.querySelector<HTMLElement>(".dialog");
  return dialog ? Number(dialog.dataset.no) : null;
}

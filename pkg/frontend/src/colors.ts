/** Fixed node color per routine, kept in one table for test stability. */

export const ROUTINE_COLORS: Record<string, string> = {
  send: "#2f6fb6",
  bsend: "#4a8ed6",
  ssend: "#1d4e86",
  rsend: "#6aa5e0",
  isend: "#2f9bb6",
  recv: "#2fa05a",
  irecv: "#57c184",
  wait: "#8a5fc4",
  waitall: "#6f46a8",
  sendrecv: "#2f8fa0",
  bcast: "#d98a2b",
  gather: "#c46a1d",
  compute: "#8f949a",
  crash: "#54585e",
};

export const FALLBACK_COLOR = "#b0b4ba";

export function routineColor(routine: string): string {
  return ROUTINE_COLORS[routine] ?? FALLBACK_COLOR;
}

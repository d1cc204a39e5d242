/** What the user is looking at; the server does all reduction. */

export type ViewMode = "default" | "all" | "custom";

export interface ViewState {
  mode: ViewMode;
  selected_ranks: Set<number>;
  include_related: boolean;
  selected_event: number | null;
}

export class InvalidViewState extends Error {
  constructor(message: string) {
    super(message);
    this.name = "InvalidViewState";
  }
}

export function defaultViewState(): ViewState {
  return {
    mode: "default",
    selected_ranks: new Set(),
    include_related: false,
    selected_event: null,
  };
}

/** Enforce the one structural invariant: custom mode needs ranks. */
export function assertValid(state: ViewState): void {
  if (state.mode === "custom" && state.selected_ranks.size === 0) {
    throw new InvalidViewState("custom mode requires at least one rank");
  }
}

/** Query string for /api/view, without the leading "?". */
export function viewQuery(state: ViewState): string {
  assertValid(state);
  if (state.mode !== "custom") {
    return `mode=${state.mode}`;
  }
  const ranks = [...state.selected_ranks].sort((a, b) => a - b).join(",");
  let query = `mode=custom&ranks=${ranks}`;
  if (state.include_related) {
    query += "&related=1";
  }
  return query;
}

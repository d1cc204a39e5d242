import { describe, expect, it } from "vitest";

import {
  assertValid,
  defaultViewState,
  InvalidViewState,
  viewQuery,
} from "../src/viewState.js";
import { viewPath } from "../src/api.js";

describe("ViewState", () => {
  it("starts in default mode with nothing selected", () => {
    const state = defaultViewState();
    expect(state.mode).toBe("default");
    expect(state.selected_ranks.size).toBe(0);
    expect(state.include_related).toBe(false);
    expect(state.selected_event).toBeNull();
  });

  it("custom mode requires at least one rank", () => {
    const state = defaultViewState();
    state.mode = "custom";
    expect(() => assertValid(state)).toThrow(InvalidViewState);
    state.selected_ranks.add(2);
    expect(() => assertValid(state)).not.toThrow();
  });

  it("builds the default and all queries", () => {
    const state = defaultViewState();
    expect(viewQuery(state)).toBe("mode=default");
    state.mode = "all";
    expect(viewQuery(state)).toBe("mode=all");
  });

  it("builds the custom query with sorted ranks", () => {
    const state = defaultViewState();
    state.mode = "custom";
    state.selected_ranks = new Set([3, 1, 2]);
    expect(viewQuery(state)).toBe("mode=custom&ranks=1,2,3");
    state.include_related = true;
    expect(viewQuery(state)).toBe("mode=custom&ranks=1,2,3&related=1");
  });

  it("related is ignored outside custom mode", () => {
    const state = defaultViewState();
    state.include_related = true;
    expect(viewQuery(state)).toBe("mode=default");
  });

  it("viewPath prefixes the endpoint", () => {
    const state = defaultViewState();
    expect(viewPath(state)).toBe("/api/view?mode=default");
  });

  it("refuses to build a query for an invalid state", () => {
    const state = defaultViewState();
    state.mode = "custom";
    expect(() => viewQuery(state)).toThrow(InvalidViewState);
  });
});

/** Thin fetch wrappers around the serve endpoints. */

import { viewQuery, type ViewState } from "./viewState.js";

export class ApiError extends Error {
  constructor(
    public readonly path: string,
    public readonly status: number
  ) {
    super(`${path}: HTTP ${status}`);
    this.name = "ApiError";
  }
}

export function viewPath(state: ViewState): string {
  return `/api/view?${viewQuery(state)}`;
}

async function getJson(path: string): Promise<unknown> {
  const response = await fetch(path);
  if (!response.ok) {
    throw new ApiError(path, response.status);
  }
  return response.json();
}

export function fetchTrace(): Promise<unknown> {
  return getJson("/api/trace");
}

export function fetchLocalization(): Promise<unknown> {
  return getJson("/api/localization");
}

export function fetchView(state: ViewState): Promise<unknown> {
  return getJson(viewPath(state));
}

/** Console state and the pure transitions the UI applies to it. */

import type { SearchRequest, SearchResponse } from './api.js';

export type Mode = 'auto' | 'override';

export interface ConsoleState {
  query: string;
  k: number;
  m: number;
  mode: Mode;
  /** Views pinned by the user; only sent in override mode. */
  overrideViews: string[];
  lastResponse: SearchResponse | null;
  error: string | null;
}

export const DEFAULT_K = 5;
export const DEFAULT_M = 10;

export function initialState(): ConsoleState {
  return {
    query: '',
    k: DEFAULT_K,
    m: DEFAULT_M,
    mode: 'auto',
    overrideViews: [],
    lastResponse: null,
    error: null,
  };
}

export function setQuery(state: ConsoleState, query: string): ConsoleState {
  return { ...state, query };
}

/** Toggle a pinned view; pinning any view switches to override mode, and
 * unpinning the last one falls back to auto. */
export function toggleView(state: ConsoleState, path: string): ConsoleState {
  const pinned = state.overrideViews.includes(path)
    ? state.overrideViews.filter((p) => p !== path)
    : [...state.overrideViews, path];
  return { ...state, overrideViews: pinned, mode: pinned.length ? 'override' : 'auto' };
}

/** Drop all pinned views and return to recognizer-driven search. */
export function clearOverride(state: ConsoleState): ConsoleState {
  return { ...state, overrideViews: [], mode: 'auto' };
}

/** The /search body for the current state; auto mode omits `views` so the
 * service runs its recognizer. */
export function buildSearchBody(state: ConsoleState): SearchRequest {
  const body: SearchRequest = { query: state.query, k: state.k, m: state.m };
  if (state.mode === 'override' && state.overrideViews.length > 0) {
    body.views = [...state.overrideViews];
  }
  return body;
}

export function applyResponse(
  state: ConsoleState,
  response: SearchResponse,
): ConsoleState {
  return { ...state, lastResponse: response, error: null };
}

export function applyError(state: ConsoleState, message: string): ConsoleState {
  return { ...state, error: message };
}

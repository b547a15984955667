/** Browser entry point: wires the DOM to the API client and state module. */

import { ApiClient } from './api.js';
import { renderError, renderHits, renderViewChips } from './render.js';
import {
  applyError,
  applyResponse,
  buildSearchBody,
  clearOverride,
  initialState,
  setQuery,
  toggleView,
  type ConsoleState,
} from './state.js';

const client = new ApiClient('');
let state: ConsoleState = initialState();

function byId<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (!element) throw new Error(`missing element #${id}`);
  return element as T;
}

function paint(): void {
  const results = byId<HTMLDivElement>('results');
  const chips = byId<HTMLDivElement>('views');
  if (state.error) {
    results.innerHTML = renderError(state.error);
    return;
  }
  if (state.lastResponse) {
    chips.innerHTML = renderViewChips(state, state.lastResponse.views_used);
    results.innerHTML = renderHits(state.lastResponse);
  }
}

async function runSearch(): Promise<void> {
  try {
    const response = await client.search(buildSearchBody(state));
    state = applyResponse(state, response);
  } catch (error) {
    state = applyError(state, error instanceof Error ? error.message : String(error));
  }
  paint();
}

function init(): void {
  const input = byId<HTMLInputElement>('query');
  const form = byId<HTMLFormElement>('search-form');
  const reset = byId<HTMLButtonElement>('clear-views');

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    state = setQuery(state, input.value);
    void runSearch();
  });

  reset.addEventListener('click', () => {
    state = clearOverride(state);
    void runSearch();
  });

  byId<HTMLDivElement>('views').addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    const path = target.dataset.view;
    if (!path) return;
    state = toggleView(state, path);
    void runSearch();
  });

  void client
    .healthz()
    .then((health) => {
      byId<HTMLSpanElement>('status').textContent =
        `${health.kind} index, ${health.papers} papers`;
    })
    .catch(() => {
      byId<HTMLSpanElement>('status').textContent = 'service unreachable';
    });
}

if (typeof document !== 'undefined') {
  document.addEventListener('DOMContentLoaded', init);
}

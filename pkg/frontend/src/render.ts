/** Pure HTML-string renderers; no DOM access so they are trivially testable. */

import type { SchemaNode, SearchResponse } from './api.js';
import type { ConsoleState } from './state.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Paper ids in display order; the parity tests compare this against the
 * service response directly. */
export function resultIds(response: SearchResponse): string[] {
  return response.results.map((hit) => hit.paper_id);
}

export function renderViewChips(state: ConsoleState, views: string[]): string {
  const chips = views
    .map((path) => {
      const pinned = state.overrideViews.includes(path);
      return (
        `<button class="chip${pinned ? ' pinned' : ''}" data-view="${escapeHtml(path)}">` +
        `${escapeHtml(path)}</button>`
      );
    })
    .join('');
  const mode =
    state.mode === 'override'
      ? `<span class="mode">pinned views (${state.overrideViews.length})</span>`
      : '<span class="mode">auto</span>';
  return `<div class="chips">${mode}${chips}</div>`;
}

export function renderHits(response: SearchResponse): string {
  if (response.results.length === 0) {
    return '<p class="empty">No results.</p>';
  }
  const items = response.results
    .map((hit) => {
      const view = hit.best_view ? escapeHtml(hit.best_view) : 'n/a';
      return (
        `<li data-paper-id="${escapeHtml(hit.paper_id)}">` +
        `<span class="score">${hit.score.toFixed(4)}</span>` +
        `<span class="title">${escapeHtml(hit.title || hit.paper_id)}</span>` +
        `<span class="view">${view}</span>` +
        `<p class="snippet">${escapeHtml(hit.snippet)}</p>` +
        `</li>`
      );
    })
    .join('');
  return `<ol class="hits">${items}</ol>`;
}

export function renderError(message: string): string {
  return `<p class="error">${escapeHtml(message)}</p>`;
}

export function renderSchemaTree(node: SchemaNode, prefix = ''): string {
  const path = prefix ? `${prefix}/${node.name}` : node.name;
  const children = (node.children ?? [])
    .map((child) => renderSchemaTree(child, path))
    .join('');
  return (
    `<li><span class="node" data-path="${escapeHtml(path)}" ` +
    `title="${escapeHtml(node.description)}">${escapeHtml(node.name)}</span>` +
    (children ? `<ul>${children}</ul>` : '') +
    `</li>`
  );
}

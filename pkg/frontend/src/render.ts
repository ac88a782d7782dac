/** Pure HTML/SVG snapshot rendering (no DOM access, unit-testable).
 *
 * Layout: labeled directed relation arcs above a fixed-pitch token row;
 * entities as highlighted chips under their spans with attribute badges in
 * parentheses; model suggestions drawn dashed/translucent with confidence
 * percentages and accept/reject controls.
 */

import type { Suggested, UiGraphState } from "./state.js";
import type { WireRelation } from "./types.js";

export const TOKEN_PITCH = 88; // px per token column

const esc = (text: string): string =>
  text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");

const pct = (x: number): string => `${Math.round(x * 100)}%`;

function spanCenter(start: number, end: number): number {
  return ((start + end) / 2) * TOKEN_PITCH;
}

export function renderTokens(state: UiGraphState, selection?: [number, number]): string {
  const cells = state.tokens.map((tok, i) => {
    const selected =
      selection && i >= selection[0] && i < selection[1] ? " selected" : "";
    return `<span class="token${selected}" data-i="${i}">${esc(tok)}</span>`;
  });
  return `<div class="token-row">${cells.join("")}</div>`;
}

function arcPath(head: [number, number], tail: [number, number], lane: number): string {
  const x1 = spanCenter(...head);
  const x2 = spanCenter(...tail);
  const y = 10 + lane * 26;
  return `M ${x1} 120 C ${x1} ${y}, ${x2} ${y}, ${x2} 120`;
}

export function renderArcs(state: UiGraphState): string {
  const width = Math.max(1, state.tokens.length) * TOKEN_PITCH;
  const pieces: string[] = [];
  const drawn: { edge: WireRelation; suggested: boolean; confidence?: number; k?: number }[] =
    state.relations.map((edge) => ({ edge, suggested: false }));
  for (const [k, s] of (state.suggestions?.relations ?? []).entries()) {
    if (s.status === "pending") {
      drawn.push({ edge: s.item, suggested: true, confidence: s.confidence, k });
    }
  }
  drawn.forEach((d, lane) => {
    const headEnt = d.suggested
      ? state.suggestions!.entities[d.edge.head]?.item
      : state.entities[d.edge.head];
    const tailEnt = d.suggested
      ? state.suggestions!.entities[d.edge.tail]?.item
      : state.entities[d.edge.tail];
    if (!headEnt || !tailEnt) return;
    const cls = d.suggested ? "arc suggested" : "arc";
    const label = d.suggested
      ? `${esc(d.edge.type)} ${pct(d.confidence ?? 0)}`
      : esc(d.edge.type);
    const mid = (spanCenter(headEnt.start, headEnt.end) +
      spanCenter(tailEnt.start, tailEnt.end)) / 2;
    pieces.push(
      `<path class="${cls}" marker-end="url(#arrow)" ` +
        `d="${arcPath([headEnt.start, headEnt.end], [tailEnt.start, tailEnt.end], lane)}"` +
        (d.suggested ? ` data-suggest-rel="${d.k}"` : "") + `></path>` +
        `<text class="${cls}-label" x="${mid}" y="${22 + lane * 26}">${label}</text>`,
    );
  });
  return (
    `<svg class="arcs" width="${width}" height="130" viewBox="0 0 ${width} 130">` +
    `<defs><marker id="arrow" viewBox="0 0 10 10" refX="8" refY="5" ` +
    `markerWidth="6" markerHeight="6" orient="auto-start-reverse">` +
    `<path d="M 0 0 L 10 5 L 0 10 z"></path></marker></defs>` +
    pieces.join("") +
    `</svg>`
  );
}

function badge(types: string[]): string {
  return types.length ? ` <span class="attrs">(${types.map(esc).join(", ")})</span>` : "";
}

export function renderEntities(state: UiGraphState): string {
  const items = state.entities.map((e, i) => {
    const text = esc(state.tokens.slice(e.start, e.end).join(" "));
    return (
      `<li class="entity ${e.type}" data-entity="${i}">` +
      `<span class="etype">${esc(e.type)}</span> ` +
      `<span class="etext">${text}</span>${badge(e.attributes)} ` +
      `<button data-act="retype" data-entity="${i}">retype</button>` +
      `<button data-act="delete" data-entity="${i}">delete</button></li>`
    );
  });
  return `<ul class="entities">${items.join("")}</ul>`;
}

function suggestedControls(kind: string, k: number): string {
  return (
    `<button data-act="accept" data-kind="${kind}" data-k="${k}">accept</button>` +
    `<button data-act="reject" data-kind="${kind}" data-k="${k}">reject</button>`
  );
}

export function renderSuggestions(state: UiGraphState): string {
  const layer = state.suggestions;
  if (!layer) return `<p class="muted">No model suggestions for this sentence.</p>`;
  const rows: string[] = [];
  const open = <T>(list: Suggested<T>[]) => list.filter((s) => s.status === "pending");

  for (const [k, s] of layer.entities.entries()) {
    if (s.status !== "pending") continue;
    const text = esc(state.tokens.slice(s.item.start, s.item.end).join(" "));
    rows.push(
      `<li class="suggested entity-suggestion">` +
        `<span class="etype">${esc(s.item.type)}</span> ` +
        `<span class="etext">${text}</span> ` +
        `<span class="conf">${pct(s.confidence)}</span> ` +
        suggestedControls("entities", k) + `</li>`,
    );
  }
  for (const [k, s] of layer.attributes.entries()) {
    if (s.status !== "pending") continue;
    rows.push(
      `<li class="suggested attribute-suggestion">attribute ` +
        `<span class="attrs">(${esc(s.item.type)})</span> on entity ${s.item.entity} ` +
        `<span class="conf">${pct(s.confidence)}</span> ` +
        suggestedControls("attributes", k) + `</li>`,
    );
  }
  for (const [k, s] of layer.relations.entries()) {
    if (s.status !== "pending") continue;
    rows.push(
      `<li class="suggested relation-suggestion">` +
        `${esc(s.item.type)}: ${s.item.head} &#8594; ${s.item.tail} ` +
        `<span class="conf">${pct(s.confidence)}</span> ` +
        suggestedControls("relations", k) + `</li>`,
    );
  }
  const pending =
    open(layer.entities).length + open(layer.relations).length +
    open(layer.attributes).length;
  const header = pending
    ? `<p>${pending} pending suggestion(s) <button data-act="accept-all">accept all</button></p>`
    : `<p class="muted">All suggestions reviewed.</p>`;
  return `<div class="suggestions">${header}<ul>${rows.join("")}</ul></div>`;
}

export function renderReport(lines: string[]): string {
  if (!lines.length) return "";
  const items = lines.map((l) => `<li>${esc(l)}</li>`).join("");
  return `<div class="report"><strong>Server validation report</strong><ul>${items}</ul></div>`;
}

export function renderNotice(notice: string): string {
  return notice ? `<div class="notice">${esc(notice)}</div>` : "";
}

export function renderEmptyQueue(): string {
  return `<div class="empty">Queue empty: nothing left to annotate.</div>`;
}

export function renderSentence(state: UiGraphState, options: {
  selection?: [number, number];
  notice?: string;
} = {}): string {
  return [
    `<div class="sentence" data-id="${esc(state.id)}" data-split="${esc(state.split)}">`,
    renderNotice(options.notice ?? ""),
    renderArcs(state),
    renderTokens(state, options.selection),
    renderEntities(state),
    renderSuggestions(state),
    renderReport(state.serverReport),
    `</div>`,
  ].join("\n");
}

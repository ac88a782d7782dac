/** Annotation-loop controller: drives load -> suggest -> edit -> submit.
 *
 * Pure application logic over ApiClient + UiGraphState; the DOM layer in
 * main.ts only forwards events and swaps in the rendered snapshot.
 */

import { ApiClient, type SubmitResult } from "./api.js";
import { renderEmptyQueue, renderSentence } from "./render.js";
import { UiGraphState } from "./state.js";

export type View =
  | { kind: "loading" }
  | { kind: "empty" }
  | { kind: "editing"; state: UiGraphState; notice: string }
  | { kind: "error"; message: string; retryable: boolean };

export class AnnotatorController {
  view: View = { kind: "loading" };
  selection: [number, number] | null = null;
  onChange: () => void = () => {};

  constructor(readonly api: ApiClient) {}

  private update(view: View): void {
    this.view = view;
    this.onChange();
  }

  get state(): UiGraphState | null {
    return this.view.kind === "editing" ? this.view.state : null;
  }

  /** Fetch the next queue sentence and overlay suggestions when permitted. */
  async loadNext(): Promise<void> {
    this.update({ kind: "loading" });
    let next;
    try {
      next = await this.api.next();
    } catch (err) {
      this.update({ kind: "error", message: String(err), retryable: true });
      return;
    }
    if (next === null) {
      this.update({ kind: "empty" });
      return;
    }
    const state = new UiGraphState(next.id, next.tokens, next.split, next.source);
    let notice = "";
    if (next.suggestions_enabled) {
      try {
        const suggestion = await this.api.suggest(next.id);
        if (suggestion) state.attachSuggestions(suggestion);
        else notice = "Suggestions are disabled for this split; annotate from scratch.";
      } catch (err) {
        notice = `Suggestion request failed (${String(err)}); annotate from scratch.`;
      }
    } else {
      notice = "Suggestions are disabled for this split; annotate from scratch.";
    }
    this.selection = null;
    this.update({ kind: "editing", state, notice });
  }

  /** Submit the current graph; on 201 advance, on 422 attach the report. */
  async submit(): Promise<SubmitResult | null> {
    const state = this.state;
    if (!state) return null;
    const local = state.structuralErrors();
    if (local.length) {
      // Unreachable through the guarded edit operations.
      state.serverReport = local.map((l) => `client: ${l}`);
      this.onChange();
      return null;
    }
    const result = await this.api.submit(state.serialize());
    if (result.kind === "created") {
      await this.loadNext();
    } else if (result.kind === "rejected") {
      state.serverReport = [
        result.report.error,
        ...(result.report.errors ?? []),
        ...(result.report.warnings ?? []),
      ];
      this.onChange();
    } else {
      // Network failure: keep the state for retry.
      this.update({
        kind: "editing",
        state,
        notice: `Submit failed (${result.message}); your work is preserved, retry.`,
      });
    }
    return result;
  }

  render(): string {
    switch (this.view.kind) {
      case "loading":
        return `<div class="loading">Loading&hellip;</div>`;
      case "empty":
        return renderEmptyQueue();
      case "error":
        return `<div class="error">${this.view.message}` +
          (this.view.retryable ? ` <button data-act="retry">retry</button>` : "") +
          `</div>`;
      case "editing":
        return renderSentence(this.view.state, {
          selection: this.selection ?? undefined,
          notice: this.view.notice,
        });
    }
  }
}

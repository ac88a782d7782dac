/** DOM wiring: event delegation over the rendered snapshot plus a
 * keyboard-first labeling workflow.
 *
 * Keys: click/shift-click tokens to select a span; f/v/p/a/m/q create or
 * retype an entity (factor, evidence, epistemic, association, magnitude,
 * qualifier); 1-7 toggle attributes on the selected association; r starts a
 * relation from the selected entity (then click the tail and press a
 * relation key); Enter submits; Escape clears the selection.
 */

import { ApiClient } from "./api.js";
import { AnnotatorController } from "./controller.js";
import { ATTRIBUTE_TYPES } from "./types.js";

const ENTITY_KEYS: Record<string, string> = {
  f: "factor", v: "evidence", p: "epistemic", a: "association",
  m: "magnitude", q: "qualifier",
};
const RELATION_KEYS: Record<string, string> = {
  "0": "arg0", "1": "arg1", c: "comp_to", o: "modifier", s: "subtype",
  "+": "q+", "-": "q-",
};

const root = document.getElementById("app")!;
const status = document.getElementById("status")!;
const api = new ApiClient("");
const controller = new AnnotatorController(api);

let relationHead: number | null = null;

function flash(message: string): void {
  status.textContent = message;
  status.classList.add("visible");
  window.setTimeout(() => status.classList.remove("visible"), 2500);
}

controller.onChange = () => {
  root.innerHTML = controller.render();
};

function selectedSpan(): [number, number] | null {
  return controller.selection;
}

root.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const state = controller.state;

  if (target.dataset.act === "retry") {
    void controller.loadNext();
    return;
  }
  if (!state) return;

  if (target.classList.contains("token")) {
    const i = Number(target.dataset.i);
    const current = controller.selection;
    controller.selection =
      event.shiftKey && current ? [Math.min(current[0], i), Math.max(current[1], i + 1)]
        : [i, i + 1];
    controller.onChange();
    return;
  }

  const act = target.dataset.act;
  if (act === "accept-all") {
    state.acceptAllSuggestions();
    controller.onChange();
  } else if (act === "accept" || act === "reject") {
    const kind = target.dataset.kind as "entities" | "relations" | "attributes";
    const k = Number(target.dataset.k);
    if (act === "reject") state.rejectSuggestion(kind, k);
    else if (kind === "entities") state.acceptSuggestedEntity(k);
    else if (kind === "relations") report(state.acceptSuggestedRelation(k));
    else report(state.acceptSuggestedAttribute(k));
    controller.onChange();
  } else if (act === "delete") {
    state.deleteEntity(Number(target.dataset.entity));
    controller.onChange();
  } else if (act === "retype") {
    flash("press an entity key (f/v/p/a/m/q) to retype the selected span");
    const entity = state.entities[Number(target.dataset.entity)];
    if (entity) {
      controller.selection = [entity.start, entity.end];
      controller.onChange();
    }
  } else if (target.closest("[data-entity]") && relationHead !== null) {
    const tail = Number(
      (target.closest("[data-entity]") as HTMLElement).dataset.entity);
    flash(`relation ${relationHead} → ${tail}: press a relation key ` +
      `(0=arg0 1=arg1 c=comp_to o=modifier s=subtype +=q+ -=q-)`);
    pendingTail = tail;
  }
});

let pendingTail: number | null = null;

function report(result: { ok: boolean; rule?: string; message?: string }): void {
  if (!result.ok) flash(`blocked [${result.rule}]: ${result.message}`);
}

document.addEventListener("keydown", (event) => {
  const state = controller.state;
  if (!state) return;
  const key = event.key;

  if (key === "Enter") {
    void controller.submit();
    return;
  }
  if (key === "Escape") {
    controller.selection = null;
    relationHead = null;
    pendingTail = null;
    controller.onChange();
    return;
  }

  if (relationHead !== null && pendingTail !== null && RELATION_KEYS[key]) {
    report(state.addRelation(relationHead, pendingTail, RELATION_KEYS[key]));
    relationHead = null;
    pendingTail = null;
    controller.onChange();
    return;
  }

  const span = selectedSpan();
  if (!span) return;
  const existing = state.findEntity(span[0], span[1]);

  if (ENTITY_KEYS[key]) {
    const result = existing >= 0
      ? state.retypeEntity(existing, ENTITY_KEYS[key])
      : state.createEntity(span[0], span[1], ENTITY_KEYS[key]);
    report(result);
    controller.onChange();
  } else if (key === "r" && existing >= 0) {
    relationHead = existing;
    flash(`relation from entity ${existing}: click the tail entity`);
  } else if (key === "x" && existing >= 0) {
    state.deleteEntity(existing);
    controller.onChange();
  } else if (/^[1-7]$/.test(key) && existing >= 0 && event.altKey) {
    report(state.toggleAttribute(existing, ATTRIBUTE_TYPES[Number(key) - 1]));
    controller.onChange();
  }
});

document.getElementById("retrain")?.addEventListener("click", async () => {
  const { status: code } = await api.retrain();
  flash(code === 202 ? "retraining started" : `retrain rejected (${code})`);
});

void controller.loadNext();

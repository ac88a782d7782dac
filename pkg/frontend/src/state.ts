/** Editable graph state for one sentence.
 *
 * Every edit goes through a guard that mirrors the server's structural
 * rules (span bounds, unique spans, no self-cycles, no dangling indices,
 * no duplicate relation triples) plus the one hard schema rule: attributes
 * apply only to association entities.  Illegal edits are blocked inline
 * with the rule named, never thrown; the server remains authoritative and
 * its 422 reports are attached back onto the state.
 */

import {
  isAttributeType,
  isEntityType,
  isRelationType,
  sortAttributeTypes,
  type SuggestResponse,
  type WireEntity,
  type WireRelation,
  type WireSentence,
} from "./types.js";

export interface EditResult {
  ok: boolean;
  rule?: string;
  message?: string;
}

const blocked = (rule: string, message: string): EditResult => ({
  ok: false,
  rule,
  message,
});
const edited: EditResult = { ok: true };

export interface Entity {
  type: string;
  start: number;
  end: number;
  attributes: string[]; // canonical order, associations only
}

export interface RelationEdge {
  type: string;
  head: number;
  tail: number;
}

/** One suggested item with its confidence and review status. */
export interface Suggested<T> {
  item: T;
  confidence: number;
  status: "pending" | "accepted" | "rejected";
}

export interface SuggestionLayer {
  entities: Suggested<WireEntity>[];
  relations: Suggested<WireRelation>[];
  attributes: Suggested<{ entity: number; type: string }>[];
}

export class UiGraphState {
  readonly id: string;
  readonly source: string;
  readonly split: string;
  readonly tokens: string[];
  entities: Entity[] = [];
  relations: RelationEdge[] = [];
  suggestions: SuggestionLayer | null = null;
  dirty = false;
  serverReport: string[] = [];

  constructor(id: string, tokens: string[], split = "unlabeled", source = "other") {
    this.id = id;
    this.tokens = [...tokens];
    this.split = split;
    this.source = source;
  }

  // -- entity edits --------------------------------------------------------

  findEntity(start: number, end: number): number {
    return this.entities.findIndex((e) => e.start === start && e.end === end);
  }

  createEntity(start: number, end: number, type: string): EditResult {
    if (!isEntityType(type)) {
      return blocked("unknown-type", `unknown entity type "${type}"`);
    }
    if (!(start >= 0 && start < end && end <= this.tokens.length)) {
      return blocked(
        "span-bounds",
        `span [${start}, ${end}) is outside the ${this.tokens.length}-token sentence`,
      );
    }
    if (this.findEntity(start, end) >= 0) {
      return blocked(
        "span-unique",
        "each span can carry at most one entity; retype the existing one instead",
      );
    }
    this.entities.push({ type, start, end, attributes: [] });
    this.dirty = true;
    return edited;
  }

  retypeEntity(index: number, type: string): EditResult {
    const entity = this.entities[index];
    if (!entity) return blocked("dangling-index", `no entity ${index}`);
    if (!isEntityType(type)) {
      return blocked("unknown-type", `unknown entity type "${type}"`);
    }
    if (entity.attributes.length > 0 && type !== "association") {
      return blocked(
        "attr-on-non-association",
        "attributes apply only to association entities; clear them before retyping",
      );
    }
    entity.type = type;
    this.dirty = true;
    return edited;
  }

  deleteEntity(index: number): EditResult {
    if (!this.entities[index]) return blocked("dangling-index", `no entity ${index}`);
    this.entities.splice(index, 1);
    this.relations = this.relations
      .filter((r) => r.head !== index && r.tail !== index)
      .map((r) => ({
        type: r.type,
        head: r.head > index ? r.head - 1 : r.head,
        tail: r.tail > index ? r.tail - 1 : r.tail,
      }));
    this.dirty = true;
    return edited;
  }

  // -- attribute edits -----------------------------------------------------

  toggleAttribute(index: number, type: string): EditResult {
    const entity = this.entities[index];
    if (!entity) return blocked("dangling-index", `no entity ${index}`);
    if (!isAttributeType(type)) {
      return blocked("unknown-type", `unknown attribute type "${type}"`);
    }
    if (entity.type !== "association") {
      return blocked(
        "attr-on-non-association",
        `attributes apply only to association entities, not ${entity.type}`,
      );
    }
    const present = entity.attributes.includes(type);
    entity.attributes = present
      ? entity.attributes.filter((t) => t !== type)
      : sortAttributeTypes([...entity.attributes, type]);
    this.dirty = true;
    return edited;
  }

  // -- relation edits ------------------------------------------------------

  addRelation(head: number, tail: number, type: string): EditResult {
    if (!isRelationType(type)) {
      return blocked("unknown-type", `unknown relation type "${type}"`);
    }
    if (!this.entities[head] || !this.entities[tail]) {
      return blocked("dangling-index", "both endpoints must be existing entities");
    }
    if (head === tail) {
      return blocked("self-cycle", "relations cannot loop an entity onto itself");
    }
    if (this.relations.some((r) => r.head === head && r.tail === tail && r.type === type)) {
      return blocked("duplicate-relation", `(${head}, ${tail}, ${type}) already drawn`);
    }
    this.relations.push({ type, head, tail });
    this.dirty = true;
    return edited;
  }

  removeRelation(index: number): EditResult {
    if (!this.relations[index]) return blocked("dangling-index", `no relation ${index}`);
    this.relations.splice(index, 1);
    this.dirty = true;
    return edited;
  }

  // -- suggestion layer ----------------------------------------------------

  attachSuggestions(response: SuggestResponse): void {
    const attrs: Suggested<{ entity: number; type: string }>[] = [];
    for (const record of response.attributes) {
      const scores =
        response.scores.attributes.find((s) => s.entity === record.entity)?.types ?? {};
      for (const type of record.types) {
        attrs.push({
          item: { entity: record.entity, type },
          confidence: scores[type] ?? 0,
          status: "pending",
        });
      }
    }
    this.suggestions = {
      entities: response.entities.map((item, i) => ({
        item,
        confidence: response.scores.entities[i] ?? 0,
        status: "pending",
      })),
      relations: response.relations.map((item, i) => ({
        item,
        confidence: response.scores.relations[i] ?? 0,
        status: "pending",
      })),
      attributes: attrs,
    };
  }

  /** Accept a suggested entity: adds it (idempotent) and returns its index. */
  acceptSuggestedEntity(k: number): number {
    const suggestion = this.suggestions?.entities[k];
    if (!suggestion) return -1;
    let index = this.findEntity(suggestion.item.start, suggestion.item.end);
    if (index < 0) {
      const result = this.createEntity(
        suggestion.item.start,
        suggestion.item.end,
        suggestion.item.type,
      );
      if (!result.ok) return -1;
      index = this.entities.length - 1;
    }
    suggestion.status = "accepted";
    return index;
  }

  /** Accept a suggested relation, pulling in its endpoint entities. */
  acceptSuggestedRelation(k: number): EditResult {
    const layer = this.suggestions;
    const suggestion = layer?.relations[k];
    if (!layer || !suggestion) return blocked("dangling-index", `no suggested relation ${k}`);
    const headIdx = this.acceptSuggestedEntity(suggestion.item.head);
    const tailIdx = this.acceptSuggestedEntity(suggestion.item.tail);
    if (headIdx < 0 || tailIdx < 0) {
      return blocked("dangling-index", "suggested endpoints could not be added");
    }
    const result = this.addRelation(headIdx, tailIdx, suggestion.item.type);
    if (result.ok || result.rule === "duplicate-relation") {
      suggestion.status = "accepted";
      return edited;
    }
    return result;
  }

  /** Accept a suggested attribute (entity index is a suggestion index). */
  acceptSuggestedAttribute(k: number): EditResult {
    const suggestion = this.suggestions?.attributes[k];
    if (!suggestion) return blocked("dangling-index", `no suggested attribute ${k}`);
    const entityIdx = this.acceptSuggestedEntity(suggestion.item.entity);
    if (entityIdx < 0) {
      return blocked("dangling-index", "suggested carrier entity could not be added");
    }
    const entity = this.entities[entityIdx];
    if (!entity.attributes.includes(suggestion.item.type)) {
      const result = this.toggleAttribute(entityIdx, suggestion.item.type);
      if (!result.ok) return result;
    }
    suggestion.status = "accepted";
    return edited;
  }

  rejectSuggestion(kind: keyof SuggestionLayer, k: number): void {
    const layer = this.suggestions;
    if (!layer) return;
    const list = layer[kind] as Suggested<unknown>[];
    if (list[k]) list[k].status = "rejected";
  }

  acceptAllSuggestions(): void {
    if (!this.suggestions) return;
    this.suggestions.entities.forEach((_, k) => this.acceptSuggestedEntity(k));
    this.suggestions.attributes.forEach((_, k) => this.acceptSuggestedAttribute(k));
    this.suggestions.relations.forEach((_, k) => this.acceptSuggestedRelation(k));
  }

  // -- validation mirror and serialization ---------------------------------

  /** Client-side copy of the server's structural rules (defense in depth:
   * the edit guards should make violations unrepresentable). */
  structuralErrors(): string[] {
    const errors: string[] = [];
    const seen = new Map<string, number>();
    this.entities.forEach((e, i) => {
      if (!(e.start >= 0 && e.start < e.end && e.end <= this.tokens.length)) {
        errors.push(`span-bounds: entity ${i} span [${e.start}, ${e.end})`);
      }
      const key = `${e.start}:${e.end}`;
      if (seen.has(key)) errors.push(`span-unique: entity ${i} duplicates ${seen.get(key)}`);
      else seen.set(key, i);
    });
    const triples = new Set<string>();
    this.relations.forEach((r, i) => {
      if (!this.entities[r.head] || !this.entities[r.tail]) {
        errors.push(`dangling-index: relation ${i}`);
        return;
      }
      if (r.head === r.tail) errors.push(`self-cycle: relation ${i}`);
      const key = `${r.head}:${r.tail}:${r.type}`;
      if (triples.has(key)) errors.push(`duplicate-relation: relation ${i}`);
      triples.add(key);
    });
    return errors;
  }

  serialize(): WireSentence {
    const attributes = this.entities
      .map((e, i) => ({ entity: i, types: sortAttributeTypes(e.attributes) }))
      .filter((record) => record.types.length > 0);
    return {
      id: this.id,
      source: this.source,
      split: this.split,
      tokens: [...this.tokens],
      entities: this.entities.map((e) => ({ type: e.type, start: e.start, end: e.end })),
      relations: this.relations.map((r) => ({ type: r.type, head: r.head, tail: r.tail })),
      attributes,
    };
  }

  static fromWire(sentence: WireSentence): UiGraphState {
    const state = new UiGraphState(
      sentence.id,
      sentence.tokens,
      sentence.split,
      sentence.source,
    );
    state.entities = sentence.entities.map((e) => ({
      type: e.type,
      start: e.start,
      end: e.end,
      attributes: [],
    }));
    for (const record of sentence.attributes ?? []) {
      const entity = state.entities[record.entity];
      if (entity) entity.attributes = sortAttributeTypes(record.types);
    }
    state.relations = (sentence.relations ?? []).map((r) => ({
      type: r.type,
      head: r.head,
      tail: r.tail,
    }));
    return state;
  }
}

/** Wire types shared with the annotation service (the corpus JSON shape). */

export const ENTITY_TYPES = [
  "factor", "evidence", "epistemic", "association", "magnitude", "qualifier",
] as const;

export const ATTRIBUTE_TYPES = [
  "causation", "comparison", "indicates", "sign+", "sign-", "correlation", "test",
] as const;

export const RELATION_TYPES = [
  "arg0", "arg1", "comp_to", "modifier", "subtype", "q+", "q-",
] as const;

export type EntityType = (typeof ENTITY_TYPES)[number];
export type AttributeType = (typeof ATTRIBUTE_TYPES)[number];
export type RelationType = (typeof RELATION_TYPES)[number];

export interface WireEntity {
  type: string;
  start: number;
  end: number;
}

export interface WireRelation {
  type: string;
  head: number;
  tail: number;
}

export interface WireAttribute {
  entity: number;
  types: string[];
}

export interface WireGraph {
  tokens: string[];
  entities: WireEntity[];
  relations: WireRelation[];
  attributes: WireAttribute[];
}

export interface WireSentence extends WireGraph {
  id: string;
  source: string;
  split: string;
}

/** Per-element confidences attached to /suggest responses. */
export interface SuggestionScores {
  entities: number[];
  relations: number[];
  attributes: { entity: number; types: Record<string, number> }[];
}

export interface SuggestResponse extends WireGraph {
  id: string | null;
  scores: SuggestionScores;
}

export interface NextResponse {
  id: string;
  tokens: string[];
  split: string;
  source: string;
  suggestions_enabled: boolean;
}

export const isEntityType = (value: string): value is EntityType =>
  (ENTITY_TYPES as readonly string[]).includes(value);

export const isAttributeType = (value: string): value is AttributeType =>
  (ATTRIBUTE_TYPES as readonly string[]).includes(value);

export const isRelationType = (value: string): value is RelationType =>
  (RELATION_TYPES as readonly string[]).includes(value);

const attributeOrder = new Map(ATTRIBUTE_TYPES.map((t, i) => [t as string, i]));

/** Canonical attribute ordering used by the server's serializer. */
export function sortAttributeTypes(types: string[]): string[] {
  return [...new Set(types)].sort(
    (a, b) => (attributeOrder.get(a) ?? 99) - (attributeOrder.get(b) ?? 99),
  );
}

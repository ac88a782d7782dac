"""Corpus parsing, serialization, statistics, and label transforms.

The native file format is UTF-8 JSON Lines, one sentence per line:

    {"id": str, "source": str, "split": str, "tokens": [str],
     "entities": [{"type": str, "start": int, "end": int}],
     "relations": [{"type": str, "head": int, "tail": int}],
     "attributes": [{"entity": int, "types": [str]}]}

Serialization is canonical (fixed key order, compact separators, attribute
records sorted by entity with canonically ordered types, empty records
dropped), so parse(serialize(c)) == c for any corpus and
serialize(parse(b)) == b for canonical bytes.
"""

from __future__ import annotations

import io
import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .schema import (
    ATTRIBUTE_TYPES,
    ENTITY_TYPES,
    AttributeAssignment,
    AttributeType,
    ClaimGraph,
    Entity,
    EntityType,
    Relation,
    RelationType,
    Span,
    sort_attributes,
    validate_structural,
)

SOURCES = ("sbs", "pubmed", "cord19", "perturbation", "other")
SPLITS = ("train", "val", "test", "unlabeled")

# Heuristic phrases marking claims and causal language.
CLAIM_KEYWORDS = (
    "associated with", "reduce", "increase", "leads to", "led to",
    "our result", "greater", "less", "more", "cause", "demonstrate",
    "show", "improve",
)


@dataclass(frozen=True)
class SentenceMeta:
    id: str
    source: str = "other"
    split: str = "unlabeled"

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class AnnotatedSentence:
    graph: ClaimGraph
    meta: SentenceMeta

    @property
    def id(self) -> str:
        return self.meta.id


@dataclass(frozen=True)
class Corpus:
    """Ordered, immutable collection of annotated sentences.

    Iteration order equals file order; sentence ids are unique.
    """

    sentences: tuple[AnnotatedSentence, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        seen = set()
        for s in self.sentences:
            if s.id in seen:
                raise ValueError(f"duplicate sentence id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    def by_id(self, sid: str) -> AnnotatedSentence:
        for s in self.sentences:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def subset(self, split: str) -> "Corpus":
        return Corpus(tuple(s for s in self.sentences if s.meta.split == split))


class CorpusFormatError(ValueError):
    """Raised when a corpus file cannot be parsed; carries all line errors."""

    def __init__(self, errors: list[tuple[int, str]]):
        self.errors = errors
        shown = "; ".join(f"line {ln}: {msg}" for ln, msg in errors[:5])
        if len(errors) > 5:
            shown += f"; ... ({len(errors)} errors total)"
        super().__init__(shown)


_ENTITY_BY_VALUE = {t.value: t for t in ENTITY_TYPES}
_RELATION_BY_VALUE = {t.value: t for t in RelationType}
_ATTRIBUTE_BY_VALUE = {t.value: t for t in ATTRIBUTE_TYPES}


def graph_to_json(graph: ClaimGraph) -> dict:
    """Wire-shape dict for one graph (canonical attribute ordering)."""
    attrs = graph.attribute_map()
    return {
        "tokens": list(graph.tokens),
        "entities": [{"type": e.etype.value, "start": e.span.start, "end": e.span.end}
                     for e in graph.entities],
        "relations": [{"type": r.rtype.value, "head": r.head, "tail": r.tail}
                      for r in graph.relations],
        "attributes": [{"entity": i, "types": [t.value for t in types]}
                       for i, types in sorted(attrs.items())],
    }


def graph_from_json(obj: dict, check_structure: bool = True) -> ClaimGraph:
    """Parse one wire-shape dict; raises ValueError on malformed content.

    ``check_structure=False`` skips the structural-validity gate so callers
    (the validate command) can report rule violations themselves.
    """
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    tokens = obj.get("tokens")
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ValueError("tokens must be a list of strings")

    entities = []
    for ent in obj.get("entities", []):
        etype = _ENTITY_BY_VALUE.get(ent.get("type"))
        if etype is None:
            raise ValueError(f"unknown entity type {ent.get('type')!r}")
        start, end = ent.get("start"), ent.get("end")
        if not isinstance(start, int) or not isinstance(end, int):
            raise ValueError("entity start/end must be integers")
        if not (0 <= start < end):
            raise ValueError(f"invalid span [{start}, {end}) (span-bounds rule)")
        entities.append(Entity(Span(start, end), etype))

    relations = []
    for rel in obj.get("relations", []):
        rtype = _RELATION_BY_VALUE.get(rel.get("type"))
        if rtype is None:
            raise ValueError(f"unknown relation type {rel.get('type')!r}")
        head, tail = rel.get("head"), rel.get("tail")
        if not isinstance(head, int) or not isinstance(tail, int):
            raise ValueError("relation head/tail must be integers")
        relations.append(Relation(head, tail, rtype))

    attributes = []
    for rec in obj.get("attributes", []):
        idx = rec.get("entity")
        if not isinstance(idx, int):
            raise ValueError("attribute entity must be an integer")
        types = []
        for name in rec.get("types", []):
            atype = _ATTRIBUTE_BY_VALUE.get(name)
            if atype is None:
                raise ValueError(f"unknown attribute type {name!r}")
            types.append(atype)
        attributes.append(AttributeAssignment(idx, sort_attributes(types)))

    graph = ClaimGraph(tokens, entities, relations, attributes)
    if check_structure:
        report = validate_structural(graph)
        if not report.ok:
            raise ValueError("; ".join(
                f"{i.rule}: {i.message}" for i in report.errors))
    return graph


def sentence_to_json(sentence: AnnotatedSentence) -> dict:
    out = {"id": sentence.meta.id, "source": sentence.meta.source,
           "split": sentence.meta.split}
    out.update(graph_to_json(sentence.graph))
    return out


def sentence_from_json(obj: dict, check_structure: bool = True) -> AnnotatedSentence:
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    sid = obj.get("id")
    if not isinstance(sid, str) or not sid:
        raise ValueError("missing or empty id")
    meta = SentenceMeta(sid, obj.get("source", "other"), obj.get("split", "unlabeled"))
    return AnnotatedSentence(graph_from_json(obj, check_structure), meta)


def parse_corpus(data: bytes | str | io.IOBase) -> Corpus:
    """Parse newline-delimited records; all-or-nothing with line numbers."""
    if isinstance(data, io.IOBase):
        data = data.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")

    sentences: list[AnnotatedSentence] = []
    errors: list[tuple[int, str]] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append((lineno, f"invalid JSON: {exc.msg}"))
            continue
        try:
            sent = sentence_from_json(obj)
        except ValueError as exc:
            errors.append((lineno, str(exc)))
            continue
        if sent.id in seen_ids:
            errors.append((lineno, f"duplicate sentence id {sent.id!r}"))
            continue
        seen_ids.add(sent.id)
        sentences.append(sent)
    if errors:
        raise CorpusFormatError(errors)
    return Corpus(tuple(sentences))


def serialize_corpus(corpus: Corpus) -> bytes:
    """Canonical byte form; refuses structurally invalid graphs."""
    lines = []
    for sent in corpus:
        report = validate_structural(sent.graph)
        if not report.ok:
            raise ValueError(f"sentence {sent.id!r} is structurally invalid: "
                             + report.errors[0].message)
        lines.append(json.dumps(sentence_to_json(sent),
                                ensure_ascii=False, separators=(",", ":")))
    return ("".join(line + "\n" for line in lines)).encode("utf-8")


def load_corpus(path) -> Corpus:
    with open(path, "rb") as fh:
        return parse_corpus(fh.read())


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_corpus(corpus))


def import_span_json(data: bytes | str) -> Corpus:
    """Import adapter for the common span-annotation JSON layout: a JSON
    array of records with typed half-open token spans and head/tail index
    relations.  Entity labels containing attribute components (the collapsed
    "etype|attr|..." form) are expanded back into attribute records.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    records = json.loads(data)
    if not isinstance(records, list):
        raise ValueError("expected a JSON array of sentence records")
    sentences = []
    for i, rec in enumerate(records):
        sid = str(rec.get("orig_id", rec.get("id", i)))
        raw_entities = rec.get("entities", [])
        entities, attributes = [], []
        for j, ent in enumerate(raw_entities):
            label = parse_collapsed_label(ent["type"])
            entities.append({"type": label.etype.value,
                             "start": ent["start"], "end": ent["end"]})
            if label.attrs:
                attributes.append({"entity": j,
                                   "types": [t.value for t in label.attrs]})
        obj = {"id": sid, "tokens": rec.get("tokens", []),
               "entities": entities,
               "relations": rec.get("relations", []),
               "attributes": attributes}
        obj["source"] = rec.get("source", "other")
        obj["split"] = rec.get("split", "unlabeled")
        sentences.append(sentence_from_json(obj))
    return Corpus(tuple(sentences))


# ---------------------------------------------------------------------------
# Statistics


@dataclass
class CorpusStats:
    words: int
    entity_counts: Counter
    relation_counts: Counter
    attribute_counts: Counter

    @property
    def entities(self) -> int:
        return sum(self.entity_counts.values())

    @property
    def relations(self) -> int:
        return sum(self.relation_counts.values())

    @property
    def attributes(self) -> int:
        return sum(self.attribute_counts.values())

    @property
    def total_labels(self) -> int:
        return self.entities + self.relations + self.attributes

    def density(self, count: int) -> float:
        """Labels per word, as a ratio (0 when the corpus is empty)."""
        return count / self.words if self.words else 0.0

    def to_json(self) -> dict:
        def table(counts: Counter, order) -> dict:
            return {t.value: counts.get(t.value, 0) for t in order}
        return {
            "words": self.words,
            "entities": self.entities,
            "relations": self.relations,
            "attributes": self.attributes,
            "total_labels": self.total_labels,
            "densities": {
                "entities": round(100 * self.density(self.entities), 2),
                "relations": round(100 * self.density(self.relations), 2),
                "attributes": round(100 * self.density(self.attributes), 2),
                "total": round(100 * self.density(self.total_labels), 2),
            },
            "per_label": {
                "entities": table(self.entity_counts, ENTITY_TYPES),
                "attributes": table(self.attribute_counts, ATTRIBUTE_TYPES),
                "relations": table(self.relation_counts, RelationType),
            },
        }

    def to_text(self) -> str:
        j = self.to_json()
        lines = [
            f"words {self.words}",
            f"entities {self.entities} / relations {self.relations} / attributes {self.attributes}",
            f"total labels {self.total_labels}",
            "densities per word: entities {entities}% relations {relations}% "
            "attributes {attributes}% total {total}%".format(**j["densities"]),
            "",
            f"{'label':>14}  {'count':>6}  per word",
        ]
        for group in ("entities", "attributes", "relations"):
            for name, count in j["per_label"][group].items():
                lines.append(f"{name:>14}  {count:6d}  {100 * self.density(count):.2f}%")
        return "\n".join(lines)


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Label counts and per-word densities.

    Words are counted as tokens given in the file.  The attribute count is
    over (entity, attribute type) pairs, so an entity carrying two attribute
    labels contributes two.
    """
    words = 0
    ents: Counter = Counter()
    rels: Counter = Counter()
    attrs: Counter = Counter()
    for sent in corpus:
        g = sent.graph
        words += len(g.tokens)
        for e in g.entities:
            ents[e.etype.value] += 1
        for r in g.relations:
            rels[r.rtype.value] += 1
        for _, types in g.attribute_map().items():
            for t in types:
                attrs[t.value] += 1
    return CorpusStats(words, ents, rels, attrs)


# ---------------------------------------------------------------------------
# Keyword heuristics


@dataclass(frozen=True)
class KeywordMatch:
    index: int  # position in the input list
    tokens: tuple[str, ...]
    keywords: tuple[str, ...]  # matched keywords, input-list order


def keyword_filter(sentences, keywords=CLAIM_KEYWORDS) -> list[KeywordMatch]:
    """Sentences containing any keyword as a contiguous, case-insensitive
    token sequence (multi-word keywords span token boundaries; no stemming).
    """
    needles = [tuple(k.lower().split()) for k in keywords]
    out = []
    for idx, tokens in enumerate(sentences):
        lowered = [t.lower() for t in tokens]
        hits = []
        for raw, needle in zip(keywords, needles):
            k = len(needle)
            if k == 0:
                continue
            if any(tuple(lowered[i:i + k]) == needle
                   for i in range(len(lowered) - k + 1)):
                hits.append(raw)
        if hits:
            out.append(KeywordMatch(idx, tuple(tokens), tuple(hits)))
    return out


# ---------------------------------------------------------------------------
# attrs-as-ents transform


@dataclass(frozen=True)
class CollapsedLabel:
    """An entity type fused with its (possibly empty) attribute set."""

    etype: EntityType
    attrs: tuple[AttributeType, ...]

    def __str__(self) -> str:
        return "|".join([self.etype.value] + [t.value for t in self.attrs])


def parse_collapsed_label(text: str) -> CollapsedLabel:
    parts = text.split("|")
    etype = _ENTITY_BY_VALUE.get(parts[0])
    if etype is None:
        raise ValueError(f"unknown entity type {parts[0]!r} in collapsed label {text!r}")
    attrs = []
    for name in parts[1:]:
        atype = _ATTRIBUTE_BY_VALUE.get(name)
        if atype is None:
            raise ValueError(f"unknown attribute type {name!r} in collapsed label {text!r}")
        attrs.append(atype)
    return CollapsedLabel(etype, sort_attributes(attrs))


@dataclass(frozen=True)
class CollapsedGraph:
    """Graph whose entities carry collapsed labels and which has no
    standalone attribute records."""

    tokens: tuple[str, ...]
    entities: tuple[tuple[Span, CollapsedLabel], ...]
    relations: tuple[Relation, ...]


def attrs_as_ents_encode(graph: ClaimGraph) -> CollapsedGraph:
    """Fold each entity's attribute set into its label; relations unchanged."""
    attr_map = graph.attribute_map()
    entities = tuple(
        (e.span, CollapsedLabel(e.etype, attr_map.get(i, ())))
        for i, e in enumerate(graph.entities))
    return CollapsedGraph(tuple(graph.tokens), entities, tuple(graph.relations))


def attrs_as_ents_decode(collapsed: CollapsedGraph) -> ClaimGraph:
    """Inverse of :func:`attrs_as_ents_encode`."""
    entities = tuple(Entity(span, label.etype) for span, label in collapsed.entities)
    attributes = tuple(
        AttributeAssignment(i, label.attrs)
        for i, (_, label) in enumerate(collapsed.entities) if label.attrs)
    return ClaimGraph(collapsed.tokens, entities, collapsed.relations, attributes)


def collapsed_label_universe(observed_only: bool = True,
                             corpus: Corpus | None = None) -> list[CollapsedLabel]:
    """Collapsed label inventory.

    With ``observed_only`` (the default) only combinations present in the
    corpus are returned, since the exhaustive 6 * 2**7 = 768 label set is
    mostly empty classes.  Order is deterministic.
    """
    if observed_only:
        if corpus is None:
            raise ValueError("observed_only requires a corpus")
        seen = set()
        for sent in corpus:
            for _, label in attrs_as_ents_encode(sent.graph).entities:
                seen.add(label)
        key = lambda l: (ENTITY_TYPES.index(l.etype),
                         len(l.attrs),
                         tuple(ATTRIBUTE_TYPES.index(a) for a in l.attrs))
        return sorted(seen, key=key)
    out = []
    for etype in ENTITY_TYPES:
        for mask in range(2 ** len(ATTRIBUTE_TYPES)):
            attrs = tuple(t for b, t in enumerate(ATTRIBUTE_TYPES) if mask >> b & 1)
            out.append(CollapsedLabel(etype, sort_attributes(attrs)))
    return out


# ---------------------------------------------------------------------------
# Splitting


def split_corpus(corpus: Corpus, seed: int = 0,
                 fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
                 ) -> tuple[Corpus, Corpus, Corpus]:
    """Deterministic train/val/test partition.

    Sentences already tagged train/val/test keep their split verbatim; only
    unlabeled sentences are dealt out by the seeded shuffle.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    buckets = {"train": [], "val": [], "test": []}
    unassigned = []
    for i, sent in enumerate(corpus):
        if sent.meta.split in buckets:
            buckets[sent.meta.split].append((i, sent))
        else:
            unassigned.append((i, sent))

    if unassigned:
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(unassigned))
        n = len(unassigned)
        n_train = round(fractions[0] * n)
        n_val = round(fractions[1] * n)
        n_val = min(n_val, n - n_train)
        for rank, j in enumerate(order):
            i, sent = unassigned[j]
            split = ("train" if rank < n_train
                     else "val" if rank < n_train + n_val else "test")
            sent = AnnotatedSentence(sent.graph, replace(sent.meta, split=split))
            buckets[split].append((i, sent))

    def build(name: str) -> Corpus:
        return Corpus(tuple(s for _, s in sorted(buckets[name], key=lambda p: p[0])))

    return build("train"), build("val"), build("test")

"""Deterministic generators for the bundled corpora.

Two corpora ship with the repository (regenerate with
``python -m claimgraph.datagen <outdir>``):

* ``stats_corpus.jsonl`` -- 901 schema-valid sentences engineered so the
  corpus-level label counts land exactly on the published per-type support
  table (entities 5548, relations 5346, attributes 1844, 20070 words,
  721/80/100 split, source mix 336 sbs / 411 pubmed / 135 cord19 / 19
  train-only perturbations);
* ``toy_corpus.jsonl`` -- 20 short sentences with per-sentence-unique
  vocabulary covering every label type, used by the overfitting and
  service tests.
"""

from __future__ import annotations

import sys
from pathlib import Path

from .corpus import AnnotatedSentence, Corpus, SentenceMeta, save_corpus
from .schema import (
    AttributeAssignment,
    AttributeType,
    ClaimGraph,
    Entity,
    EntityType,
    Relation,
    RelationType,
    Span,
)

N_SENTENCES = 901

# Per-label targets (corpus-wide supports).
ENTITY_TARGETS = {
    EntityType.FACTOR: 2756, EntityType.ASSOCIATION: 1290,
    EntityType.EVIDENCE: 230, EntityType.EPISTEMIC: 299,
    EntityType.MAGNITUDE: 613, EntityType.QUALIFIER: 360,
}
RELATION_TARGETS = {
    RelationType.ARG0: 1325, RelationType.ARG1: 1384, RelationType.COMP_TO: 187,
    RelationType.MODIFIER: 1582, RelationType.SUBTYPE: 156,
    RelationType.Q_PLUS: 504, RelationType.Q_MINUS: 208,
}
ATTRIBUTE_TARGETS = {
    AttributeType.CAUSATION: 342, AttributeType.CORRELATION: 320,
    AttributeType.SIGN_PLUS: 542, AttributeType.SIGN_MINUS: 202,
    AttributeType.COMPARISON: 329, AttributeType.INDICATES: 84,
    AttributeType.TEST: 25,
}
TOTAL_WORDS = 20070


def _stats_sentence(i: int, attrs_first_assoc: tuple) -> tuple[ClaimGraph, int | None]:
    """Sentence i's graph under the regular dealing scheme (see
    build_stats_corpus) plus the second association's entity index, if any."""
    entities = [
        Entity(Span(0, 1), EntityType.FACTOR),
        Entity(Span(1, 2), EntityType.FACTOR),
        Entity(Span(2, 3), EntityType.FACTOR),
        Entity(Span(3, 4), EntityType.ASSOCIATION),
    ]
    f0, f1, f2, a1 = 0, 1, 2, 3
    next_pos = 4
    extra = {}
    for flag, etype in ((i < 53, EntityType.FACTOR),
                        (i < 389, EntityType.ASSOCIATION),
                        (i < 613, EntityType.MAGNITUDE),
                        (i < 360, EntityType.QUALIFIER),
                        (i < 299, EntityType.EPISTEMIC),
                        (i < 230, EntityType.EVIDENCE)):
        if flag:
            extra[etype] = len(entities)
            entities.append(Entity(Span(next_pos, next_pos + 1), etype))
            next_pos += 1
    a2 = extra.get(EntityType.ASSOCIATION)

    relations = [Relation(a1, f0, RelationType.ARG0),
                 Relation(a1, f1, RelationType.ARG1)]
    if a2 is not None:
        relations += [Relation(a2, f0, RelationType.ARG0),
                      Relation(a2, f1, RelationType.ARG1)]
    if i < 35:
        relations.append(Relation(a1, f1, RelationType.ARG0))
    if i < 94:
        relations.append(Relation(a1, f2, RelationType.ARG1))
    for etype in (EntityType.MAGNITUDE, EntityType.QUALIFIER,
                  EntityType.EPISTEMIC, EntityType.EVIDENCE):
        if etype in extra:
            relations.append(Relation(a1, extra[etype], RelationType.MODIFIER))
    if 613 <= i < 693:
        relations.append(Relation(a1, f2, RelationType.MODIFIER))
    if i < 504:
        relations.append(Relation(f0, f1, RelationType.Q_PLUS))
    if i < 208:
        relations.append(Relation(f1, f2, RelationType.Q_MINUS))
    if i < 156:
        relations.append(Relation(f2, f0, RelationType.SUBTYPE))
    if 116 <= i < 303:
        relations.append(Relation(a1, f2, RelationType.COMP_TO))

    attributes = []
    if attrs_first_assoc:
        attributes.append(AttributeAssignment.of(a1, attrs_first_assoc))

    n_tokens = 23 if i < 248 else 22
    tokens = [f"w{i}_{j}" for j in range(n_tokens)]
    return ClaimGraph(tokens, entities, relations, attributes), a2


def build_stats_corpus() -> Corpus:
    """The 901-sentence synthetic corpus hitting the published counts."""
    # Lay out the 1290 associations as one list: first-association of every
    # sentence, then the second associations of sentences 0..388.  Attributes
    # are dealt onto that list in contiguous runs (wrapping once), so each
    # association carries at most two distinct labels.
    assoc_attrs: list[list[AttributeType]] = [[] for _ in range(1290)]
    cursor = 0
    for atype, count in ATTRIBUTE_TARGETS.items():
        for _ in range(count):
            assoc_attrs[cursor % 1290].append(atype)
            cursor += 1

    sentences = []
    for i in range(N_SENTENCES):
        graph, a2 = _stats_sentence(i, tuple(assoc_attrs[i]))
        if a2 is not None and assoc_attrs[901 + i]:
            graph = ClaimGraph(
                graph.tokens, graph.entities, graph.relations,
                list(graph.attributes) + [AttributeAssignment.of(a2, assoc_attrs[901 + i])])
        if i < 19:
            source = "perturbation"
        elif i < 19 + 336:
            source = "sbs"
        elif i < 19 + 336 + 411:
            source = "pubmed"
        else:
            source = "cord19"
        split = "train" if i < 721 else "val" if i < 801 else "test"
        sentences.append(AnnotatedSentence(graph, SentenceMeta(f"s{i:04d}", source, split)))
    return Corpus(tuple(sentences))


# ---------------------------------------------------------------------------
# Toy training corpus


def build_toy_corpus(n: int = 20) -> Corpus:
    """Small overfittable corpus: unique vocabulary per sentence, every
    entity / relation / attribute type covered."""
    attr_cycle = list(AttributeType)
    extra_cycle = [EntityType.MAGNITUDE, EntityType.QUALIFIER,
                   EntityType.EVIDENCE, EntityType.EPISTEMIC]
    sentences = []
    for i in range(n):
        t = lambda name: f"{name}{i}"
        tokens = [t("subj"), t("verb"), t("link"), t("obj"), t("mod"), t("end")]
        entities = [
            Entity(Span(0, 1), EntityType.FACTOR),
            Entity(Span(1, 3), EntityType.ASSOCIATION),
            Entity(Span(3, 4), EntityType.FACTOR),
        ]
        relations = [Relation(1, 0, RelationType.ARG0),
                     Relation(1, 2, RelationType.ARG1)]
        attrs = [attr_cycle[i % 7]]
        if i % 3 == 0:
            attrs.append(attr_cycle[(i + 3) % 7])
        attributes = [AttributeAssignment.of(1, attrs)]

        extra_type = extra_cycle[i % 4]
        entities.append(Entity(Span(4, 5), extra_type))
        relations.append(Relation(1, 3, RelationType.MODIFIER))
        if i % 4 == 0:
            relations.append(Relation(0, 2, RelationType.Q_PLUS))
        elif i % 4 == 1:
            relations.append(Relation(0, 2, RelationType.Q_MINUS))
        elif i % 4 == 2:
            relations.append(Relation(2, 0, RelationType.SUBTYPE))
        else:
            relations.append(Relation(1, 2, RelationType.COMP_TO))
        sentences.append(AnnotatedSentence(
            ClaimGraph(tokens, entities, relations, attributes),
            SentenceMeta(f"toy{i:02d}", "other", "train")))
    return Corpus(tuple(sentences))


def main(argv=None) -> int:
    outdir = Path((argv or sys.argv[1:])[0] if (argv or sys.argv[1:]) else "data")
    outdir.mkdir(parents=True, exist_ok=True)
    save_corpus(build_stats_corpus(), outdir / "stats_corpus.jsonl")
    save_corpus(build_toy_corpus(), outdir / "toy_corpus.jsonl")
    print(f"wrote {outdir / 'stats_corpus.jsonl'} and {outdir / 'toy_corpus.jsonl'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

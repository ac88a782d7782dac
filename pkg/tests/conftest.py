"""Shared fixtures and random-graph generators."""

from pathlib import Path

import numpy as np
import pytest

from claimgraph.corpus import AnnotatedSentence, Corpus, SentenceMeta
from claimgraph.schema import (
    ATTRIBUTE_TYPES,
    ENTITY_TYPES,
    RELATION_TYPES,
    AttributeAssignment,
    ClaimGraph,
    Entity,
    EntityType,
    Relation,
    Span,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def random_graph(rng: np.random.Generator, max_tokens: int = 8,
                 max_entities: int = 5) -> ClaimGraph:
    """A random schema-valid graph (attributes only on associations)."""
    n = int(rng.integers(1, max_tokens + 1))
    tokens = [f"t{i}" for i in range(n)]
    all_spans = [(s, e) for s in range(n) for e in range(s + 1, n + 1)]
    k = int(rng.integers(0, min(max_entities, len(all_spans)) + 1))
    chosen = rng.choice(len(all_spans), size=k, replace=False)
    entities = []
    for i in sorted(chosen):
        etype = ENTITY_TYPES[int(rng.integers(len(ENTITY_TYPES)))]
        entities.append(Entity(Span(*all_spans[i]), etype))

    relations = []
    if k >= 2:
        triples = {(h, t) for h in range(k) for t in range(k) if h != t}
        for head, tail in sorted(triples):
            for rtype in RELATION_TYPES:
                if rng.random() < 0.15:
                    relations.append(Relation(head, tail, rtype))

    attributes = []
    for i, ent in enumerate(entities):
        if ent.etype is EntityType.ASSOCIATION:
            picked = [t for t in ATTRIBUTE_TYPES if rng.random() < 0.3]
            if picked:
                attributes.append(AttributeAssignment.of(i, picked))
    return ClaimGraph(tokens, entities, relations, attributes)


def random_corpus(rng: np.random.Generator, size: int, **kwargs) -> Corpus:
    sentences = []
    for i in range(size):
        sentences.append(AnnotatedSentence(
            random_graph(rng, **kwargs), SentenceMeta(f"r{i:05d}")))
    return Corpus(tuple(sentences))


@pytest.fixture(scope="session")
def toy_corpus():
    from claimgraph.corpus import load_corpus
    return load_corpus(DATA_DIR / "toy_corpus.jsonl")


@pytest.fixture(scope="session")
def stats_corpus():
    from claimgraph.corpus import load_corpus
    return load_corpus(DATA_DIR / "stats_corpus.jsonl")


@pytest.fixture(scope="session")
def tiny_model():
    """Small seeded model + provider + two-sentence batch, reused across tests."""
    from claimgraph.datagen import build_toy_corpus
    from claimgraph.model.params import STANDARD_ENTITY_LABELS, init_params
    from claimgraph.model.providers import TokenLookupProvider

    corpus = build_toy_corpus(2)
    provider = TokenLookupProvider.from_corpus(corpus, 16)
    rng = np.random.default_rng(0)
    params = init_params(16, 6, STANDARD_ENTITY_LABELS, rng, provider=provider)
    return params, provider, list(corpus)

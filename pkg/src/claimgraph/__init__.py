"""claimgraph: fine-grained claim knowledge graphs over text spans.

Data model and validators, corpus tooling, a span-attention extraction
model with exact gradients, training and evaluation harnesses, and an
annotation suggestion service.
"""

from .schema import (
    AttributeAssignment,
    AttributeType,
    ClaimGraph,
    Entity,
    EntityType,
    Relation,
    RelationType,
    Span,
    ValidationIssue,
    ValidationReport,
    overlapping_entity_pairs,
    validate_schema,
    validate_structural,
)
from .corpus import (
    AnnotatedSentence,
    CollapsedLabel,
    Corpus,
    CorpusFormatError,
    CorpusStats,
    SentenceMeta,
    attrs_as_ents_decode,
    attrs_as_ents_encode,
    collapsed_label_universe,
    corpus_stats,
    keyword_filter,
    load_corpus,
    parse_corpus,
    save_corpus,
    serialize_corpus,
    split_corpus,
)
from .metrics import (
    GraphDiff,
    MatchCriteria,
    MetricsReport,
    aggregate_runs,
    graph_diff,
    score_corpus,
    score_pair,
)
from .estimator import ClaimGraphExtractor
from .training import TrainConfig, TrainReport, grad_check, lr_at_step, optimizer_step, train

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence", "AttributeAssignment", "AttributeType",
    "ClaimGraph", "ClaimGraphExtractor", "CollapsedLabel", "Corpus",
    "CorpusFormatError", "CorpusStats", "Entity", "EntityType", "GraphDiff",
    "MatchCriteria", "MetricsReport", "Relation", "RelationType",
    "SentenceMeta", "Span", "TrainConfig", "TrainReport", "ValidationIssue",
    "ValidationReport", "aggregate_runs", "attrs_as_ents_decode",
    "attrs_as_ents_encode", "collapsed_label_universe", "corpus_stats",
    "grad_check", "graph_diff", "keyword_filter", "load_corpus",
    "lr_at_step", "optimizer_step", "overlapping_entity_pairs",
    "parse_corpus", "save_corpus", "score_corpus", "score_pair",
    "serialize_corpus", "split_corpus", "train", "validate_schema",
    "validate_structural",
]

"""Scoring harness tests, including the exhaustive brute-force matcher oracle."""

from collections import Counter

import numpy as np
import pytest

from claimgraph.corpus import AnnotatedSentence, Corpus, SentenceMeta
from claimgraph.metrics import (
    MatchCriteria,
    MetricsReport,
    aggregate_runs,
    attribute_items,
    entity_items,
    graph_diff,
    relation_items,
    score_corpus,
    score_pair,
)
from claimgraph.schema import (
    AttributeAssignment,
    AttributeType,
    ClaimGraph,
    Entity,
    EntityType,
    Relation,
    RelationType,
    Span,
)

from conftest import random_graph


# --- Independent oracle: exhaustive matching over all candidate pairings ---

def _oracle_items(graph, task, criteria):
    items = []
    if task == "entities":
        for e in graph.entities:
            items.append((e.etype.value, (e.span.start, e.span.end, e.etype.value)))
    elif task == "attributes":
        for idx, types in graph.attribute_map().items():
            ent = graph.entities[idx]
            for t in types:
                key = [ent.span.start, ent.span.end, t.value]
                if criteria.attribute_entity_type:
                    key.append(ent.etype.value)
                items.append((t.value, tuple(key)))
    else:
        for r in graph.relations:
            head, tail = graph.entities[r.head], graph.entities[r.tail]
            key = [r.rtype.value, head.span.start, head.span.end,
                   tail.span.start, tail.span.end]
            if criteria.relation_strict:
                key += [head.etype.value, tail.etype.value]
            items.append((r.rtype.value, tuple(key)))
    return items


def _best_matching(gold, pred):
    """Maximum matching size by brute force over all injective assignments."""
    if not gold:
        return []
    best = []

    def recurse(i, used, current):
        nonlocal best
        if i == len(gold):
            if len(current) > len(best):
                best = list(current)
            return
        # option 1: leave gold[i] unmatched
        recurse(i + 1, used, current)
        # option 2: match it to any compatible unused pred item
        for j, p in enumerate(pred):
            if j not in used and p[1] == gold[i][1]:
                used.add(j)
                current.append((i, j))
                recurse(i + 1, used, current)
                current.pop()
                used.remove(j)

    recurse(0, set(), [])
    return best


def brute_force_counts(gold_graph, pred_graph, task, criteria=MatchCriteria()):
    gold = _oracle_items(gold_graph, task, criteria)
    pred = _oracle_items(pred_graph, task, criteria)
    matching = _best_matching(gold, pred)
    tp = Counter(gold[i][0] for i, _ in matching)
    fn = Counter(g[0] for k, g in enumerate(gold)
                 if k not in {i for i, _ in matching})
    fp = Counter(p[0] for k, p in enumerate(pred)
                 if k not in {j for _, j in matching})
    return tp, fp, fn


def two_entity_graph():
    return ClaimGraph(
        ["a", "b", "c", "d"],
        [Entity(Span(0, 1), EntityType.FACTOR),
         Entity(Span(1, 2), EntityType.ASSOCIATION)],
        [Relation(1, 0, RelationType.ARG0)],
        [AttributeAssignment.of(1, [AttributeType.CAUSATION])])


class TestScorePair:
    def test_identity_is_perfect(self):
        g = two_entity_graph()
        tallies = score_pair(g, g)
        for task in ("entities", "attributes", "relations"):
            assert sum(tallies.fp[task].values()) == 0
            assert sum(tallies.fn[task].values()) == 0
        report = MetricsReport.from_tallies(tallies)
        assert report.micro["entities"].f1 == 1.0
        assert report.micro["attributes"].f1 == 1.0
        assert report.micro["relations"].f1 == 1.0

    def test_token_mismatch_rejected(self):
        g = two_entity_graph()
        other = ClaimGraph(["x", "y", "z", "w"])
        with pytest.raises(ValueError):
            score_pair(g, other)

    def test_hand_counted_half_credit(self):
        gold = ClaimGraph(
            ["a", "b", "c"],
            [Entity(Span(0, 1), EntityType.FACTOR),
             Entity(Span(1, 2), EntityType.MAGNITUDE)])
        pred = ClaimGraph(
            ["a", "b", "c"],
            [Entity(Span(0, 1), EntityType.FACTOR),
             Entity(Span(1, 2), EntityType.QUALIFIER)])
        report = MetricsReport.from_tallies(score_pair(gold, pred))
        m = report.micro["entities"]
        assert (m.tp, m.fp, m.fn) == (1, 1, 1)
        assert m.precision == m.recall == m.f1 == 0.5

    def test_relation_strict_vs_relaxed(self):
        gold = two_entity_graph()
        pred = ClaimGraph(
            gold.tokens,
            [Entity(Span(0, 1), EntityType.QUALIFIER),  # wrong head entity type
             Entity(Span(1, 2), EntityType.ASSOCIATION)],
            [Relation(1, 0, RelationType.ARG0)], [])
        strict = MetricsReport.from_tallies(score_pair(gold, pred))
        assert strict.micro["relations"].tp == 0
        assert strict.micro["relations"].fp == 1
        assert strict.micro["relations"].fn == 1
        relaxed = MetricsReport.from_tallies(
            score_pair(gold, pred, MatchCriteria(relation_strict=False)))
        assert relaxed.micro["relations"].tp == 1

    def test_swap_swaps_precision_recall(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            g, p = random_graph(rng), None
            p = ClaimGraph(g.tokens, *(lambda q: (q.entities, q.relations,
                                                  q.attributes))(random_graph(rng, max_tokens=len(g.tokens))))
            a = MetricsReport.from_tallies(score_pair(g, p))
            b = MetricsReport.from_tallies(score_pair(p, g))
            for task in ("entities", "attributes", "relations"):
                assert a.micro[task].precision == pytest.approx(b.micro[task].recall)
                assert a.micro[task].recall == pytest.approx(b.micro[task].precision)


class TestBruteForceOracle:
    @pytest.mark.parametrize("seed", range(4))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(500):
            gold = random_graph(rng, max_tokens=6, max_entities=5)
            pred = random_graph(rng, max_tokens=len(gold.tokens), max_entities=5)
            pred = ClaimGraph(gold.tokens, pred.entities, pred.relations,
                              pred.attributes)
            tallies = score_pair(gold, pred)
            for task in ("entities", "attributes", "relations"):
                tp, fp, fn = brute_force_counts(gold, pred, task)
                assert tallies.tp[task] == tp, task
                assert tallies.fp[task] == fp, task
                assert tallies.fn[task] == fn, task


class TestScoreCorpus:
    def wrap(self, graphs):
        return Corpus(tuple(
            AnnotatedSentence(g, SentenceMeta(f"c{i}")) for i, g in enumerate(graphs)))

    def test_single_sentence_equals_pair(self):
        g = two_entity_graph()
        corpus = self.wrap([g])
        report = score_corpus(corpus, {"c0": g})
        assert report.micro["entities"].f1 == 1.0

    def test_all_empty_predictions(self):
        g = two_entity_graph()
        corpus = self.wrap([g])
        report = score_corpus(corpus, {"c0": ClaimGraph(g.tokens)})
        for task in ("entities", "attributes", "relations"):
            for label, score in report.per_label[task].items():
                if score.support > 0:
                    assert score.recall == 0.0

    def test_misaligned_predictions(self):
        corpus = self.wrap([two_entity_graph()])
        with pytest.raises(ValueError):
            score_corpus(corpus, {})
        with pytest.raises(ValueError):
            score_corpus(corpus, {"c0": two_entity_graph(), "zz": two_entity_graph()})

    def test_invariant_under_sentence_reordering(self):
        rng = np.random.default_rng(21)
        graphs = [random_graph(rng) for _ in range(6)]
        corpus = self.wrap(graphs)
        preds = {f"c{i}": random_graph(rng, max_tokens=len(g.tokens))
                 for i, g in enumerate(graphs)}
        preds = {k: ClaimGraph(corpus.by_id(k).graph.tokens, p.entities,
                               p.relations, p.attributes)
                 for k, p in preds.items()}
        report_a = score_corpus(corpus, preds)
        shuffled = Corpus(tuple(reversed(tuple(corpus))))
        report_b = score_corpus(shuffled, preds)
        assert report_a.to_json() == report_b.to_json()


class TestAggregate:
    def one_report(self, f1_target):
        g = two_entity_graph()
        if f1_target == 1.0:
            pred = g
        else:
            pred = ClaimGraph(g.tokens, [g.entities[0]], [], [])
        return MetricsReport.from_tallies(score_pair(g, pred))

    def test_identical_reports_idempotent(self):
        rep = self.one_report(1.0)
        merged = aggregate_runs([rep, rep, rep])
        assert merged.to_json() == rep.to_json()

    def test_mean_of_two(self):
        a = self.one_report(1.0)
        b = self.one_report(0.5)
        merged = aggregate_runs([a, b])
        expected = (a.micro["entities"].f1 + b.micro["entities"].f1) / 2
        assert merged.micro["entities"].f1 == pytest.approx(expected)

    def test_support_mismatch_rejected(self):
        g = two_entity_graph()
        other = ClaimGraph(g.tokens, [g.entities[0]], [], [])
        a = MetricsReport.from_tallies(score_pair(g, g))
        b = MetricsReport.from_tallies(score_pair(other, other))
        with pytest.raises(ValueError):
            aggregate_runs([a, b])

    def test_pool_mode(self):
        a = self.one_report(1.0)
        b = self.one_report(0.5)
        pooled = aggregate_runs([a, b], mode="pool")
        m = pooled.micro["entities"]
        assert (m.tp, m.fp, m.fn) == (3, 0, 1)

    def test_json_roundtrip(self):
        rep = self.one_report(0.5)
        assert MetricsReport.from_json(rep.to_json()).to_json() == rep.to_json()

    def test_mean_of_seeded_runs_within_bounds(self):
        # Several short seeded training runs: every aggregated cell must lie
        # inside the per-cell [min, max] envelope of the individual runs.
        from claimgraph.datagen import build_toy_corpus
        from claimgraph.model.providers import TokenLookupProvider
        from claimgraph.training import TrainConfig, evaluate_model, train

        corpus = build_toy_corpus(6)
        reports = []
        for seed in range(5):
            provider = TokenLookupProvider.from_corpus(corpus, 16)
            cfg = TrainConfig(epochs=10, batch_size=4, learning_rate=5e-3,
                              dropout=0.0, seed=seed, dim=16, max_span_size=6)
            params, _ = train(corpus, provider, cfg)
            reports.append(evaluate_model(params, corpus, provider,
                                          cfg.inference_config()))
        merged = aggregate_runs(reports)
        for task in ("entities", "attributes", "relations"):
            for label in merged.per_label[task]:
                for field in ("precision", "recall", "f1"):
                    values = [getattr(r.per_label[task][label], field)
                              for r in reports]
                    cell = getattr(merged.per_label[task][label], field)
                    assert min(values) - 1e-12 <= cell <= max(values) + 1e-12


class TestGraphDiff:
    def test_identity(self):
        g = two_entity_graph()
        diff = graph_diff(g, g)
        assert diff.clean
        assert len(diff.entities.matched) == 2

    def test_empty_prediction_all_missing(self):
        g = two_entity_graph()
        diff = graph_diff(g, ClaimGraph(g.tokens))
        assert not diff.entities.matched
        assert len(diff.entities.missing) == 2
        assert len(diff.relations.missing) == 1
        assert len(diff.attributes.missing) == 1
        assert not diff.entities.spurious

    def test_empty_gold_all_spurious(self):
        g = two_entity_graph()
        diff = graph_diff(ClaimGraph(g.tokens), g)
        assert len(diff.entities.spurious) == 2 and not diff.entities.missing

    def test_partition_exhaustive_and_disjoint(self):
        rng = np.random.default_rng(33)
        for _ in range(200):
            gold = random_graph(rng)
            pred = random_graph(rng, max_tokens=len(gold.tokens))
            pred = ClaimGraph(gold.tokens, pred.entities, pred.relations,
                              pred.attributes)
            diff = graph_diff(gold, pred)
            for task, items_fn in (("entities", entity_items),
                                   ("attributes", attribute_items),
                                   ("relations", relation_items)):
                part = getattr(diff, task)
                gold_items = items_fn(gold)
                pred_items = items_fn(pred)
                assert set(part.matched) | set(part.missing) == gold_items
                assert set(part.matched) | set(part.spurious) == pred_items
                assert not (set(part.missing) & set(part.spurious))

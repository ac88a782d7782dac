"""Span representation, classification head, inference, and loss tests."""

import math

import numpy as np
import pytest

from claimgraph.corpus import AnnotatedSentence, SentenceMeta
from claimgraph.datagen import build_toy_corpus
from claimgraph.model.network import (
    InferenceConfig,
    LossConfig,
    SpanReprBatch,
    between_context,
    classify_attributes,
    classify_entities,
    classify_relations,
    enumerate_spans,
    joint_loss,
    predict,
    sentence_context,
    span_attention_weights,
    span_repr_attention,
    span_repr_maxpool,
)
from claimgraph.model.params import (
    ATTRIBUTE_LABELS,
    RELATION_LABELS,
    STANDARD_ENTITY_LABELS,
    ModelParams,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from claimgraph.model.providers import (
    PrecomputedEmbeddingProvider,
    ProviderError,
    TokenLookupProvider,
    read_embedding_file,
    write_embedding_file,
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
    validate_structural,
)


def make_params(dim=8, max_span=6, seed=0, provider=None, zero=False):
    rng = np.random.default_rng(seed)
    params = init_params(dim, max_span, STANDARD_ENTITY_LABELS, rng,
                         provider=provider)
    if zero:
        for t in params.tensors.values():
            t[...] = 0.0
    return params


class TestEnumerateSpans:
    def test_all_spans_short_sentence(self):
        assert len(enumerate_spans(3, 20)) == 6

    def test_capped_length(self):
        spans = enumerate_spans(5, 2)
        assert len(spans) == 9
        assert all(len(s) <= 2 for s in spans)

    def test_empty(self):
        assert enumerate_spans(0, 20) == []

    def test_lexicographic_order(self):
        spans = enumerate_spans(6, 3)
        assert spans == sorted(spans, key=lambda s: (s.start, s.end))


# Straightforward reimplementations used as oracles.

def naive_attention(h, span, w, b):
    scores = [float(np.dot(w, h[t]) + b) for t in range(span.start, span.end)]
    m = max(scores)
    exps = [math.exp(s - m) for s in scores]
    z = sum(exps)
    out = np.zeros(h.shape[1])
    for weight, t in zip(exps, range(span.start, span.end)):
        out += (weight / z) * h[t]
    return out


def naive_maxpool(h, span):
    out = np.array(h[span.start], dtype=float)
    for t in range(span.start + 1, span.end):
        for k in range(h.shape[1]):
            out[k] = max(out[k], h[t][k])
    return out


class TestSpanRepresentations:
    def setup_method(self):
        self.rng = np.random.default_rng(100)
        self.params = make_params()
        self.h = self.rng.normal(size=(9, 8))

    def test_single_token_equals_embedding(self):
        span = Span(3, 4)
        np.testing.assert_array_equal(
            span_repr_attention(self.h, span, self.params), self.h[3])
        np.testing.assert_array_equal(span_repr_maxpool(self.h, span), self.h[3])

    def test_equal_scores_give_mean(self):
        params = make_params(zero=True)  # w = 0 -> all scores equal
        span = Span(2, 4)
        expected = self.h[2:4].mean(axis=0)
        np.testing.assert_allclose(
            span_repr_attention(self.h, span, params), expected, atol=1e-12)

    def test_attention_matches_naive(self):
        w = self.params.tensors["attn.w"]
        b = float(self.params.tensors["attn.b"])
        for _ in range(200):
            start = int(self.rng.integers(0, 8))
            end = int(self.rng.integers(start + 1, 10))
            got = span_repr_attention(self.h, Span(start, end), self.params)
            want = naive_attention(self.h, Span(start, end), w, b)
            np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-12)

    def test_maxpool_matches_loop(self):
        for _ in range(200):
            start = int(self.rng.integers(0, 8))
            end = int(self.rng.integers(start + 1, 10))
            got = span_repr_maxpool(self.h, Span(start, end))
            np.testing.assert_array_equal(got, naive_maxpool(self.h, Span(start, end)))

    def test_maxpool_abs_pattern(self):
        v = self.rng.normal(size=8)
        h = np.stack([v, -v])
        np.testing.assert_array_equal(span_repr_maxpool(h, Span(0, 2)), np.abs(v))

    def test_weights_normalized(self):
        for _ in range(100):
            start = int(self.rng.integers(0, 8))
            end = int(self.rng.integers(start + 1, 10))
            alpha = span_attention_weights(self.h, Span(start, end), self.params)
            assert np.all(alpha >= 0)
            assert abs(alpha.sum() - 1.0) <= 1e-9

    def test_convex_hull_bound(self):
        for _ in range(200):
            start = int(self.rng.integers(0, 8))
            end = int(self.rng.integers(start + 1, 10))
            span = Span(start, end)
            r = span_repr_attention(self.h, span, self.params)
            lo = self.h[start:end].min(axis=0)
            hi = self.h[start:end].max(axis=0)
            assert np.all(r >= lo - 1e-12) and np.all(r <= hi + 1e-12)

    def test_batch_matches_single(self):
        spans = enumerate_spans(9, 6)
        for mode in ("attention", "maxpool"):
            batch = SpanReprBatch(self.h, spans, self.params, mode)
            for i, span in enumerate(spans):
                if mode == "attention":
                    want = span_repr_attention(self.h, span, self.params)
                    np.testing.assert_allclose(batch.reprs[i], want, atol=1e-12)
                else:
                    np.testing.assert_array_equal(
                        batch.reprs[i], span_repr_maxpool(self.h, span))


class TestContext:
    def setup_method(self):
        self.rng = np.random.default_rng(7)
        self.h = self.rng.normal(size=(10, 4))

    def test_adjacent_spans_zero_between(self):
        np.testing.assert_array_equal(
            between_context(self.h, Span(0, 3), Span(3, 5)), np.zeros(4))

    def test_overlapping_spans_zero_between(self):
        np.testing.assert_array_equal(
            between_context(self.h, Span(0, 4), Span(2, 6)), np.zeros(4))

    def test_single_token_sentence(self):
        h = self.h[:1]
        np.testing.assert_array_equal(sentence_context(h), h[0])

    def test_between_matches_loop_oracle(self):
        for _ in range(200):
            a = sorted(self.rng.integers(0, 10, size=2))
            b = sorted(self.rng.integers(0, 10, size=2))
            if a[0] == a[1] or b[0] == b[1]:
                continue
            sa, sb = Span(*map(int, a)), Span(*map(int, b))
            lo, hi = min(sa.end, sb.end), max(sa.start, sb.start)
            want = (naive_maxpool(self.h, Span(lo, hi)) if lo < hi
                    else np.zeros(4))
            np.testing.assert_array_equal(between_context(self.h, sa, sb), want)
            # symmetric in argument order
            np.testing.assert_array_equal(between_context(self.h, sb, sa),
                                          between_context(self.h, sa, sb))


class TestClassifyEntities:
    def test_ties_resolve_to_first_class(self):
        params = make_params(zero=True)
        h = np.zeros((3, 8))
        out = classify_entities(h, params, InferenceConfig(max_span_size=6))
        # all logits equal -> argmax picks class 0, never "none" (last)
        assert out and all(label == STANDARD_ENTITY_LABELS[0] for _, label, _ in out)
        assert all(conf == pytest.approx(1 / 7) for _, _, conf in out)

    def test_none_everywhere_gives_empty(self):
        params = make_params(zero=True)
        params.tensors["entity.b"][params.none_index] = 10.0
        h = np.random.default_rng(0).normal(size=(4, 8))
        assert classify_entities(h, params, InferenceConfig(max_span_size=6)) == []


class TestClassifyAttributes:
    def test_zero_logits_below_default_threshold(self):
        params = make_params(zero=True)
        reprs = np.zeros((3, 8))
        out = classify_attributes(reprs, params, InferenceConfig())
        assert all(assigned == () for assigned, _ in out)
        assert all(np.all(scores == 0.5) for _, scores in out)

    def test_exactly_at_threshold_not_assigned(self):
        params = make_params(zero=True)
        reprs = np.zeros((1, 8))
        cfg = InferenceConfig(attr_threshold=0.5)  # sigma(0) == 0.5 exactly
        out = classify_attributes(reprs, params, cfg)
        assert out[0][0] == ()

    def test_single_hot_logit(self):
        params = make_params(zero=True)
        params.tensors["attribute.b"][2] = 8.0
        out = classify_attributes(np.zeros((1, 8)), params, InferenceConfig())
        assert out[0][0] == (list(AttributeType)[2],)

    def test_monotone_in_threshold(self):
        params = make_params(seed=5)
        reprs = np.random.default_rng(1).normal(size=(6, 8))
        thresholds = [0.1, 0.3, 0.5, 0.7, 0.9]
        previous = None
        for t in thresholds:
            out = classify_attributes(reprs, params, InferenceConfig(attr_threshold=t))
            assigned = [set(a) for a, _ in out]
            if previous is not None:
                assert all(b <= a for a, b in zip(previous, assigned))
            previous = assigned


class TestClassifyRelations:
    def test_fewer_than_two_entities(self):
        params = make_params()
        h = np.zeros((3, 8))
        assert classify_relations([], h, params, InferenceConfig()) == []
        assert classify_relations([Span(0, 1)], h, params, InferenceConfig()) == []

    def test_zero_logits_emit_everything(self):
        params = make_params(zero=True)
        h = np.zeros((4, 8))
        out = classify_relations([Span(0, 1), Span(1, 2), Span(2, 3)], h,
                                 params, InferenceConfig())
        # sigma(0)=0.5 > 0.4: all 6 ordered pairs x 7 types
        assert len(out) == 6 * 7
        assert all(score == 0.5 for *_, score in out)

    def test_monotone_in_threshold(self):
        params = make_params(seed=9)
        h = np.random.default_rng(3).normal(size=(5, 8))
        spans = [Span(0, 1), Span(2, 4), Span(4, 5)]
        sizes = []
        for t in (0.2, 0.4, 0.6, 0.8):
            out = classify_relations(spans, h, params, InferenceConfig(rel_threshold=t))
            sizes.append({(i, j, r) for i, j, r, _ in out})
        for small, large in zip(sizes[1:], sizes[:-1]):
            assert small <= large


class TestPredict:
    def test_empty_sentence(self):
        corpus = build_toy_corpus(2)
        provider = TokenLookupProvider.from_corpus(corpus, 8)
        params = make_params(provider=provider)
        pred = predict([], provider, params)
        assert pred.graph == ClaimGraph(())

    def test_deterministic(self):
        corpus = build_toy_corpus(2)
        provider = TokenLookupProvider.from_corpus(corpus, 8)
        params = make_params(provider=provider)
        tokens = corpus[0].graph.tokens
        a = predict(tokens, provider, params, InferenceConfig(max_span_size=6))
        b = predict(tokens, provider, params, InferenceConfig(max_span_size=6))
        assert a.graph == b.graph
        assert a.entity_scores == b.entity_scores
        assert a.relation_scores == b.relation_scores

    def test_output_structurally_valid(self):
        corpus = build_toy_corpus(4)
        provider = TokenLookupProvider.from_corpus(corpus, 8)
        for seed in range(5):
            params = make_params(seed=seed, provider=provider)
            for sent in corpus:
                pred = predict(sent.graph.tokens, provider, params,
                               InferenceConfig(max_span_size=6))
                assert validate_structural(pred.graph).ok

    def test_cascade_attributes_only_on_entities(self):
        corpus = build_toy_corpus(2)
        provider = TokenLookupProvider.from_corpus(corpus, 8)
        params = make_params(provider=provider)
        pred = predict(corpus[0].graph.tokens, provider, params,
                       InferenceConfig(max_span_size=6, attr_threshold=0.45))
        n_entities = len(pred.graph.entities)
        assert all(rec.entity < n_entities for rec in pred.graph.attributes)

    def test_unfiltered_matches_cascaded_at_inference(self):
        corpus = build_toy_corpus(3)
        provider = TokenLookupProvider.from_corpus(corpus, 8)
        params = make_params(seed=2, provider=provider)
        tokens = corpus[1].graph.tokens
        a = predict(tokens, provider, params,
                    InferenceConfig(max_span_size=6, attribute_filtering="cascaded",
                                    attr_threshold=0.45))
        b = predict(tokens, provider, params,
                    InferenceConfig(max_span_size=6, attribute_filtering="unfiltered",
                                    attr_threshold=0.45))
        assert a.graph == b.graph

    def test_scores_parallel_to_graph(self):
        corpus = build_toy_corpus(2)
        provider = TokenLookupProvider.from_corpus(corpus, 8)
        params = make_params(provider=provider)
        pred = predict(corpus[0].graph.tokens, provider, params,
                       InferenceConfig(max_span_size=6, rel_threshold=0.45))
        assert len(pred.entity_scores) == len(pred.graph.entities)
        assert len(pred.relation_scores) == len(pred.graph.relations)
        assert len(pred.attribute_scores) == len(pred.graph.attributes)
        payload = pred.to_json()
        assert set(payload["scores"]) == {"entities", "relations", "attributes"}


def single_sentence(tokens=("a", "b", "c")):
    g = ClaimGraph(
        list(tokens),
        [Entity(Span(0, 1), EntityType.FACTOR),
         Entity(Span(1, 2), EntityType.ASSOCIATION)],
        [Relation(1, 0, RelationType.ARG0)],
        [AttributeAssignment.of(1, [AttributeType.CAUSATION])])
    return AnnotatedSentence(g, SentenceMeta("hand", "other", "train"))


class TestJointLoss:
    def build(self, zero=True):
        sent = single_sentence()
        from claimgraph.corpus import Corpus
        provider = TokenLookupProvider.from_corpus(Corpus((sent,)), 8)
        params = make_params(provider=provider, zero=zero)
        return sent, provider, params

    def test_zero_params_hand_check(self):
        sent, provider, params = self.build(zero=True)
        cfg = LossConfig(train=False, dropout=0.0)
        result = joint_loss([sent], provider, params, cfg, np.random.default_rng(0))
        n_spans = len(enumerate_spans(3, 6))  # all 6 spans, 2 gold + 4 negatives
        ln2, ln7 = math.log(2), math.log(7)
        assert result.entity_loss == pytest.approx(n_spans * ln7, rel=1e-12)
        # attributes: 2 gold entities x 7 slots, each -ln(0.5)
        assert result.attribute_loss == pytest.approx(2 * 7 * ln2, rel=1e-12)
        # relations: 2 ordered pairs x 7 types
        assert result.relation_loss == pytest.approx(2 * 7 * ln2, rel=1e-12)
        assert result.total == pytest.approx(
            result.entity_loss + result.relation_loss + result.attribute_loss)

    def test_perfect_logits_drive_loss_to_zero(self):
        sent, provider, params = self.build(zero=True)
        # Inject confident logits through the biases: entity bias favours
        # "none" hugely (gold spans mispredicted, but CE still finite and the
        # limit case we want is the relation/attribute sides), relation and
        # attribute biases drive sigmoids to the correct extremes for
        # negative targets.
        params.tensors["attribute.b"][...] = -40.0
        params.tensors["relation.b"][...] = -40.0
        g = ClaimGraph(["a", "b", "c"],
                       [Entity(Span(0, 1), EntityType.FACTOR),
                        Entity(Span(1, 2), EntityType.FACTOR)])
        sent = AnnotatedSentence(g, SentenceMeta("neg", "other", "train"))
        cfg = LossConfig(train=False, dropout=0.0)
        result = joint_loss([sent], provider, params, cfg, np.random.default_rng(0))
        assert result.relation_loss == pytest.approx(0.0, abs=1e-12)
        assert result.attribute_loss == pytest.approx(0.0, abs=1e-12)

    def test_entity_cross_entropy_limit(self):
        # Confident "none" logits on a sentence with no gold entities drive
        # the entity cross entropy itself to ~0.
        _, provider, params = self.build(zero=True)
        params.tensors["entity.b"][params.none_index] = 40.0
        g = ClaimGraph(["a", "b", "c"])
        sent = AnnotatedSentence(g, SentenceMeta("none", "other", "train"))
        result = joint_loss([sent], provider, params,
                            LossConfig(train=False, dropout=0.0),
                            np.random.default_rng(0))
        assert result.entity_loss == pytest.approx(0.0, abs=1e-12)
        assert result.total == pytest.approx(0.0, abs=1e-12)

    def test_empty_batch_rejected(self):
        _, provider, params = self.build()
        with pytest.raises(ValueError):
            joint_loss([], provider, params)

    def test_permutation_invariance_bitwise(self):
        corpus = build_toy_corpus(5)
        provider = TokenLookupProvider.from_corpus(corpus, 8)
        params = make_params(seed=3, provider=provider)
        cfg = LossConfig(dropout=0.1, train=True)
        batch = list(corpus)
        a = joint_loss(batch, provider, params, cfg, np.random.default_rng(5))
        b = joint_loss(list(reversed(batch)), provider, params, cfg,
                       np.random.default_rng(5))
        assert a.total == b.total
        for name in a.grads:
            np.testing.assert_array_equal(a.grads[name], b.grads[name])

    def test_loss_components_sum(self):
        corpus = build_toy_corpus(3)
        provider = TokenLookupProvider.from_corpus(corpus, 8)
        params = make_params(seed=4, provider=provider)
        result = joint_loss(list(corpus), provider, params,
                            LossConfig(train=False, dropout=0.0))
        assert result.total == pytest.approx(
            result.entity_loss + result.relation_loss + result.attribute_loss)


class TestCheckpointFormat:
    def test_byte_exact_roundtrip(self):
        corpus = build_toy_corpus(2)
        provider = TokenLookupProvider.from_corpus(corpus, 8)
        params = make_params(provider=provider)
        data = save_checkpoint(params)
        loaded = load_checkpoint(data)
        assert save_checkpoint(loaded) == data
        assert loaded.entity_labels == params.entity_labels
        assert loaded.vocab == provider.vocab
        for name in params.tensors:
            np.testing.assert_allclose(
                loaded.tensors[name], params.tensors[name], atol=1e-6)

    def test_bad_magic(self):
        with pytest.raises(ValueError):
            load_checkpoint(b"NOTYPE" + b"\x00" * 32)


class TestEmbeddingFile:
    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        mats = {"s1": rng.normal(size=(4, 3)).astype(np.float32),
                "s2": rng.normal(size=(2, 3)).astype(np.float32)}
        data = write_embedding_file(mats, 3)
        dim, loaded = read_embedding_file(data)
        assert dim == 3
        for k in mats:
            np.testing.assert_array_equal(loaded[k], mats[k])
        assert write_embedding_file(loaded, dim) == data

    def test_provider_errors(self):
        provider = PrecomputedEmbeddingProvider({"s1": np.zeros((2, 4))}, 4)
        with pytest.raises(ProviderError):
            provider.embed(["a", "b"], sid=None)
        with pytest.raises(ProviderError):
            provider.embed(["a", "b"], sid="missing")
        with pytest.raises(ProviderError):
            provider.embed(["a", "b", "c"], sid="s1")
        np.testing.assert_array_equal(provider.embed(["a", "b"], sid="s1"),
                                      np.zeros((2, 4)))

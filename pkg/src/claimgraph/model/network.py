"""Span-based extraction heads: forward passes, cascaded inference, and the
joint training loss with exact analytic gradients.

The model scores candidate token spans with three heads sharing one span
representation:

* entity head: softmax over entity labels plus a trailing "none" class,
  input [span repr ; width embedding ; sentence maxpool context];
* attribute head: pointwise sigmoid over attribute labels, input is the
  span representation alone;
* relation head: pointwise sigmoid over relation labels for ordered entity
  pairs, input [head repr ; head width ; between maxpool ; tail width ;
  tail repr], zero between-vector when the spans touch or overlap.

Span representations are either attention-weighted sums (a learned scalar
score per token, softmax-normalized within the span) or elementwise maxpool.
Inference is cascaded: entities first, then attributes and relations over
the identified entities only.

Everything is float64; the backward pass is hand-derived and verified
against central finite differences (see training.grad_check).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus import graph_to_json, parse_collapsed_label
from ..schema import (
    AttributeAssignment,
    AttributeType,
    ClaimGraph,
    Entity,
    EntityType,
    Relation,
    RelationType,
    Span,
)
from .params import ATTRIBUTE_LABELS, RELATION_LABELS, ModelParams
from .providers import EmbeddingProvider


@dataclass(frozen=True)
class InferenceConfig:
    attr_threshold: float = 0.55
    rel_threshold: float = 0.4
    max_span_size: int = 20
    span_repr_mode: str = "attention"  # "attention" | "maxpool"
    attribute_filtering: str = "cascaded"  # "cascaded" | "unfiltered"

    def __post_init__(self):
        for name in ("attr_threshold", "rel_threshold"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {value}")
        if self.span_repr_mode not in ("attention", "maxpool"):
            raise ValueError(f"unknown span_repr_mode {self.span_repr_mode!r}")
        if self.attribute_filtering not in ("cascaded", "unfiltered"):
            raise ValueError(f"unknown attribute_filtering {self.attribute_filtering!r}")


# ---------------------------------------------------------------------------
# Numerics


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row softmax with max subtraction."""
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def _bce_from_logits(z: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of per-element binary cross entropies and its logit gradient."""
    loss = float(np.sum(_softplus(z) - y * z))
    return loss, sigmoid(z) - y


def _ce_from_logits(z: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of row cross entropies (y holds class indices) and logit gradient."""
    zmax = z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z - zmax).sum(axis=1, keepdims=True)) + zmax
    rows = np.arange(z.shape[0])
    loss = float(np.sum(lse[rows, 0] - z[rows, y]))
    dz = np.exp(z - lse)
    dz[rows, y] -= 1.0
    return loss, dz


# ---------------------------------------------------------------------------
# Span enumeration and single-span representation functions


def enumerate_spans(n: int, max_span_size: int) -> list[Span]:
    """All spans of length 1..max_span_size, lexicographic (start, end)."""
    if n < 0:
        raise ValueError("token count must be nonnegative")
    return [Span(start, end)
            for start in range(n)
            for end in range(start + 1, min(start + max_span_size, n) + 1)]


def span_attention_weights(h: np.ndarray, span: Span, params: ModelParams) -> np.ndarray:
    """Per-token attention weights within the span (nonnegative, sum to 1)."""
    u = h[span.start:span.end] @ params.tensors["attn.w"] + float(params.tensors["attn.b"])
    return softmax_rows(u[None, :])[0]


def span_repr_attention(h: np.ndarray, span: Span, params: ModelParams) -> np.ndarray:
    """Attention-weighted sum of the span's token vectors."""
    alpha = span_attention_weights(h, span, params)
    return (alpha[:, None] * h[span.start:span.end]).sum(axis=0)


def span_repr_maxpool(h: np.ndarray, span: Span) -> np.ndarray:
    """Elementwise maximum over the span's token vectors."""
    return h[span.start:span.end].max(axis=0)


def sentence_context(h: np.ndarray) -> np.ndarray:
    """Whole-sentence maxpool, the context feature of the entity head."""
    return h.max(axis=0)


def between_context(h: np.ndarray, a: Span, b: Span) -> np.ndarray:
    """Maxpool over tokens strictly between two spans; zeros when the gap
    is empty (adjacent or overlapping spans)."""
    lo, hi = min(a.end, b.end), max(a.start, b.start)
    if lo >= hi:
        return np.zeros(h.shape[1])
    return h[lo:hi].max(axis=0)


def _gap_span(a: Span, b: Span) -> Span | None:
    lo, hi = min(a.end, b.end), max(a.start, b.start)
    return Span(lo, hi) if lo < hi else None


def width_index(span_length: int, max_span_size: int) -> int:
    """Width table row: length - 1, capped at the table's last row."""
    return min(span_length, max_span_size) - 1


# ---------------------------------------------------------------------------
# Vectorized span representations with backward


class SpanReprBatch:
    """Representations for a list of spans over one sentence.

    Spans are grouped by length so each group is one vectorized computation;
    the cached per-group tensors make the backward pass exact.  Matches the
    single-span functions above to float64 rounding.
    """

    def __init__(self, h: np.ndarray, spans: list[Span], params: ModelParams,
                 mode: str):
        self.h = h
        self.spans = spans
        self.mode = mode
        self._w = params.tensors["attn.w"]
        n, d = h.shape
        self.reprs = np.zeros((len(spans), d))
        self._groups = []
        if mode == "attention":
            self.u = h @ self._w + float(params.tensors["attn.b"])

        by_len: dict[int, list[int]] = {}
        for pos, span in enumerate(spans):
            by_len.setdefault(len(span), []).append(pos)
        for length, positions in sorted(by_len.items()):
            positions = np.array(positions)
            starts = np.array([spans[p].start for p in positions])
            idx = starts[:, None] + np.arange(length)[None, :]
            if mode == "attention":
                alpha = softmax_rows(self.u[idx])
                self.reprs[positions] = (alpha[..., None] * h[idx]).sum(axis=1)
                self._groups.append((positions, idx, alpha))
            else:
                gathered = h[idx]
                arg = gathered.argmax(axis=1)  # first max wins on ties
                self.reprs[positions] = np.take_along_axis(
                    gathered, arg[:, None, :], axis=1)[:, 0, :]
                self._groups.append((positions, idx, arg))

    def backward(self, d_reprs: np.ndarray, dh: np.ndarray, grads: dict) -> None:
        n, d = self.h.shape
        if self.mode == "attention":
            du = np.zeros(n)
            for positions, idx, alpha in self._groups:
                d_r = d_reprs[positions]  # (g, d)
                np.add.at(dh, idx, alpha[..., None] * d_r[:, None, :])
                d_alpha = (d_r[:, None, :] * self.h[idx]).sum(axis=2)  # (g, L)
                d_u = alpha * (d_alpha - (alpha * d_alpha).sum(axis=1, keepdims=True))
                np.add.at(du, idx, d_u)
            grads["attn.w"] += du @ self.h
            grads["attn.b"] += du.sum()
            dh += du[:, None] * self._w[None, :]
        else:
            for positions, idx, arg in self._groups:
                d_r = d_reprs[positions]
                g = len(positions)
                rows = idx[np.arange(g)[:, None], arg]  # (g, d) winning token ids
                cols = np.broadcast_to(np.arange(d), (g, d))
                np.add.at(dh, (rows, cols), d_r)


def _maxpool_all_backward(h: np.ndarray, d_out: np.ndarray, dh: np.ndarray) -> None:
    """Backward of the whole-sentence maxpool context."""
    winners = h.argmax(axis=0)
    np.add.at(dh, (winners, np.arange(h.shape[1])), d_out)


# ---------------------------------------------------------------------------
# Classification heads (shared by inference and training)


def _entity_inputs(batch: SpanReprBatch, ctx: np.ndarray, params: ModelParams) -> np.ndarray:
    widths = params.tensors["width.table"][
        [width_index(len(s), params.max_span_size) for s in batch.spans]]
    return np.concatenate(
        [batch.reprs, widths, np.broadcast_to(ctx, batch.reprs.shape)], axis=1)


def _relation_inputs(batch: SpanReprBatch, pairs: list[tuple[int, int]],
                     gaps: np.ndarray, params: ModelParams) -> np.ndarray:
    spans = batch.spans
    head_rows = np.array([p[0] for p in pairs], dtype=int)
    tail_rows = np.array([p[1] for p in pairs], dtype=int)
    table = params.tensors["width.table"]
    head_w = table[[width_index(len(spans[r]), params.max_span_size) for r in head_rows]]
    tail_w = table[[width_index(len(spans[r]), params.max_span_size) for r in tail_rows]]
    return np.concatenate(
        [batch.reprs[head_rows], head_w, gaps, tail_w, batch.reprs[tail_rows]], axis=1)


def classify_entities(h: np.ndarray, params: ModelParams,
                      config: InferenceConfig) -> list[tuple[Span, str, float]]:
    """Label every candidate span; emit those whose argmax is not "none".

    Ties break by fixed class order ("none" is the last class, so with equal
    logits the first real label wins).  Returns (span, label, confidence).
    """
    spans = enumerate_spans(h.shape[0], min(config.max_span_size, params.max_span_size))
    if not spans:
        return []
    batch = SpanReprBatch(h, spans, params, config.span_repr_mode)
    x = _entity_inputs(batch, sentence_context(h), params)
    logits = x @ params.tensors["entity.W"].T + params.tensors["entity.b"]
    probs = softmax_rows(logits)
    best = logits.argmax(axis=1)
    out = []
    for i, span in enumerate(spans):
        cls = int(best[i])
        if cls != params.none_index:
            out.append((span, params.entity_labels[cls], float(probs[i, cls])))
    return out


def classify_attributes(reprs: np.ndarray, params: ModelParams,
                        config: InferenceConfig,
                        ) -> list[tuple[tuple[AttributeType, ...], np.ndarray]]:
    """Sigmoid scores per attribute for each span representation; a label is
    assigned iff its score strictly exceeds the threshold."""
    if len(reprs) == 0:
        return []
    logits = reprs @ params.tensors["attribute.W"].T + params.tensors["attribute.b"]
    scores = sigmoid(logits)
    out = []
    for row in scores:
        assigned = tuple(t for t, s in zip(AttributeType, row)
                         if s > config.attr_threshold)
        out.append((assigned, row))
    return out


def classify_relations(entity_spans: list[Span], h: np.ndarray, params: ModelParams,
                       config: InferenceConfig,
                       ) -> list[tuple[int, int, RelationType, float]]:
    """Score every ordered pair of identified entities; emit (head, tail,
    type) triples whose sigmoid score strictly exceeds the threshold.
    Several relation types may fire for one pair (multigraph)."""
    m = len(entity_spans)
    if m < 2:
        return []
    batch = SpanReprBatch(h, list(entity_spans), params, config.span_repr_mode)
    pairs = [(i, j) for i in range(m) for j in range(m) if i != j]
    gaps, gap_batch, gap_rows = _pair_gaps(h, entity_spans, pairs, params,
                                           config.span_repr_mode)
    x = _relation_inputs(batch, pairs, gaps, params)
    scores = sigmoid(x @ params.tensors["relation.W"].T + params.tensors["relation.b"])
    out = []
    for p, (i, j) in enumerate(pairs):
        for t, rtype in enumerate(RelationType):
            if scores[p, t] > config.rel_threshold:
                out.append((i, j, rtype, float(scores[p, t])))
    return out


def _pair_gaps(h, spans, pairs, params, mode):
    """Between-context rows for ordered span pairs (zeros for empty gaps)."""
    gap_spans, gap_rows = [], {}
    for p, (i, j) in enumerate(pairs):
        gap = _gap_span(spans[i], spans[j])
        if gap is not None:
            gap_rows[p] = len(gap_spans)
            gap_spans.append(gap)
    gaps = np.zeros((len(pairs), h.shape[1]))
    gap_batch = None
    if gap_spans:
        gap_batch = SpanReprBatch(h, gap_spans, params, "maxpool")
        for p, row in gap_rows.items():
            gaps[p] = gap_batch.reprs[row]
    return gaps, gap_batch, gap_rows


# ---------------------------------------------------------------------------
# Full cascaded inference


@dataclass(frozen=True)
class Prediction:
    """A structurally valid graph plus per-element confidence scores."""

    graph: ClaimGraph
    entity_scores: tuple[float, ...] = ()
    relation_scores: tuple[float, ...] = ()
    attribute_scores: tuple[dict[str, float], ...] = ()  # aligned with graph.attributes

    def to_json(self) -> dict:
        out = graph_to_json(self.graph)
        out["scores"] = {
            "entities": list(self.entity_scores),
            "relations": list(self.relation_scores),
            "attributes": [
                {"entity": rec.entity, "types": dict(scores)}
                for rec, scores in zip(self.graph.attributes, self.attribute_scores)],
        }
        return out


def predict(tokens, provider: EmbeddingProvider, params: ModelParams,
            config: InferenceConfig = InferenceConfig(),
            sid: str | None = None) -> Prediction:
    """Cascade: embeddings -> entities -> attributes -> relations.

    Deterministic given params and inputs.  Attributes attach to whatever
    entities were predicted; schema conformance is measured downstream, not
    forced here.
    """
    tokens = list(tokens)
    if not tokens:
        return Prediction(ClaimGraph(tokens))
    h = provider.embed(tokens, params, sid)

    detected = classify_entities(h, params, config)
    entities, entity_scores, attr_of_entity = [], [], []
    for span, label, conf in detected:
        if params.label_mode == "attrs_as_ents":
            collapsed = parse_collapsed_label(label)
            entities.append(Entity(span, collapsed.etype))
            attr_of_entity.append(collapsed.attrs)
        else:
            entities.append(Entity(span, EntityType(label)))
            attr_of_entity.append(None)
        entity_scores.append(conf)

    attributes, attribute_scores = [], []
    if params.label_mode == "attrs_as_ents":
        for i, attrs in enumerate(attr_of_entity):
            if attrs:
                attributes.append(AttributeAssignment.of(i, attrs))
                attribute_scores.append({t.value: entity_scores[i] for t in attrs})
    elif entities:
        entity_spans = [e.span for e in entities]
        if config.attribute_filtering == "cascaded":
            batch = SpanReprBatch(h, entity_spans, params, config.span_repr_mode)
            scored = classify_attributes(batch.reprs, params, config)
        else:
            # Unfiltered: score every candidate span, then keep only the rows
            # of spans that were also identified as entities.
            all_spans = enumerate_spans(
                len(tokens), min(config.max_span_size, params.max_span_size))
            batch = SpanReprBatch(h, all_spans, params, config.span_repr_mode)
            all_scored = classify_attributes(batch.reprs, params, config)
            row_of = {s: i for i, s in enumerate(all_spans)}
            scored = [all_scored[row_of[s]] for s in entity_spans]
        for i, (assigned, row) in enumerate(scored):
            if assigned:
                attributes.append(AttributeAssignment.of(i, assigned))
                attribute_scores.append(
                    {t.value: float(row[list(AttributeType).index(t)])
                     for t in assigned})

    relations, relation_scores = [], []
    if len(entities) >= 2:
        for i, j, rtype, score in classify_relations(
                [e.span for e in entities], h, params, config):
            relations.append(Relation(i, j, rtype))
            relation_scores.append(score)

    graph = ClaimGraph(tokens, entities, relations, attributes)
    return Prediction(graph, tuple(entity_scores), tuple(relation_scores),
                      tuple(attribute_scores))


# ---------------------------------------------------------------------------
# Joint training loss with exact gradients


@dataclass(frozen=True)
class LossConfig:
    neg_entity_count: int = 100
    neg_relation_count: int = 100
    dropout: float = 0.1
    span_repr_mode: str = "attention"
    train: bool = True  # False disables dropout (e.g. gradient checking)


@dataclass
class LossResult:
    total: float
    entity_loss: float
    relation_loss: float
    attribute_loss: float
    grads: dict[str, np.ndarray]


def _dropout_mask(rng, shape, p: float):
    keep = (rng.random(shape) >= p).astype(np.float64)
    return keep / (1.0 - p)


def _collapsed_gold_labels(graph: ClaimGraph) -> list[str]:
    attr_map = graph.attribute_map()
    out = []
    for i, ent in enumerate(graph.entities):
        parts = [ent.etype.value] + [t.value for t in attr_map.get(i, ())]
        out.append("|".join(parts))
    return out


def joint_loss(batch, provider: EmbeddingProvider, params: ModelParams,
               cfg: LossConfig = LossConfig(),
               rng: np.random.Generator | None = None) -> LossResult:
    """L = L_entities + L_relations + L_attributes, averaged over sentences.

    Per sentence, losses are sums over classification items:

    * entities: cross entropy over gold spans plus sampled negative spans
      labeled "none";
    * relations: per-type binary cross entropy over gold entity pairs plus
      sampled negative pairs of gold entities with all-zero targets
      (teacher forcing: the relation head trains on gold spans);
    * attributes: binary cross entropy over gold entity spans against their
      attribute indicator vectors (entities that cannot carry attributes
      contribute all-zero targets).  Skipped in attrs-as-ents mode.

    Gradients are exact for every tensor, including the embedding table when
    the provider is trainable.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    if rng is None:
        rng = np.random.default_rng(0)
    grads = params.zero_grads()
    totals = np.zeros(3)
    # Fixed reduction order (sorted by sentence id): the loss and gradients
    # are bitwise invariant under permutations of the batch.
    for sent in sorted(batch, key=lambda s: s.id):
        totals += _sentence_loss(sent, provider, params, cfg, rng, grads)
    scale = 1.0 / len(batch)
    for g in grads.values():
        g *= scale
    l_e, l_r, l_a = totals * scale
    return LossResult(float(l_e + l_r + l_a), float(l_e), float(l_r), float(l_a), grads)


def _sample_without_replacement(rng, pool: list, count: int) -> list:
    if len(pool) <= count:
        return list(pool)
    chosen = rng.choice(len(pool), size=count, replace=False)
    return [pool[i] for i in sorted(chosen)]


def _sentence_loss(sent, provider, params, cfg, rng, grads) -> np.ndarray:
    graph = sent.graph
    tokens = graph.tokens
    n = len(tokens)
    if n == 0:
        return np.zeros(3)
    h = provider.embed(tokens, params, sent.id)
    d = h.shape[1]

    if params.label_mode == "attrs_as_ents":
        gold_labels = _collapsed_gold_labels(graph)
    else:
        gold_labels = [e.etype.value for e in graph.entities]
    label_index = {label: i for i, label in enumerate(params.entity_labels)}
    try:
        gold_targets = [label_index[label] for label in gold_labels]
    except KeyError as exc:
        raise ValueError(f"gold label {exc.args[0]!r} not in the model's label set") from exc

    gold_spans = [e.span for e in graph.entities]
    gold_span_set = set(gold_spans)
    negatives = [s for s in enumerate_spans(n, params.max_span_size)
                 if s not in gold_span_set]
    negatives = _sample_without_replacement(rng, negatives, cfg.neg_entity_count)

    spans_all = gold_spans + negatives
    targets = np.array(gold_targets + [params.none_index] * len(negatives), dtype=int)
    m_gold = len(gold_spans)

    batch_reprs = SpanReprBatch(h, spans_all, params, cfg.span_repr_mode)
    ctx = sentence_context(h)
    d_reprs = np.zeros_like(batch_reprs.reprs)
    d_ctx = np.zeros(d)
    dh = np.zeros_like(h)
    width_idx_all = np.array(
        [width_index(len(s), params.max_span_size) for s in spans_all], dtype=int)

    # Entity head.
    x_e = _entity_inputs(batch_reprs, ctx, params)
    mask_e = _dropout_mask(rng, x_e.shape, cfg.dropout) if cfg.train and cfg.dropout > 0 else None
    if mask_e is not None:
        x_e = x_e * mask_e
    z_e = x_e @ params.tensors["entity.W"].T + params.tensors["entity.b"]
    l_e, dz_e = _ce_from_logits(z_e, targets)
    grads["entity.W"] += dz_e.T @ x_e
    grads["entity.b"] += dz_e.sum(axis=0)
    dx_e = dz_e @ params.tensors["entity.W"]
    if mask_e is not None:
        dx_e = dx_e * mask_e
    d_reprs += dx_e[:, :d]
    np.add.at(grads["width.table"], width_idx_all, dx_e[:, d:d + params.width_dim])
    d_ctx += dx_e[:, d + params.width_dim:].sum(axis=0)

    # Attribute head over gold entity spans (standard label mode only).
    l_a = 0.0
    if params.label_mode == "standard" and m_gold:
        attr_map = graph.attribute_map()
        y_a = np.zeros((m_gold, len(ATTRIBUTE_LABELS)))
        for i in range(m_gold):
            for t in attr_map.get(i, ()):
                y_a[i, ATTRIBUTE_LABELS.index(t.value)] = 1.0
        x_a = batch_reprs.reprs[:m_gold]
        mask_a = _dropout_mask(rng, x_a.shape, cfg.dropout) if cfg.train and cfg.dropout > 0 else None
        if mask_a is not None:
            x_a = x_a * mask_a
        z_a = x_a @ params.tensors["attribute.W"].T + params.tensors["attribute.b"]
        l_a, dz_a = _bce_from_logits(z_a, y_a)
        grads["attribute.W"] += dz_a.T @ x_a
        grads["attribute.b"] += dz_a.sum(axis=0)
        dx_a = dz_a @ params.tensors["attribute.W"]
        if mask_a is not None:
            dx_a = dx_a * mask_a
        d_reprs[:m_gold] += dx_a

    # Relation head over ordered pairs of gold entities.
    l_r = 0.0
    gap_batch = None
    if m_gold >= 2:
        positive: dict[tuple[int, int], np.ndarray] = {}
        for rel in graph.relations:
            key = (rel.head, rel.tail)
            positive.setdefault(key, np.zeros(len(RELATION_LABELS)))
            positive[key][RELATION_LABELS.index(rel.rtype.value)] = 1.0
        neg_pool = [(i, j) for i in range(m_gold) for j in range(m_gold)
                    if i != j and (i, j) not in positive]
        neg_pairs = _sample_without_replacement(rng, neg_pool, cfg.neg_relation_count)
        pairs = list(positive.keys()) + neg_pairs
        if pairs:
            y_r = np.zeros((len(pairs), len(RELATION_LABELS)))
            for p, key in enumerate(positive):
                y_r[p] = positive[key]
            gaps, gap_batch, gap_rows = _pair_gaps(
                h, gold_spans, pairs, params, cfg.span_repr_mode)
            x_r = _relation_inputs(batch_reprs, pairs, gaps, params)
            mask_r = _dropout_mask(rng, x_r.shape, cfg.dropout) if cfg.train and cfg.dropout > 0 else None
            if mask_r is not None:
                x_r = x_r * mask_r
            z_r = x_r @ params.tensors["relation.W"].T + params.tensors["relation.b"]
            l_r, dz_r = _bce_from_logits(z_r, y_r)
            grads["relation.W"] += dz_r.T @ x_r
            grads["relation.b"] += dz_r.sum(axis=0)
            dx_r = dz_r @ params.tensors["relation.W"]
            if mask_r is not None:
                dx_r = dx_r * mask_r
            wd = params.width_dim
            head_rows = np.array([p[0] for p in pairs], dtype=int)
            tail_rows = np.array([p[1] for p in pairs], dtype=int)
            np.add.at(d_reprs, head_rows, dx_r[:, :d])
            np.add.at(grads["width.table"], width_idx_all[head_rows],
                      dx_r[:, d:d + wd])
            d_gaps = dx_r[:, d + wd:2 * d + wd]
            np.add.at(grads["width.table"], width_idx_all[tail_rows],
                      dx_r[:, 2 * d + wd:2 * d + 2 * wd])
            np.add.at(d_reprs, tail_rows, dx_r[:, 2 * d + 2 * wd:])
            if gap_batch is not None:
                d_gap_reprs = np.zeros_like(gap_batch.reprs)
                for p, row in gap_rows.items():
                    d_gap_reprs[row] += d_gaps[p]
                gap_batch.backward(d_gap_reprs, dh, grads)

    batch_reprs.backward(d_reprs, dh, grads)
    _maxpool_all_backward(h, d_ctx, dh)
    if provider.trainable:
        provider.backward(tokens, dh, grads)
    return np.array([l_e, l_r, l_a])

"""Micro and per-label precision/recall/F1 for the three extraction tasks.

Matching is exact and set-based:

* entity item      = (span, entity type)
* attribute item   = (span, entity type, attribute label), one item per
  (entity, label) pair; the entity-type component can be relaxed
* relation item    = (relation type, head span, tail span) and, in strict
  mode (the default), both endpoint entity types

Because items are keyed sets, each gold item matches at most one predicted
item and vice versa.  0/0 precision or recall is defined as 0.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from .schema import (
    ATTRIBUTE_TYPES,
    ENTITY_TYPES,
    RELATION_TYPES,
    ClaimGraph,
)

TASKS = ("entities", "attributes", "relations")

_LABEL_ORDER = {
    "entities": tuple(t.value for t in ENTITY_TYPES),
    "attributes": tuple(t.value for t in ATTRIBUTE_TYPES),
    "relations": tuple(t.value for t in RELATION_TYPES),
}


@dataclass(frozen=True)
class MatchCriteria:
    """Switches for the parts of a match key that are not forced by the task.

    relation_strict: relation matches also require both endpoint entity types.
    attribute_entity_type: attribute matches require the carrying entity's
        type in addition to its span.
    """

    relation_strict: bool = True
    attribute_entity_type: bool = True


def entity_items(graph: ClaimGraph) -> set[tuple]:
    return {(e.span.start, e.span.end, e.etype.value) for e in graph.entities}


def attribute_items(graph: ClaimGraph, criteria: MatchCriteria = MatchCriteria()) -> set[tuple]:
    items = set()
    for idx, types in graph.attribute_map().items():
        ent = graph.entities[idx]
        for t in types:
            if criteria.attribute_entity_type:
                items.add((ent.span.start, ent.span.end, ent.etype.value, t.value))
            else:
                items.add((ent.span.start, ent.span.end, t.value))
    return items


def relation_items(graph: ClaimGraph, criteria: MatchCriteria = MatchCriteria()) -> set[tuple]:
    items = set()
    for r in graph.relations:
        head, tail = graph.entities[r.head], graph.entities[r.tail]
        key = [r.rtype.value,
               head.span.start, head.span.end, tail.span.start, tail.span.end]
        if criteria.relation_strict:
            key += [head.etype.value, tail.etype.value]
        items.add(tuple(key))
    return items


@dataclass
class Tallies:
    """Per-label true/false positive and false negative counts, per task."""

    tp: dict[str, Counter] = field(default_factory=lambda: {t: Counter() for t in TASKS})
    fp: dict[str, Counter] = field(default_factory=lambda: {t: Counter() for t in TASKS})
    fn: dict[str, Counter] = field(default_factory=lambda: {t: Counter() for t in TASKS})

    def add(self, other: "Tallies") -> None:
        for task in TASKS:
            self.tp[task] += other.tp[task]
            self.fp[task] += other.fp[task]
            self.fn[task] += other.fn[task]


def _label_of(task: str, item: tuple) -> str:
    # Entity/attribute items end with the label; relation items start with it.
    if task == "relations":
        return item[0]
    return item[-1]


def score_pair(gold: ClaimGraph, pred: ClaimGraph,
               criteria: MatchCriteria = MatchCriteria()) -> Tallies:
    """Raw TP/FP/FN tallies per label for one sentence."""
    if tuple(gold.tokens) != tuple(pred.tokens):
        raise ValueError("gold and predicted graphs are over different token sequences")
    tallies = Tallies()
    item_sets = {
        "entities": (entity_items(gold), entity_items(pred)),
        "attributes": (attribute_items(gold, criteria), attribute_items(pred, criteria)),
        "relations": (relation_items(gold, criteria), relation_items(pred, criteria)),
    }
    for task, (g, p) in item_sets.items():
        for item in g & p:
            tallies.tp[task][_label_of(task, item)] += 1
        for item in p - g:
            tallies.fp[task][_label_of(task, item)] += 1
        for item in g - p:
            tallies.fn[task][_label_of(task, item)] += 1
    return tallies


def _prf(tp: float, fp: float, fn: float) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


@dataclass
class LabelScore:
    precision: float
    recall: float
    f1: float
    support: float
    tp: float
    fp: float
    fn: float


@dataclass
class MetricsReport:
    """Micro and per-label scores for each task, plus retained counts."""

    micro: dict[str, LabelScore]
    per_label: dict[str, dict[str, LabelScore]]

    @staticmethod
    def from_tallies(tallies: Tallies) -> "MetricsReport":
        micro, per_label = {}, {}
        for task in TASKS:
            table = {}
            for label in _LABEL_ORDER[task]:
                tp = tallies.tp[task][label]
                fp = tallies.fp[task][label]
                fn = tallies.fn[task][label]
                p, r, f1 = _prf(tp, fp, fn)
                table[label] = LabelScore(p, r, f1, tp + fn, tp, fp, fn)
            per_label[task] = table
            tp = sum(s.tp for s in table.values())
            fp = sum(s.fp for s in table.values())
            fn = sum(s.fn for s in table.values())
            p, r, f1 = _prf(tp, fp, fn)
            micro[task] = LabelScore(p, r, f1, tp + fn, tp, fp, fn)
        return MetricsReport(micro, per_label)

    def micro_f1_average(self) -> float:
        """Mean of the three task micro-F1s (the model-selection metric)."""
        return sum(self.micro[t].f1 for t in TASKS) / len(TASKS)

    def to_json(self) -> dict:
        def cell(s: LabelScore) -> dict:
            return {"precision": s.precision, "recall": s.recall, "f1": s.f1,
                    "support": s.support, "tp": s.tp, "fp": s.fp, "fn": s.fn}
        return {
            "micro": {t: cell(self.micro[t]) for t in TASKS},
            "per_label": {t: {l: cell(s) for l, s in self.per_label[t].items()}
                          for t in TASKS},
            "micro_f1_average": self.micro_f1_average(),
        }

    def to_text(self) -> str:
        lines = [f"{'label':>14}  {'P':>6}  {'R':>6}  {'F1':>6}  {'S':>6}"]
        for task in TASKS:
            lines.append(f"-- {task}")
            for label, s in self.per_label[task].items():
                lines.append(f"{label:>14}  {100 * s.precision:6.2f}  "
                             f"{100 * s.recall:6.2f}  {100 * s.f1:6.2f}  {s.support:6g}")
            m = self.micro[task]
            lines.append(f"{'micro':>14}  {100 * m.precision:6.2f}  "
                         f"{100 * m.recall:6.2f}  {100 * m.f1:6.2f}  {m.support:6g}")
        lines.append(f"micro-F1 average over tasks: {100 * self.micro_f1_average():.2f}")
        return "\n".join(lines)

    @staticmethod
    def from_json(obj: dict) -> "MetricsReport":
        def cell(d: dict) -> LabelScore:
            return LabelScore(d["precision"], d["recall"], d["f1"],
                              d["support"], d["tp"], d["fp"], d["fn"])
        micro = {t: cell(obj["micro"][t]) for t in TASKS}
        per_label = {t: {l: cell(c) for l, c in obj["per_label"][t].items()}
                     for t in TASKS}
        return MetricsReport(micro, per_label)


def score_corpus(gold_corpus, predictions: dict[str, ClaimGraph],
                 criteria: MatchCriteria = MatchCriteria()) -> MetricsReport:
    """Pool per-sentence tallies over a corpus, then compute micro scores.

    ``predictions`` maps sentence id -> predicted graph and must cover the
    corpus exactly.
    """
    gold_ids = [s.id for s in gold_corpus]
    missing = [i for i in gold_ids if i not in predictions]
    extra = [i for i in predictions if i not in set(gold_ids)]
    if missing or extra:
        raise ValueError(f"predictions misaligned: missing {missing[:3]}, extra {extra[:3]}")
    total = Tallies()
    for sent in gold_corpus:
        total.add(score_pair(sent.graph, predictions[sent.id], criteria))
    return MetricsReport.from_tallies(total)


def aggregate_runs(reports: list[MetricsReport], mode: str = "average") -> MetricsReport:
    """Combine multi-seed runs.

    ``average`` (default): arithmetic mean of every metric cell; supports must
    agree across runs.  ``pool``: sum the TP/FP/FN counts and recompute.
    """
    if not reports:
        raise ValueError("no reports to aggregate")
    first = reports[0]
    for rep in reports[1:]:
        for task in TASKS:
            if set(rep.per_label[task]) != set(first.per_label[task]):
                raise ValueError(f"label sets differ for task {task}")
            for label, s in rep.per_label[task].items():
                if s.support != first.per_label[task][label].support:
                    raise ValueError(f"support mismatch for {task}/{label}")

    if mode == "pool":
        pooled = Tallies()
        for rep in reports:
            for task in TASKS:
                for label, s in rep.per_label[task].items():
                    pooled.tp[task][label] += s.tp
                    pooled.fp[task][label] += s.fp
                    pooled.fn[task][label] += s.fn
        return MetricsReport.from_tallies(pooled)
    if mode != "average":
        raise ValueError(f"unknown aggregation mode {mode!r}")

    k = len(reports)

    def mean_cell(cells: list[LabelScore]) -> LabelScore:
        return LabelScore(*(sum(getattr(c, f) for c in cells) / k
                            for f in ("precision", "recall", "f1", "support",
                                      "tp", "fp", "fn")))

    micro = {t: mean_cell([r.micro[t] for r in reports]) for t in TASKS}
    per_label = {
        t: {l: mean_cell([r.per_label[t][l] for r in reports])
            for l in first.per_label[t]}
        for t in TASKS}
    return MetricsReport(micro, per_label)


# ---------------------------------------------------------------------------
# Structured diff (drives the review UI and error analysis)


@dataclass
class TaskDiff:
    matched: list[tuple]
    missing: list[tuple]   # in gold only
    spurious: list[tuple]  # in prediction only


@dataclass
class GraphDiff:
    entities: TaskDiff
    attributes: TaskDiff
    relations: TaskDiff

    @property
    def clean(self) -> bool:
        return all(not d.missing and not d.spurious
                   for d in (self.entities, self.attributes, self.relations))


def graph_diff(gold: ClaimGraph, pred: ClaimGraph,
               criteria: MatchCriteria = MatchCriteria()) -> GraphDiff:
    """Exhaustive, disjoint partition of both graphs' items into
    matched / missing / spurious, using the scoring match keys."""
    if tuple(gold.tokens) != tuple(pred.tokens):
        raise ValueError("graphs are over different token sequences")

    def diff(g: set, p: set) -> TaskDiff:
        return TaskDiff(sorted(g & p), sorted(g - p), sorted(p - g))

    return GraphDiff(
        entities=diff(entity_items(gold), entity_items(pred)),
        attributes=diff(attribute_items(gold, criteria), attribute_items(pred, criteria)),
        relations=diff(relation_items(gold, criteria), relation_items(pred, criteria)),
    )


def report_to_json_str(report: MetricsReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=False)

"""Claim-graph data model and validity rules.

A claim graph is a per-sentence directed multigraph: entity nodes are typed
token spans, edges are typed relations between entities, and entities may
additionally carry a set of fine-grained attribute labels.  Two validity
levels exist:

* structural -- spans in bounds, unique spans, no self-cycles, no dangling
  indices, no duplicate relation triples or attribute records;
* schema -- attributes are only legal on association entities, plus a few
  soft conventions (reported as warnings, not errors).

Validators report every violation instead of failing fast, so annotation
tooling gets complete feedback in one pass.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class EntityType(enum.Enum):
    """The six entity categories. Order matches the reporting tables."""

    FACTOR = "factor"
    EVIDENCE = "evidence"
    EPISTEMIC = "epistemic"
    ASSOCIATION = "association"
    MAGNITUDE = "magnitude"
    QUALIFIER = "qualifier"


class AttributeType(enum.Enum):
    """Multi-label modifiers; legal only on association entities."""

    CAUSATION = "causation"
    COMPARISON = "comparison"
    INDICATES = "indicates"
    SIGN_PLUS = "sign+"
    SIGN_MINUS = "sign-"
    CORRELATION = "correlation"
    TEST = "test"


class RelationType(enum.Enum):
    """Directed edge labels. q+/q- are the qualitative proportionalities."""

    ARG0 = "arg0"
    ARG1 = "arg1"
    COMP_TO = "comp_to"
    MODIFIER = "modifier"
    SUBTYPE = "subtype"
    Q_PLUS = "q+"
    Q_MINUS = "q-"


ENTITY_TYPES = tuple(EntityType)
ATTRIBUTE_TYPES = tuple(AttributeType)
RELATION_TYPES = tuple(RelationType)

_ATTR_ORDER = {t: i for i, t in enumerate(ATTRIBUTE_TYPES)}


def sort_attributes(types) -> tuple[AttributeType, ...]:
    """Canonical ordering for an attribute set (table order, deduplicated)."""
    return tuple(sorted(set(types), key=_ATTR_ORDER.__getitem__))


@dataclass(frozen=True, order=True)
class Span:
    """Half-open token range [start, end), 0-based."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Entity:
    span: Span
    etype: EntityType


@dataclass(frozen=True)
class Relation:
    head: int  # entity index
    tail: int  # entity index
    rtype: RelationType


@dataclass(frozen=True)
class AttributeAssignment:
    entity: int  # entity index
    types: tuple[AttributeType, ...]

    @staticmethod
    def of(entity: int, types) -> "AttributeAssignment":
        return AttributeAssignment(entity, sort_attributes(types))


@dataclass(frozen=True)
class ClaimGraph:
    """One sentence's tokens plus its entity/relation/attribute annotations.

    Construction does not enforce validity; run :func:`validate_structural`
    (and :func:`validate_schema`) to check a graph.
    """

    tokens: tuple[str, ...]
    entities: tuple[Entity, ...] = ()
    relations: tuple[Relation, ...] = ()
    attributes: tuple[AttributeAssignment, ...] = ()

    def __post_init__(self):
        # Accept any iterables; store as tuples so graphs hash/compare as values.
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "relations", tuple(self.relations))
        # Attribute records are a map entity -> set: normalize each record's
        # type order, drop empty records, order records by entity index.
        # Duplicate records for one entity are kept (the validator flags them).
        records = [AttributeAssignment(r.entity, sort_attributes(r.types))
                   for r in self.attributes if tuple(r.types)]
        records.sort(key=lambda r: r.entity)
        object.__setattr__(self, "attributes", tuple(records))

    def attribute_map(self) -> dict[int, tuple[AttributeType, ...]]:
        """entity index -> canonical attribute tuple (empty records dropped)."""
        out: dict[int, tuple[AttributeType, ...]] = {}
        for rec in self.attributes:
            merged = out.get(rec.entity, ()) + tuple(rec.types)
            out[rec.entity] = sort_attributes(merged)
        return {k: v for k, v in out.items() if v}

    def canonical(self) -> "ClaimGraph":
        """Value-identical graph with entities, relations and attribute
        records in canonical order (entity indices remapped accordingly)."""
        order = sorted(range(len(self.entities)),
                       key=lambda i: (self.entities[i].span, self.entities[i].etype.value))
        remap = {old: new for new, old in enumerate(order)}
        entities = tuple(self.entities[i] for i in order)
        relations = tuple(sorted(
            (Relation(remap[r.head], remap[r.tail], r.rtype) for r in self.relations),
            key=lambda r: (r.head, r.tail, r.rtype.value)))
        attrs = tuple(AttributeAssignment.of(remap[e], ts)
                      for e, ts in sorted(self.attribute_map().items()))
        attrs = tuple(sorted(attrs, key=lambda a: a.entity))
        return ClaimGraph(self.tokens, entities, relations, attrs)


@dataclass(frozen=True)
class ValidationIssue:
    rule: str
    message: str
    element: tuple[str, int]  # ("entity"|"relation"|"attribute", index)


@dataclass
class ValidationReport:
    errors: list[ValidationIssue] = field(default_factory=list)
    warnings: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def lines(self) -> list[str]:
        out = [f"error {i.rule} at {i.element[0]}[{i.element[1]}]: {i.message}"
               for i in self.errors]
        out += [f"warning {i.rule} at {i.element[0]}[{i.element[1]}]: {i.message}"
                for i in self.warnings]
        return out


def _sorted_issues(issues: list[ValidationIssue]) -> list[ValidationIssue]:
    return sorted(issues, key=lambda i: (i.rule, i.element[1]))


# Structural rule identifiers, in the order the rules are documented.
RULE_SPAN_BOUNDS = "span-bounds"
RULE_SPAN_UNIQUE = "span-unique"
RULE_SELF_CYCLE = "self-cycle"
RULE_DANGLING = "dangling-index"
RULE_DUP_RELATION = "duplicate-relation"
RULE_DUP_ATTRIBUTE = "duplicate-attribute"

RULE_ATTR_NON_ASSOCIATION = "attr-on-non-association"
RULE_COMP_TO_COMPARISON = "comp-to-without-comparison"
RULE_Q_ENDPOINTS = "q-endpoints-not-factors"
RULE_SUBTYPE_ENDPOINTS = "subtype-endpoint-types-differ"


def validate_structural(graph: ClaimGraph) -> ValidationReport:
    """Check every structural rule; never raises.

    Errors are deterministic: sorted by (rule id, element index).
    """
    errors: list[ValidationIssue] = []
    n = len(graph.tokens)

    seen_spans: dict[Span, int] = {}
    for i, ent in enumerate(graph.entities):
        if not (0 <= ent.span.start < ent.span.end <= n):
            errors.append(ValidationIssue(
                RULE_SPAN_BOUNDS,
                f"span [{ent.span.start}, {ent.span.end}) outside sentence of {n} tokens",
                ("entity", i)))
        if ent.span in seen_spans:
            errors.append(ValidationIssue(
                RULE_SPAN_UNIQUE,
                f"span [{ent.span.start}, {ent.span.end}) already used by entity {seen_spans[ent.span]}",
                ("entity", i)))
        else:
            seen_spans[ent.span] = i

    seen_triples: set[tuple[int, int, RelationType]] = set()
    for i, rel in enumerate(graph.relations):
        dangling = False
        for endpoint in (rel.head, rel.tail):
            if not (0 <= endpoint < len(graph.entities)):
                errors.append(ValidationIssue(
                    RULE_DANGLING,
                    f"entity index {endpoint} out of range (graph has {len(graph.entities)} entities)",
                    ("relation", i)))
                dangling = True
        if dangling:
            continue
        if rel.head == rel.tail:
            errors.append(ValidationIssue(
                RULE_SELF_CYCLE,
                f"relation {rel.rtype.value} loops on entity {rel.head}",
                ("relation", i)))
        triple = (rel.head, rel.tail, rel.rtype)
        if triple in seen_triples:
            errors.append(ValidationIssue(
                RULE_DUP_RELATION,
                f"duplicate relation ({rel.head}, {rel.tail}, {rel.rtype.value})",
                ("relation", i)))
        seen_triples.add(triple)

    seen_entities: set[int] = set()
    for i, rec in enumerate(graph.attributes):
        if not (0 <= rec.entity < len(graph.entities)):
            errors.append(ValidationIssue(
                RULE_DANGLING,
                f"entity index {rec.entity} out of range (graph has {len(graph.entities)} entities)",
                ("attribute", i)))
            continue
        if rec.entity in seen_entities:
            errors.append(ValidationIssue(
                RULE_DUP_ATTRIBUTE,
                f"second attribute record for entity {rec.entity}",
                ("attribute", i)))
        seen_entities.add(rec.entity)

    return ValidationReport(errors=_sorted_issues(errors))


def validate_schema(graph: ClaimGraph) -> ValidationReport:
    """Check schema-level rules on a structurally valid graph.

    Raises ``ValueError`` if the graph is not structurally valid (caller
    misuse, distinct from a report).  Attribute legality is the only hard
    rule; typing conventions for comp_to / q+ / q- / subtype are warnings
    because they describe typical usage rather than constraints.
    """
    structural = validate_structural(graph)
    if not structural.ok:
        raise ValueError(
            "validate_schema requires a structurally valid graph; "
            f"found {len(structural.errors)} structural error(s)")

    errors: list[ValidationIssue] = []
    warnings: list[ValidationIssue] = []
    attr_map = graph.attribute_map()

    for i, rec in enumerate(graph.attributes):
        etype = graph.entities[rec.entity].etype
        if rec.types and etype is not EntityType.ASSOCIATION:
            errors.append(ValidationIssue(
                RULE_ATTR_NON_ASSOCIATION,
                f"attributes apply only to association entities, not {etype.value}",
                ("attribute", i)))

    for i, rel in enumerate(graph.relations):
        head_t = graph.entities[rel.head].etype
        tail_t = graph.entities[rel.tail].etype
        if rel.rtype is RelationType.COMP_TO:
            if AttributeType.COMPARISON not in attr_map.get(rel.head, ()):
                warnings.append(ValidationIssue(
                    RULE_COMP_TO_COMPARISON,
                    "comp_to head carries no comparison attribute",
                    ("relation", i)))
        elif rel.rtype in (RelationType.Q_PLUS, RelationType.Q_MINUS):
            if head_t is not EntityType.FACTOR or tail_t is not EntityType.FACTOR:
                warnings.append(ValidationIssue(
                    RULE_Q_ENDPOINTS,
                    f"{rel.rtype.value} endpoints are {head_t.value}/{tail_t.value}, not factors",
                    ("relation", i)))
        elif rel.rtype is RelationType.SUBTYPE:
            if head_t is not tail_t:
                warnings.append(ValidationIssue(
                    RULE_SUBTYPE_ENDPOINTS,
                    f"subtype endpoints have different types {head_t.value}/{tail_t.value}",
                    ("relation", i)))

    return ValidationReport(errors=_sorted_issues(errors),
                            warnings=_sorted_issues(warnings))


def overlapping_entity_pairs(graph: ClaimGraph) -> list[tuple[int, int]]:
    """All unordered index pairs whose token ranges intersect.

    Overlap is legal (spans may nest or cross); this is informational only.
    Output is canonical: pairs (i, j) with i < j, sorted lexicographically.
    """
    report = validate_structural(graph)
    if not report.ok:
        raise ValueError("overlapping_entity_pairs requires a structurally valid graph")
    pairs = []
    for i in range(len(graph.entities)):
        for j in range(i + 1, len(graph.entities)):
            if graph.entities[i].span.overlaps(graph.entities[j].span):
                pairs.append((i, j))
    return sorted(pairs)

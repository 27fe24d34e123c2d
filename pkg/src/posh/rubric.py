"""Presence-question planning: identifiers, pass scheduling and templating.

A scene graph becomes an ordered three-pass plan of presence questions. Every
object needs an identifier phrase that picks it out among same-class
collisions; candidates grow in complexity from the bare class name through
surface forms, attributes and relations up to part-of compositions, and are
rewritten into fluent noun phrases by the judge before use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from .errors import JudgeUnavailable, NoIdentifier, TemplateError
from .graph import PART_OF_LABEL, SceneGraph, SGObject

TIERS = ("class", "surface", "attribute", "relation", "part_of")

DIRECTIONS = ("mistake", "omission")

_ORDINALS = ("first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth")


def _load_template(name: str) -> str:
    return resources.files("posh.prompts").joinpath(name).read_text(encoding="utf-8").rstrip("\n")


TEMPLATE_VERSION = _load_template("VERSION")

_TEMPLATES = {
    ("entity", True): _load_template("entity_precision.txt"),
    ("entity", False): _load_template("entity_recall.txt"),
    ("attribute", True): _load_template("attribute_precision.txt"),
    ("attribute", False): _load_template("attribute_recall.txt"),
    ("relation", True): _load_template("relation_precision.txt"),
    ("relation", False): _load_template("relation_recall.txt"),
}

REWRITE_ATTRIBUTE_TEMPLATE = _load_template("rewrite_attribute.txt")
REWRITE_RELATION_TEMPLATE = _load_template("rewrite_relation.txt")


@dataclass
class Identifier:
    object_id: str
    raw: str
    tier: str
    rewritten: str | None = None
    rank: int = 0

    @property
    def text(self) -> str:
        return self.rewritten if self.rewritten is not None else self.raw


@dataclass
class RubricQuestion:
    question_id: str
    component_id: str
    kind: str  # entity | attribute | relation
    pass_index: int
    prompt: str
    direction: str  # mistake | omission


@dataclass
class PlanEntry:
    component_id: str
    kind: str
    pass_index: int
    depends_on: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "component": self.component_id,
            "kind": self.kind,
            "pass": self.pass_index,
            "depends_on": list(self.depends_on),
        }


@dataclass
class RubricPlan:
    doc_id: str
    entries: list[PlanEntry] = field(default_factory=list)

    def for_pass(self, pass_index: int) -> list[PlanEntry]:
        return [e for e in self.entries if e.pass_index == pass_index]

    def to_json(self) -> str:
        return json.dumps(
            {"doc_id": self.doc_id, "entries": [e.to_dict() for e in self.entries]},
            ensure_ascii=False,
            indent=2,
        )


def detect_collisions(graph: SceneGraph) -> dict[str, list[str]]:
    """Map class name -> ids of the objects sharing it (two or more only)."""
    by_class: dict[str, list[str]] = {}
    for obj in graph.objects:
        if obj.is_pron:
            continue
        by_class.setdefault(obj.class_name, []).append(obj.object_id)
    return {cls: ids for cls, ids in by_class.items() if len(ids) >= 2}


def _class_text(obj: SGObject) -> str:
    # Collectives read better under their surface form ("men", "trio").
    if obj.is_collective and obj.surface_forms:
        return obj.surface_forms[0].lower()
    return obj.class_name


def _raw_candidates(
    obj: SGObject, graph: SceneGraph, visiting: frozenset[str]
) -> list[tuple[str, str]]:
    """All (tier, text) candidates for one object, in tier order."""
    base = _class_text(obj)
    candidates: list[tuple[str, str]] = [("class", base)]
    for form in obj.surface_forms:
        lowered = form.lower()
        if lowered != base:
            candidates.append(("surface", lowered))
    for attr in graph.attributes:
        if attr.object_id == obj.object_id:
            candidates.append(("attribute", f"{base} {attr.text}"))
    for rel in graph.relations:
        if rel.head_id == obj.object_id and rel.kind != "part_of" and rel.tail_id != obj.object_id:
            tail = graph.object_by_id(rel.tail_id)
            candidates.append(("relation", f"{base} {rel.label} {_class_text(tail)}"))
    if obj.part_of is not None:
        parent = graph.object_by_id(obj.part_of)
        candidates.append(("part_of", f"{base} of {_composition_text(parent, graph, visiting)}"))
    return candidates


def _composition_text(obj: SGObject, graph: SceneGraph, visiting: frozenset[str] = frozenset()) -> str:
    """The phrase used when another identifier embeds this object."""
    if obj.object_id in visiting:
        return _class_text(obj)
    collisions = detect_collisions(graph)
    try:
        return _generate(obj, graph, collisions, visiting | {obj.object_id})[0].raw
    except NoIdentifier:
        return fallback_identifier(obj, graph, collisions).raw


def generate_identifiers(
    obj: SGObject, graph: SceneGraph, collisions: dict[str, list[str]]
) -> list[Identifier]:
    """Ordered unique identifier candidates for one object.

    A non-colliding object gets its bare class name and nothing else.
    Candidates textually identical to a candidate of another colliding object
    are excluded. Raises NoIdentifier when nothing unique remains.
    """
    return _generate(obj, graph, collisions, frozenset({obj.object_id}))


def _generate(
    obj: SGObject,
    graph: SceneGraph,
    collisions: dict[str, list[str]],
    visiting: frozenset[str],
) -> list[Identifier]:
    colliding = collisions.get(obj.class_name, [])
    if obj.object_id not in colliding:
        return [Identifier(object_id=obj.object_id, raw=_class_text(obj), tier="class", rank=0)]

    taken = set()
    for other_id in colliding:
        if other_id == obj.object_id:
            continue
        other = graph.object_by_id(other_id)
        taken |= {text for _, text in _raw_candidates(other, graph, visiting | {other_id})}

    result = []
    seen = set()
    for tier, text in _raw_candidates(obj, graph, visiting):
        if text in taken or text in seen:
            continue
        seen.add(text)
        result.append(Identifier(object_id=obj.object_id, raw=text, tier=tier, rank=TIERS.index(tier)))
    if not result:
        raise NoIdentifier(f"object {obj.object_id} ({obj.class_name}): every candidate collides")
    return result


def fallback_identifier(
    obj: SGObject, graph: SceneGraph, collisions: dict[str, list[str]]
) -> Identifier:
    """Document-order ordinal used when every candidate collides ("first man")."""
    colliding = collisions.get(obj.class_name, [obj.object_id])
    position = colliding.index(obj.object_id) if obj.object_id in colliding else 0
    ordinal = _ORDINALS[position] if position < len(_ORDINALS) else f"{position + 1}th"
    return Identifier(object_id=obj.object_id, raw=f"{ordinal} {_class_text(obj)}", tier="class", rank=0)


def object_identifiers(
    obj: SGObject, graph: SceneGraph, collisions: dict[str, list[str]]
) -> list[Identifier]:
    """Candidates with the ordinal fallback applied when the set is exhausted."""
    try:
        return generate_identifiers(obj, graph, collisions)
    except NoIdentifier:
        return [fallback_identifier(obj, graph, collisions)]


def plan_passes(graph: SceneGraph) -> RubricPlan:
    """Schedule components: top-level objects, part-of objects, then details.

    Pass 3 entries are instantiated lazily by the scoring engine once passes
    1 and 2 have confirmed which objects are present.
    """
    entries: list[PlanEntry] = []
    for obj in graph.objects:
        entries.append(
            PlanEntry(component_id=obj.object_id, kind="entity", pass_index=1 if obj.part_of is None else 2)
        )
    for attr in graph.attributes:
        entries.append(
            PlanEntry(
                component_id=attr.attribute_id,
                kind="attribute",
                pass_index=3,
                depends_on=(attr.object_id,),
            )
        )
    for rel in graph.relations:
        depends = (rel.head_id,) if rel.head_id == rel.tail_id else (rel.head_id, rel.tail_id)
        entries.append(
            PlanEntry(component_id=rel.relation_id, kind="relation", pass_index=3, depends_on=depends)
        )
    entries.sort(key=lambda e: e.pass_index)
    return RubricPlan(doc_id=graph.doc_id, entries=entries)


class RewriteCache:
    """Batched identifier rewriting, cached by raw text."""

    def __init__(self, judge) -> None:
        self._judge = judge
        self._cache: dict[str, str] = {}
        self.failures = 0

    def rewrite(self, identifier: Identifier) -> Identifier:
        return rewrite_identifier(identifier, self._judge, cache=self._cache, on_failure=self._note_failure)

    def rewrite_all(self, identifiers: list[Identifier]) -> list[Identifier]:
        return [self.rewrite(identifier) for identifier in identifiers]

    def _note_failure(self) -> None:
        self.failures += 1


def rewrite_identifier(
    identifier: Identifier,
    judge,
    *,
    cache: dict[str, str] | None = None,
    on_failure=None,
) -> Identifier:
    """Ask the judge for a fluent noun phrase; fall back to the raw text."""
    if cache is not None and identifier.raw in cache:
        identifier.rewritten = cache[identifier.raw]
        return identifier
    template = REWRITE_RELATION_TEMPLATE if identifier.tier == "relation" else REWRITE_ATTRIBUTE_TEMPLATE
    prompt = template.format(entity_identifier=identifier.raw)
    try:
        line = judge.rewrite(prompt)
        rewritten = _clean_rewrite(line) or identifier.raw
    except JudgeUnavailable:
        rewritten = identifier.raw
        if on_failure is not None:
            on_failure()
    identifier.rewritten = rewritten
    if cache is not None:
        cache[identifier.raw] = rewritten
    return identifier


def _clean_rewrite(completion: str) -> str:
    for line in completion.splitlines():
        stripped = line.strip().strip('"').strip("'").strip()
        if stripped:
            return stripped
    return ""


def template_question(
    *,
    question_id: str,
    component_id: str,
    kind: str,
    pass_index: int,
    direction: str,
    target_text: str,
    source_text: str,
    entity_identifier: str | None = None,
    attribute: str | None = None,
    entity1_identifier: str | None = None,
    entity2_identifier: str | None = None,
    relation: str | None = None,
) -> RubricQuestion:
    """Instantiate one verification question from the stored templates.

    The mistake direction uses the two-description (precision) variant, the
    omission direction the single-description (recall) variant.
    """
    if direction not in DIRECTIONS:
        raise TemplateError(f"unknown direction {direction!r}")
    if kind not in ("entity", "attribute", "relation"):
        raise TemplateError(f"unknown question kind {kind!r}")
    precision = direction == "mistake"
    template = _TEMPLATES[(kind, precision)]
    fields = {"target_text": target_text, "source_text": source_text}
    if kind == "entity":
        if not entity_identifier:
            raise TemplateError(f"{component_id}: entity question without an identifier")
        fields["entity_identifier"] = entity_identifier
    elif kind == "attribute":
        if not entity_identifier or attribute is None:
            raise TemplateError(f"{component_id}: attribute question needs an identifier and attribute text")
        fields["entity_identifier"] = entity_identifier
        fields["attribute"] = attribute
    else:
        if not entity1_identifier or not entity2_identifier or relation is None:
            raise TemplateError(f"{component_id}: relation question needs both identifiers and a label")
        fields["entity1_identifier"] = entity1_identifier
        fields["entity2_identifier"] = entity2_identifier
        fields["relation"] = relation
    prompt = template.format(**fields)
    return RubricQuestion(
        question_id=question_id,
        component_id=component_id,
        kind=kind,
        pass_index=pass_index,
        prompt=prompt,
        direction=direction,
    )


def part_of_relation_label() -> str:
    return PART_OF_LABEL

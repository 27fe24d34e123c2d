"""Three-pass presence scoring over a pair of scene graphs.

Mistakes are scored by checking every component of the generation's graph
against the reference text; omissions by checking every component of the
reference's graph against the generation text. Objects are tested first
(top-level, then part-of), each through its candidate identifiers in bulk;
attributes and relations of objects confirmed present follow in a third
pass. Details of absent objects inherit the minimum score instead of being
asked, mirroring how annotators mark all details of a missing entity.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

from .document import AnnotatedDocument, Span
from .errors import PoshError
from .graph import SceneGraph, extract_scene_graph
from .rubric import (
    Identifier,
    RewriteCache,
    detect_collisions,
    object_identifiers,
    plan_passes,
    template_question,
)

PROVENANCES = ("judged", "inherited_absent", "skipped")

OVERALL_MODES = ("harmonic", "arithmetic", "mistakes", "omissions")


@dataclass
class EngineConfig:
    presence_threshold: float = 2.0  # an object is present iff its best identifier scores above this
    presence_metric: str = "expected"  # threshold the expected score or the argmax digit
    overall: str = "harmonic"
    object_only_coarse: bool = False  # aggregate over objects only instead of all components
    absent_endpoint_policy: str = "inherit"  # "inherit" scores 1, "skip" excludes from the mean
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.overall not in OVERALL_MODES:
            raise ValueError(f"overall must be one of {OVERALL_MODES}")
        if self.presence_metric not in ("expected", "argmax"):
            raise ValueError("presence_metric must be 'expected' or 'argmax'")
        if self.absent_endpoint_policy not in ("inherit", "skip"):
            raise ValueError("absent_endpoint_policy must be 'inherit' or 'skip'")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


@dataclass
class GranularScore:
    component_id: str
    kind: str  # entity | attribute | relation
    direction: str  # mistake | omission
    span: Span
    text: str  # the span's surface text, for reports
    score: float
    provenance: str
    pass_index: int
    identifier: str | None = None

    def to_dict(self) -> dict:
        return {
            "component": self.component_id,
            "kind": self.kind,
            "direction": self.direction,
            "span": self.span.to_json(),
            "text": self.text,
            "score": self.score,
            "provenance": self.provenance,
            "pass": self.pass_index,
            "identifier": self.identifier,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "GranularScore":
        return cls(
            component_id=raw["component"],
            kind=raw["kind"],
            direction=raw["direction"],
            span=Span(raw["span"][0], raw["span"][1]),
            text=raw["text"],
            score=raw["score"],
            provenance=raw["provenance"],
            pass_index=raw["pass"],
            identifier=raw.get("identifier"),
        )


@dataclass
class PoshResult:
    gen_id: str
    ref_id: str
    granular: list[GranularScore]
    mistakes: float | None
    omissions: float | None
    overall: float | None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "gen_id": self.gen_id,
            "ref_id": self.ref_id,
            "coarse": {"mistakes": self.mistakes, "omissions": self.omissions, "overall": self.overall},
            "granular": [g.to_dict() for g in self.granular],
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "PoshResult":
        return cls(
            gen_id=raw["gen_id"],
            ref_id=raw["ref_id"],
            granular=[GranularScore.from_dict(g) for g in raw["granular"]],
            mistakes=raw["coarse"]["mistakes"],
            omissions=raw["coarse"]["omissions"],
            overall=raw["coarse"]["overall"],
            diagnostics=raw.get("diagnostics", {}),
        )


def aggregate(
    granular: Iterable[GranularScore], direction: str, *, object_only: bool = False
) -> float | None:
    """Mean of (score - 1) / 4 over the direction's components; None when empty.

    Inherited-absent entries count at their floor score of 1 (0 after
    normalization); skipped entries are excluded.
    """
    values = [
        (g.score - 1.0) / 4.0
        for g in granular
        if g.direction == direction
        and g.provenance != "skipped"
        and (not object_only or g.kind == "entity")
    ]
    if not values:
        return None
    return sum(values) / len(values)


def compose_overall(mistakes: float | None, omissions: float | None, mode: str) -> float | None:
    if mode == "mistakes":
        return mistakes
    if mode == "omissions":
        return omissions
    if mistakes is None or omissions is None:
        return None
    if mode == "arithmetic":
        return (mistakes + omissions) / 2.0
    if mistakes == 0.0 or omissions == 0.0:
        return 0.0
    return 2.0 * mistakes * omissions / (mistakes + omissions)


def _simplest_confirmed(scored: list[tuple[Identifier, float, float]], threshold: float) -> Identifier:
    """Pick the identifier that decides the object's outcome.

    `scored` rows are (identifier, expected score, presence value). Among
    candidates whose presence value clears the threshold, the simplest wins
    (lowest complexity rank, then shortest text). When none clears it, the
    best-scoring candidate is recorded instead.
    """
    rows = [(i, ident, presence) for i, (ident, _, presence) in enumerate(scored)]
    confirmed = [row for row in rows if row[2] > threshold]
    if confirmed:
        _, ident, _ = min(confirmed, key=lambda row: (row[1].rank, len(row[1].text), row[0]))
    else:
        _, ident, _ = min(rows, key=lambda row: (-row[2], row[0]))
    return ident


def _entity_questions(graph, plan, pass_index, direction, target_text, own_text, candidates):
    """One verification question per (object, candidate identifier) in plan order."""
    out = []
    for entry in plan.for_pass(pass_index):
        obj = graph.object_by_id(entry.component_id)
        for k, ident in enumerate(candidates[obj.object_id]):
            question = template_question(
                question_id=f"{direction}:{obj.object_id}:{k}",
                component_id=obj.object_id,
                kind="entity",
                pass_index=pass_index,
                direction=direction,
                target_text=target_text,
                source_text=own_text,
                entity_identifier=ident.text,
            )
            out.append((obj, ident, question))
    return out


def object_candidates(graph: SceneGraph, judge) -> dict[str, list[Identifier]]:
    """Rewritten identifier candidates for every object (batched, cached)."""
    collisions = detect_collisions(graph)
    rewriter = RewriteCache(judge)
    return {
        obj.object_id: rewriter.rewrite_all(object_identifiers(obj, graph, collisions))
        for obj in graph.objects
    }


def pass_prompts(graph: SceneGraph, other_text: str, direction: str, judge, *, own_text: str) -> list[str]:
    """The exact pass-1/2 prompts a scoring run would issue; feed to warm_cache."""
    plan = plan_passes(graph)
    candidates = object_candidates(graph, judge)
    prompts = []
    for pass_index in (1, 2):
        for _, _, question in _entity_questions(
            graph, plan, pass_index, direction, other_text, own_text, candidates
        ):
            prompts.append(question.prompt)
    return prompts


class _PassRunner:
    def __init__(self, graph: SceneGraph, other_text: str, own_text: str, direction: str, judge, config: EngineConfig):
        self.graph = graph
        self.other_text = other_text
        self.own_text = own_text
        self.direction = direction
        self.judge = judge
        self.config = config
        self.rewriter = RewriteCache(judge)
        self.questions_asked = 0

    def _score_batch(self, tasks: list[tuple]) -> list:
        """tasks: (question, component_text); merged in task order, not arrival order."""
        self.questions_asked += len(tasks)

        def run(task):
            question, component_text = task
            return self.judge.score_presence(question, component_text=component_text, target_text=self.other_text)

        if self.config.jobs > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=self.config.jobs) as pool:
                return list(pool.map(run, tasks))
        return [run(task) for task in tasks]

    def run(self) -> tuple[list[GranularScore], dict]:
        graph, config = self.graph, self.config
        plan = plan_passes(graph)
        collisions = detect_collisions(graph)
        candidates = {
            obj.object_id: self.rewriter.rewrite_all(object_identifiers(obj, graph, collisions))
            for obj in graph.objects
        }

        granular: list[GranularScore] = []
        chosen: dict[str, Identifier] = {}
        present: dict[str, bool] = {}

        for pass_index in (1, 2):
            entries = plan.for_pass(pass_index)
            tasks, owners = [], []
            for obj, ident, question in _entity_questions(
                graph, plan, pass_index, self.direction, self.other_text, self.own_text, candidates
            ):
                tasks.append((question, obj.mention_spans[0].text(self.own_text)))
                owners.append((obj, ident))
            distributions = self._score_batch(tasks)

            per_object: dict[str, list[tuple[Identifier, float, float]]] = {}
            for (obj, ident), dist in zip(owners, distributions):
                presence_value = dist.expected if config.presence_metric == "expected" else float(dist.top_digit)
                per_object.setdefault(obj.object_id, []).append((ident, dist.expected, presence_value))
            for entry in entries:
                obj = graph.object_by_id(entry.component_id)
                scored = per_object[obj.object_id]
                best = max(expected for _, expected, _ in scored)
                ident = _simplest_confirmed(scored, config.presence_threshold)
                present[obj.object_id] = max(p for _, _, p in scored) > config.presence_threshold
                chosen[obj.object_id] = ident
                span = obj.mention_spans[0]
                granular.append(
                    GranularScore(
                        component_id=obj.object_id,
                        kind="entity",
                        direction=self.direction,
                        span=span,
                        text=span.text(self.own_text),
                        score=best,
                        provenance="judged",
                        pass_index=pass_index,
                        identifier=ident.text,
                    )
                )

        attr_by_id = {a.attribute_id: a for a in graph.attributes}
        rel_by_id = {r.relation_id: r for r in graph.relations}
        tasks, meta = [], []
        inherited: list[GranularScore] = []
        for entry in plan.for_pass(3):
            if all(present.get(dep, False) for dep in entry.depends_on):
                if entry.kind == "attribute":
                    attr = attr_by_id[entry.component_id]
                    question = template_question(
                        question_id=f"{self.direction}:{attr.attribute_id}",
                        component_id=attr.attribute_id,
                        kind="attribute",
                        pass_index=3,
                        direction=self.direction,
                        target_text=self.other_text,
                        source_text=self.own_text,
                        entity_identifier=chosen[attr.object_id].text,
                        attribute=attr.text,
                    )
                    tasks.append((question, attr.span.text(self.own_text)))
                    meta.append((entry, attr.span, chosen[attr.object_id].text))
                else:
                    rel = rel_by_id[entry.component_id]
                    question = template_question(
                        question_id=f"{self.direction}:{rel.relation_id}",
                        component_id=rel.relation_id,
                        kind="relation",
                        pass_index=3,
                        direction=self.direction,
                        target_text=self.other_text,
                        source_text=self.own_text,
                        entity1_identifier=chosen[rel.head_id].text,
                        entity2_identifier=chosen[rel.tail_id].text,
                        relation=rel.label,
                    )
                    tasks.append((question, rel.span.text(self.own_text)))
                    meta.append((entry, rel.span, chosen[rel.head_id].text))
            else:
                span = attr_by_id[entry.component_id].span if entry.kind == "attribute" else rel_by_id[entry.component_id].span
                # Attributes of absent objects always inherit the floor score;
                # the skip policy only exists for relations with an absent endpoint.
                provenance = "inherited_absent"
                if entry.kind == "relation" and config.absent_endpoint_policy == "skip":
                    provenance = "skipped"
                inherited.append(
                    GranularScore(
                        component_id=entry.component_id,
                        kind=entry.kind,
                        direction=self.direction,
                        span=span,
                        text=span.text(self.own_text),
                        score=1.0,
                        provenance=provenance,
                        pass_index=3,
                    )
                )

        distributions = self._score_batch(tasks)
        judged3 = [
            GranularScore(
                component_id=entry.component_id,
                kind=entry.kind,
                direction=self.direction,
                span=span,
                text=span.text(self.own_text),
                score=dist.expected,
                provenance="judged",
                pass_index=3,
                identifier=identifier,
            )
            for (entry, span, identifier), dist in zip(meta, distributions)
        ]

        order = {entry.component_id: n for n, entry in enumerate(plan.entries)}
        pass3 = sorted(judged3 + inherited, key=lambda g: order[g.component_id])
        granular.extend(pass3)

        diagnostics = {
            "questions": self.questions_asked,
            "inherited_absent": sum(1 for g in granular if g.provenance == "inherited_absent"),
            "skipped": sum(1 for g in granular if g.provenance == "skipped"),
            "rewrite_failures": self.rewriter.failures,
        }
        return granular, diagnostics


def run_passes(
    graph: SceneGraph,
    other_text: str,
    direction: str,
    judge,
    config: EngineConfig | None = None,
    *,
    own_text: str,
) -> list[GranularScore]:
    """Score every component of `graph` for presence in `other_text`."""
    granular, _ = _run_passes_with_diagnostics(graph, other_text, direction, judge, config, own_text=own_text)
    return granular


def _run_passes_with_diagnostics(graph, other_text, direction, judge, config=None, *, own_text):
    runner = _PassRunner(graph, other_text, own_text, direction, judge, config or EngineConfig())
    return runner.run()


def score_pair(
    gen: AnnotatedDocument,
    ref: AnnotatedDocument,
    judge,
    config: EngineConfig | None = None,
) -> PoshResult:
    """Extract both scene graphs and produce granular plus coarse scores.

    The overall score composes the two coarse scores (harmonic mean by
    default, 0 if either side is 0); a side with an empty graph reports None
    for its coarse score and for the overall.
    """
    config = config or EngineConfig()
    if gen.role != "generation":
        raise PoshError(f"document {gen.doc_id} has role {gen.role!r}, expected 'generation'")
    if ref.role != "reference":
        raise PoshError(f"document {ref.doc_id} has role {ref.role!r}, expected 'reference'")

    gen_graph = extract_scene_graph(gen)
    ref_graph = extract_scene_graph(ref)

    mistakes_granular, m_diag = _run_passes_with_diagnostics(
        gen_graph, ref.text, "mistake", judge, config, own_text=gen.text
    )
    omissions_granular, o_diag = _run_passes_with_diagnostics(
        ref_graph, gen.text, "omission", judge, config, own_text=ref.text
    )

    granular = mistakes_granular + omissions_granular
    mistakes = aggregate(granular, "mistake", object_only=config.object_only_coarse)
    omissions = aggregate(granular, "omission", object_only=config.object_only_coarse)
    overall = compose_overall(mistakes, omissions, config.overall)

    diagnostics = {
        "mistake_pass": m_diag,
        "omission_pass": o_diag,
        "gen_graph": {"components": gen_graph.component_count(), **gen_graph.diagnostics},
        "ref_graph": {"components": ref_graph.component_count(), **ref_graph.diagnostics},
        "empty_graph": [
            side
            for side, graph in (("generation", gen_graph), ("reference", ref_graph))
            if graph.component_count() == 0
        ],
        "overall_mode": config.overall,
        "presence_threshold": config.presence_threshold,
    }
    return PoshResult(
        gen_id=gen.doc_id,
        ref_id=ref.doc_id,
        granular=granular,
        mistakes=mistakes,
        omissions=omissions,
        overall=overall,
        diagnostics=diagnostics,
    )


def reward(gen: AnnotatedDocument, ref: AnnotatedDocument, judge, config: EngineConfig | None = None) -> float | None:
    """Single-scalar reward: the pair's overall score."""
    return score_pair(gen, ref, judge, config).overall

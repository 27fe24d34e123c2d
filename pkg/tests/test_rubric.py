import pytest

from posh.document import Span
from posh.errors import JudgeUnavailable, NoIdentifier, TemplateError
from posh.graph import SceneGraph, SGAttribute, SGObject, SGRelation
from posh.rubric import (
    RewriteCache,
    detect_collisions,
    fallback_identifier,
    generate_identifiers,
    object_identifiers,
    plan_passes,
    rewrite_identifier,
    template_question,
)

from helpers import TableJudge


def obj(oid, cls, part_of=None, collective=False, surface=None, pos=0):
    return SGObject(
        object_id=oid,
        class_name=cls,
        surface_forms=surface if surface is not None else [cls],
        mention_spans=[Span(pos, pos + 1)],
        head=(0, pos),
        head_parent=pos,
        part_of=part_of,
        is_collective=collective,
    )


def attr(aid, oid, text, pos=0):
    return SGAttribute(attribute_id=aid, object_id=oid, text=text, span=Span(pos, pos + 1))


def rel(rid, head, label, tail, kind="verb", pos=0):
    return SGRelation(relation_id=rid, head_id=head, label=label, tail_id=tail, span=Span(pos, pos + 1), kind=kind)


def graph(objects, attributes=(), relations=()):
    return SceneGraph(
        doc_id="g", role="generation", objects=list(objects), attributes=list(attributes), relations=list(relations)
    )


# ---------------------------------------------------------------------------
# collisions


def test_collisions_lists_only_duplicated_classes():
    g = graph([obj("o0", "man"), obj("o1", "man", pos=1), obj("o2", "woman", pos=2)])
    assert detect_collisions(g) == {"man": ["o0", "o1"]}


def test_collisions_empty_graph():
    assert detect_collisions(graph([])) == {}


def test_collisions_include_part_of_objects():
    g = graph(
        [obj("o0", "man"), obj("o1", "man", pos=1), obj("o2", "man", part_of="o0", pos=2)]
    )
    assert detect_collisions(g) == {"man": ["o0", "o1", "o2"]}


# ---------------------------------------------------------------------------
# identifier candidates


def test_singleton_gets_bare_class():
    g = graph([obj("o0", "dog")])
    idents = generate_identifiers(g.objects[0], g, detect_collisions(g))
    assert [(i.raw, i.tier, i.rank) for i in idents] == [("dog", "class", 0)]


def test_colliding_object_with_attribute_gets_attribute_tier():
    g = graph(
        [obj("o0", "man"), obj("o1", "man", pos=1)],
        attributes=[attr("a0", "o1", "tall")],
    )
    idents = generate_identifiers(g.objects[1], g, detect_collisions(g))
    assert [(i.raw, i.tier) for i in idents] == [("man tall", "attribute")]


def test_surface_form_tier():
    g = graph([obj("o0", "man", surface=["man", "musician"]), obj("o1", "man", pos=1)])
    idents = generate_identifiers(g.objects[0], g, detect_collisions(g))
    assert ("musician", "surface") in [(i.raw, i.tier) for i in idents]


def test_relation_tier():
    g = graph(
        [obj("o0", "man"), obj("o1", "man", pos=1), obj("o2", "horse", pos=2)],
        relations=[rel("r0", "o0", "on", "o2", kind="preposition")],
    )
    idents = generate_identifiers(g.objects[0], g, detect_collisions(g))
    assert [(i.raw, i.tier) for i in idents] == [("man on horse", "relation")]


def test_part_of_tier_composes_parent_identifier():
    g = graph(
        [
            obj("o0", "man"),
            obj("o1", "man", pos=1),
            obj("o2", "face", part_of="o0", pos=2),
            obj("o3", "face", part_of="o1", pos=3),
        ],
        attributes=[attr("a0", "o0", "tall")],
    )
    idents = generate_identifiers(g.objects[2], g, detect_collisions(g))
    assert [(i.raw, i.tier) for i in idents] == [("face of man tall", "part_of")]


def test_exhausted_candidates_raise_and_fall_back_to_ordinal():
    g = graph([obj("o0", "man"), obj("o1", "man", pos=1), obj("o2", "man", pos=2)])
    collisions = detect_collisions(g)
    with pytest.raises(NoIdentifier):
        generate_identifiers(g.objects[1], g, collisions)
    fallback = fallback_identifier(g.objects[1], g, collisions)
    assert fallback.raw == "second man"
    assert object_identifiers(g.objects[1], g, collisions)[0].raw == "second man"


def test_collective_uses_plural_surface():
    g = graph([obj("o0", "man", collective=True, surface=["Men"])])
    idents = generate_identifiers(g.objects[0], g, detect_collisions(g))
    assert idents[0].raw == "men"


def test_final_identifiers_unique_among_colliders():
    g = graph(
        [obj("o0", "man"), obj("o1", "man", pos=1), obj("o2", "man", pos=2)],
        attributes=[attr("a0", "o0", "tall"), attr("a1", "o1", "short")],
    )
    collisions = detect_collisions(g)
    finals = [object_identifiers(o, g, collisions)[0].raw for o in g.objects]
    assert len(set(finals)) == len(finals)


def test_candidates_ordered_by_complexity_rank():
    g = graph(
        [obj("o0", "man", surface=["man", "musician"]), obj("o1", "man", pos=1), obj("o2", "horse", pos=2)],
        attributes=[attr("a0", "o0", "tall")],
        relations=[rel("r0", "o0", "on", "o2")],
    )
    idents = generate_identifiers(g.objects[0], g, detect_collisions(g))
    ranks = [i.rank for i in idents]
    assert ranks == sorted(ranks)
    assert [i.raw for i in idents] == ["musician", "man tall", "man on horse"]


# ---------------------------------------------------------------------------
# pass planning


def test_plan_passes_part_of_scheduling():
    g = graph(
        [obj("o0", "man"), obj("o1", "face", part_of="o0", pos=1)],
        attributes=[attr("a0", "o0", "tall")],
    )
    plan = plan_passes(g)
    assert [e.component_id for e in plan.for_pass(1)] == ["o0"]
    assert [e.component_id for e in plan.for_pass(2)] == ["o1"]
    assert [(e.component_id, e.depends_on) for e in plan.for_pass(3)] == [("a0", ("o0",))]


def test_plan_passes_no_part_of_means_empty_pass_two():
    g = graph([obj("o0", "dog")])
    assert plan_passes(g).for_pass(2) == []


def test_relation_between_pass1_and_pass2_objects_needs_both():
    g = graph(
        [obj("o0", "man"), obj("o1", "face", part_of="o0", pos=1)],
        relations=[rel("r0", "o1", "part of", "o0", kind="part_of")],
    )
    entries = plan_passes(g).for_pass(3)
    assert entries[0].depends_on == ("o1", "o0")


def test_every_component_has_exactly_one_plan_entry():
    g = graph(
        [obj("o0", "man"), obj("o1", "horse", pos=1)],
        attributes=[attr("a0", "o0", "tall")],
        relations=[rel("r0", "o0", "on", "o1")],
    )
    plan = plan_passes(g)
    ids = [e.component_id for e in plan.entries]
    assert sorted(ids) == ["a0", "o0", "o1", "r0"]
    assert len(set(ids)) == len(ids)


# ---------------------------------------------------------------------------
# rewriting


def test_rewrite_uses_judge_and_caches():
    judge = TableJudge(rewrites={"dog small": "the small dog"})
    cache = RewriteCache(judge)
    from posh.rubric import Identifier

    first = cache.rewrite(Identifier(object_id="o0", raw="dog small", tier="attribute", rank=2))
    assert first.text == "the small dog"
    calls = []
    judge.rewrite = lambda prompt: calls.append(prompt) or "never"
    second = cache.rewrite(Identifier(object_id="o1", raw="dog small", tier="attribute", rank=2))
    assert second.text == "the small dog"
    assert calls == []  # served from the cache


def test_rewrite_falls_back_on_judge_failure():
    class DownJudge:
        def rewrite(self, prompt):
            raise JudgeUnavailable("down")

    from posh.rubric import Identifier

    cache = RewriteCache(DownJudge())
    ident = cache.rewrite(Identifier(object_id="o0", raw="cat jumps on window", tier="relation", rank=3))
    assert ident.text == "cat jumps on window"
    assert cache.failures == 1


def test_relation_tier_uses_relation_prompt():
    prompts = []

    class SpyJudge:
        def rewrite(self, prompt):
            prompts.append(prompt)
            return "the cat jumping on the window"

    from posh.rubric import Identifier

    rewrite_identifier(Identifier(object_id="o0", raw="cat jumps on window", tier="relation", rank=3), SpyJudge())
    assert "the cat jumping on the window" in prompts[0]  # relation prompt carries its own example
    rewrite_identifier(Identifier(object_id="o1", raw="dog small", tier="attribute", rank=2), SpyJudge())
    assert "the small dog" in prompts[1]  # attribute prompt example


# ---------------------------------------------------------------------------
# templating


def test_entity_mistake_prompt_contains_both_descriptions():
    q = template_question(
        question_id="q0",
        component_id="o0",
        kind="entity",
        pass_index=1,
        direction="mistake",
        target_text="REF TEXT",
        source_text="GEN TEXT",
        entity_identifier="the woman in white",
    )
    assert "DESCRIPTION1: REF TEXT" in q.prompt
    assert "DESCRIPTION2: GEN TEXT" in q.prompt
    assert 'Is an entity matching "the woman in white" (from DESCRIPTION2) mentioned in DESCRIPTION1?' in q.prompt
    assert "1: absent; 2: weak hint; 3: partial; 4: clear; 5: explicit & unambiguous." in q.prompt
    assert "Respond ONLY with an integer 1-5." in q.prompt


def test_entity_omission_prompt_has_single_description():
    q = template_question(
        question_id="q0",
        component_id="o0",
        kind="entity",
        pass_index=1,
        direction="omission",
        target_text="GEN TEXT",
        source_text="REF TEXT",
        entity_identifier="the dog",
    )
    assert "DESCRIPTION: GEN TEXT" in q.prompt
    assert "DESCRIPTION2" not in q.prompt
    assert 'Is an entity matching "the dog" mentioned in the DESCRIPTION?' in q.prompt


def test_attribute_prompt_form():
    q = template_question(
        question_id="q1",
        component_id="a0",
        kind="attribute",
        pass_index=3,
        direction="mistake",
        target_text="R",
        source_text="G",
        entity_identifier="the man",
        attribute="tall",
    )
    assert 'Is "the man" (from DESCRIPTION2) described as "tall" in DESCRIPTION1?' in q.prompt


def test_relation_prompt_form():
    q = template_question(
        question_id="q2",
        component_id="r0",
        kind="relation",
        pass_index=3,
        direction="mistake",
        target_text="R",
        source_text="G",
        entity1_identifier="the man",
        entity2_identifier="the water",
        relation="pouring",
    )
    assert (
        'Is the relation between "the man" and "the water" (in DESCRIPTION2) described as "pouring" in DESCRIPTION1?'
        in q.prompt
    )


def test_template_error_when_identifier_missing():
    with pytest.raises(TemplateError):
        template_question(
            question_id="q3",
            component_id="o0",
            kind="entity",
            pass_index=1,
            direction="mistake",
            target_text="R",
            source_text="G",
        )


def test_prompts_fully_instantiated():
    q = template_question(
        question_id="q4",
        component_id="o0",
        kind="attribute",
        pass_index=3,
        direction="omission",
        target_text="target",
        source_text="source",
        entity_identifier="the dog",
        attribute="small",
    )
    assert "{" not in q.prompt and "}" not in q.prompt

"""Span-localized scene graphs built from dependency-annotated documents.

Each sentence is reduced to objects (noun heads), attributes (modifiers,
predicates, numerals, intransitive verbs) and relations (transitive verbs,
adpositions and part-of constructions), every component carrying a character
span into the source text. Sentence fragments are then merged across the
document through coreference clusters so attributes and relations stay
attached to the right entity.

Dependency labels follow the ClearNLP/OntoNotes inventory emitted by common
English parsers (nsubj, dobj, amod, prep, pobj, poss, compound, acomp, attr,
conj, neg, nummod, prt, agent, ...); the UD aliases obj/iobj are accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from .document import AnnotatedDocument, Sentence, Span, Token

NOUN_POS = ("NOUN", "PROPN")

SUBJECT_DEPS = frozenset({"nsubj", "nsubjpass"})
OBJECT_DEPS = frozenset({"dobj", "obj", "dative", "iobj", "oprd"})
SUBJECT_INHERIT_DEPS = frozenset({"conj", "xcomp", "ccomp", "advcl"})

# Nouns whose singular form still denotes a group.
COLLECTIVE_LEMMAS = frozenset(
    {"group", "pair", "couple", "trio", "quartet", "crowd", "team", "family", "herd", "flock"}
)

_NUMBER_WORDS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
    "dozen": 12, "hundred": 100, "thousand": 1000,
}

PART_OF_LABEL = "part of"


@dataclass
class SGObject:
    object_id: str
    class_name: str
    surface_forms: list[str]
    mention_spans: list[Span]
    head: tuple[int, int]  # (sentence index, token index) of the head noun
    head_parent: int  # token index of the head noun's dependency head
    part_of: str | None = None
    is_collective: bool = False
    is_pron: bool = False  # placeholder awaiting coreference unification

    def to_dict(self) -> dict:
        return {
            "id": self.object_id,
            "class": self.class_name,
            "surface_forms": list(self.surface_forms),
            "mention_spans": [s.to_json() for s in self.mention_spans],
            "part_of": self.part_of,
            "is_collective": self.is_collective,
            "head": list(self.head),
        }


@dataclass
class SGAttribute:
    attribute_id: str
    object_id: str
    text: str
    span: Span

    def to_dict(self) -> dict:
        return {"id": self.attribute_id, "object": self.object_id, "text": self.text, "span": self.span.to_json()}


@dataclass
class SGRelation:
    relation_id: str
    head_id: str
    label: str
    tail_id: str
    span: Span
    kind: str  # verb | preposition | part_of

    def to_dict(self) -> dict:
        return {
            "id": self.relation_id,
            "head": self.head_id,
            "label": self.label,
            "tail": self.tail_id,
            "kind": self.kind,
            "span": self.span.to_json(),
        }


@dataclass
class SceneGraph:
    doc_id: str
    role: str
    objects: list[SGObject] = field(default_factory=list)
    attributes: list[SGAttribute] = field(default_factory=list)
    relations: list[SGRelation] = field(default_factory=list)
    diagnostics: dict[str, int] = field(default_factory=dict)

    def object_by_id(self, object_id: str) -> SGObject:
        for obj in self.objects:
            if obj.object_id == object_id:
                return obj
        raise KeyError(object_id)

    def component_count(self) -> int:
        return len(self.objects) + len(self.attributes) + len(self.relations)

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "role": self.role,
            "objects": [o.to_dict() for o in self.objects],
            "attributes": [a.to_dict() for a in self.attributes],
            "relations": [r.to_dict() for r in self.relations],
            "diagnostics": dict(sorted(self.diagnostics.items())),
        }


class IdAllocator:
    """Sequential component ids in document order, shared across fragments."""

    def __init__(self) -> None:
        self._counts = {"o": 0, "a": 0, "r": 0}

    def _next(self, prefix: str) -> str:
        value = f"{prefix}{self._counts[prefix]}"
        self._counts[prefix] += 1
        return value

    def obj(self) -> str:
        return self._next("o")

    def attr(self) -> str:
        return self._next("a")

    def rel(self) -> str:
        return self._next("r")


def present_participle(lemma: str) -> str:
    """Heuristic -ing form: sleep -> sleeping, run -> running, smile -> smiling."""
    w = lemma.lower()
    if not w:
        return w
    if w.endswith("ie"):
        return w[:-2] + "ying"
    vowels = "aeiou"
    if len(w) >= 3 and w[-1] not in vowels + "wxy" and w[-2] in vowels and w[-3] not in vowels:
        return w + w[-1] + "ing"
    if w.endswith("e") and w not in {"be", "see", "flee"}:
        return w[:-1] + "ing"
    return w + "ing"


def _numeral_value(text: str) -> int | None:
    raw = text.replace(",", "").lower()
    if raw.isdigit():
        return int(raw)
    return _NUMBER_WORDS.get(raw)


def _cover(tokens: Iterable[Token]) -> Span:
    spans = [t.span for t in tokens]
    return Span(min(s.start for s in spans), max(s.end for s in spans))


class _SentenceBuilder:
    def __init__(self, sentence: Sentence, sent_index: int, ids: IdAllocator, collapse_adp_chains: bool):
        self.sent = sentence
        self.sent_index = sent_index
        self.ids = ids
        self.collapse_adp_chains = collapse_adp_chains
        self.toks = sentence.tokens
        self.children: list[list[int]] = [[] for _ in self.toks]
        for i, tok in enumerate(self.toks):
            if tok.head != i and 0 <= tok.head < len(self.toks):
                self.children[tok.head].append(i)
        self.node_of: dict[int, SGObject] = {}
        self.objects: list[SGObject] = []
        self.attributes: list[SGAttribute] = []
        self.relations: list[SGRelation] = []
        self.diagnostics: dict[str, int] = {}
        self._consumed_adps: set[int] = set()

    def _count(self, key: str, amount: int = 1) -> None:
        if amount:
            self.diagnostics[key] = self.diagnostics.get(key, 0) + amount

    # -- node creation -------------------------------------------------

    def _is_copula(self, idx: int) -> bool:
        return self.toks[idx].lemma.lower() == "be"

    def _copula_has_subject(self, idx: int) -> bool:
        return any(self.toks[c].dep in SUBJECT_DEPS for c in self.children[idx])

    def _make_nodes(self) -> None:
        for i, tok in enumerate(self.toks):
            if tok.pos in NOUN_POS:
                head = self.toks[tok.head]
                if tok.dep == "compound" and head.pos in NOUN_POS:
                    continue  # compound dependents become attributes of the head noun
                if tok.dep == "attr" and self._is_copula(tok.head) and self._copula_has_subject(tok.head):
                    continue  # predicate nominals become attributes of the subject
                plural = tok.pos == "NOUN" and tok.text.lower() != tok.lemma.lower()
                node = SGObject(
                    object_id=self.ids.obj(),
                    class_name=tok.lemma.lower(),
                    surface_forms=[tok.text],
                    mention_spans=[tok.span],
                    head=(self.sent_index, i),
                    head_parent=tok.head,
                    is_collective=plural or tok.lemma.lower() in COLLECTIVE_LEMMAS,
                )
            elif tok.pos == "PRON":
                node = SGObject(
                    object_id=self.ids.obj(),
                    class_name=tok.lemma.lower(),
                    surface_forms=[],
                    mention_spans=[tok.span],
                    head=(self.sent_index, i),
                    head_parent=tok.head,
                    is_pron=True,
                )
            else:
                continue
            self.node_of[i] = node
            self.objects.append(node)

    # -- dependency helpers --------------------------------------------

    def _subject_token(self, idx: int, seen: frozenset[int] = frozenset()) -> int | None:
        for c in self.children[idx]:
            if self.toks[c].dep in SUBJECT_DEPS:
                return c
        tok = self.toks[idx]
        if tok.dep in SUBJECT_INHERIT_DEPS and tok.head != idx and idx not in seen:
            return self._subject_token(tok.head, seen | {idx})
        return None

    def _conj_group(self, idx: int) -> list[int]:
        """The coordination group of a noun token, in token order."""
        if idx not in self.node_of:
            return []
        root = idx
        while self.toks[root].dep == "conj" and self.toks[root].head != root and self.toks[root].head in self.node_of:
            root = self.toks[root].head
        group = [root]
        frontier = [root]
        while frontier:
            current = frontier.pop()
            for c in self.children[current]:
                if self.toks[c].dep == "conj" and c in self.node_of:
                    group.append(c)
                    frontier.append(c)
        return sorted(set(group))

    def _node_group(self, idx: int) -> list[SGObject]:
        return [self.node_of[i] for i in self._conj_group(idx)]

    def _neg_tokens(self, idx: int) -> list[int]:
        negs = [c for c in self.children[idx] if self.toks[c].dep == "neg"]
        for c in self.children[idx]:
            if self.toks[c].dep in ("aux", "auxpass"):
                negs.extend(g for g in self.children[c] if self.toks[g].dep == "neg")
        return sorted(negs)

    def _prt_tokens(self, idx: int) -> list[int]:
        return [c for c in self.children[idx] if self.toks[c].dep == "prt"]

    def _adp_chain(self, idx: int) -> tuple[list[int], list[int]]:
        """Follow a chain of adpositions; return (chain token indices, pobj token indices)."""
        chain = [idx]
        current = idx
        while True:
            pobjs = [c for c in self.children[current] if self.toks[c].dep in ("pobj", "obj")]
            if pobjs:
                return chain, pobjs
            nexts = [
                c
                for c in self.children[current]
                if self.toks[c].pos == "ADP" and self.toks[c].dep in ("prep", "pcomp")
            ]
            if self.collapse_adp_chains and nexts:
                current = nexts[0]
                chain.append(current)
            else:
                return chain, []

    # -- component emission --------------------------------------------

    def _add_attribute(self, owner: SGObject, text: str, anchor_tokens: list[Token]) -> None:
        owner_tok = self.toks[owner.head[1]]
        span = _cover(anchor_tokens + [owner_tok])
        self.attributes.append(
            SGAttribute(attribute_id=self.ids.attr(), object_id=owner.object_id, text=text, span=span)
        )

    def _add_relation(self, head: SGObject, label: str, tail: SGObject, kind: str, anchor_tokens: list[Token]) -> None:
        span = _cover(anchor_tokens + [self.toks[head.head[1]], self.toks[tail.head[1]]])
        self.relations.append(
            SGRelation(
                relation_id=self.ids.rel(),
                head_id=head.object_id,
                label=label,
                tail_id=tail.object_id,
                span=span,
                kind=kind,
            )
        )

    def _add_part_of(self, part: SGObject, whole: SGObject, anchor_tokens: list[Token]) -> None:
        if part.object_id == whole.object_id:
            self._count("part_of_cycles_skipped")
            return
        # Reject chains that would loop back onto the part within this document.
        seen = {part.object_id}
        by_id = {o.object_id: o for o in self.objects}
        current: str | None = whole.object_id
        while current is not None:
            if current in seen:
                self._count("part_of_cycles_skipped")
                return
            seen.add(current)
            current = by_id[current].part_of if current in by_id else None
        if part.part_of is None:
            part.part_of = whole.object_id
        self._add_relation(part, PART_OF_LABEL, whole, "part_of", anchor_tokens)

    # -- construction sweep ----------------------------------------------

    def _amod_owner_token(self, idx: int) -> int | None:
        """Resolve an adjective to the noun token it modifies (following conj chains)."""
        tok = self.toks[idx]
        if tok.dep == "amod":
            return tok.head if tok.head in self.node_of else None
        if tok.dep == "acomp":
            return self._subject_token(tok.head)
        if tok.dep == "conj":
            current = idx
            seen = set()
            while self.toks[current].dep == "conj" and current not in seen:
                seen.add(current)
                current = self.toks[current].head
            if self.toks[current].pos == "ADJ" and current != idx:
                return self._amod_owner_token(current)
        return None

    def _process_adjective(self, idx: int) -> None:
        tok = self.toks[idx]
        owner_tok = self._amod_owner_token(idx)
        if owner_tok is None or owner_tok not in self.node_of:
            return
        negs = self._neg_tokens(idx)
        if tok.dep == "acomp" or self.toks[idx].dep == "conj":
            # "is not small": the negation usually attaches to the copula.
            negs = sorted(set(negs) | set(self._neg_tokens(tok.head)))
        text = ("not " if negs else "") + tok.text.lower()
        anchors = [tok] + [self.toks[n] for n in negs]
        distribute = tok.dep in ("amod", "conj")
        owners = self._node_group(owner_tok) if distribute else [self.node_of[owner_tok]]
        for n, owner in enumerate(owners):
            self._add_attribute(owner, text, anchors)
            if n:
                self._count("distributed_attributes")

    def _process_verb(self, idx: int) -> None:
        tok = self.toks[idx]
        subj_tok = self._subject_token(idx)
        subjects = self._node_group(subj_tok) if subj_tok is not None else []
        negs = self._neg_tokens(idx)
        prts = self._prt_tokens(idx)
        neg_prefix = "not " if negs else ""
        label_core = " ".join([tok.text.lower()] + [self.toks[p].text.lower() for p in prts])
        anchor = [tok] + [self.toks[n] for n in negs] + [self.toks[p] for p in prts]
        emitted = False

        passive = subj_tok is not None and self.toks[subj_tok].dep == "nsubjpass"
        if passive:
            agents: list[SGObject] = []
            agent_tokens: list[Token] = []
            for c in self.children[idx]:
                if self.toks[c].dep == "agent" and self.toks[c].pos == "ADP":
                    chain, pobjs = self._adp_chain(c)
                    self._consumed_adps.update(chain)
                    agent_tokens = [self.toks[t] for t in chain]
                    for p in pobjs:
                        agents.extend(self._node_group(p))
            if agents:
                for agent in agents:
                    for patient in subjects:
                        self._add_relation(agent, neg_prefix + label_core, patient, "verb", anchor + agent_tokens)
                        emitted = True
            elif subjects:
                for patient in subjects:
                    self._add_attribute(patient, neg_prefix + label_core, anchor)
                emitted = True
        else:
            object_tokens = [c for c in self.children[idx] if self.toks[c].dep in OBJECT_DEPS]
            object_tokens += [
                c
                for c in self.children[idx]
                if self.toks[c].dep == "attr" and not self._is_copula(idx) and c in self.node_of
            ]
            for o_tok in sorted(object_tokens):
                for subj in subjects:
                    for obj in self._node_group(o_tok):
                        self._add_relation(subj, neg_prefix + label_core, obj, "verb", anchor)
                        emitted = True

        for c in self.children[idx]:
            if self.toks[c].pos == "ADP" and self.toks[c].dep == "prep":
                chain, pobjs = self._adp_chain(c)
                self._consumed_adps.update(chain)
                if not pobjs:
                    continue
                prep_label = " ".join(self.toks[t].text.lower() for t in chain)
                chain_tokens = [self.toks[t] for t in chain]
                for p in sorted(pobjs):
                    for subj in subjects:
                        for obj in self._node_group(p):
                            self._add_relation(
                                subj,
                                f"{neg_prefix}{label_core} {prep_label}",
                                obj,
                                "verb",
                                anchor + chain_tokens,
                            )
                            emitted = True

        if not emitted:
            if subjects and not passive:
                text = neg_prefix + " ".join(
                    [present_participle(tok.lemma)] + [self.toks[p].text.lower() for p in prts]
                )
                for subj in subjects:
                    self._add_attribute(subj, text, anchor)
            elif not subjects:
                self._count("skipped_constructions")

    def _process_noun_prep(self, idx: int) -> None:
        tok = self.toks[idx]
        chain, pobjs = self._adp_chain(idx)
        self._consumed_adps.update(chain)
        if not pobjs:
            self._count("skipped_constructions")
            return
        chain_tokens = [self.toks[t] for t in chain]
        label = " ".join(t.text.lower() for t in chain_tokens)

        head_nodes: list[SGObject] = []
        if tok.head in self.node_of:
            head_nodes = self._node_group(tok.head)
        elif self._is_copula(tok.head) or self.toks[tok.head].pos != "VERB":
            subj_tok = self._subject_token(tok.head)
            if subj_tok is not None:
                head_nodes = self._node_group(subj_tok)
        if not head_nodes:
            self._count("skipped_constructions")
            return

        if label == "of" and tok.head in self.node_of:
            whole = self.node_of.get(pobjs[0])
            if whole is not None:
                self._add_part_of(self.node_of[tok.head], whole, chain_tokens)
            return

        for p in sorted(pobjs):
            for head_node in head_nodes:
                for obj in self._node_group(p):
                    self._add_relation(head_node, label, obj, "preposition", chain_tokens)

    def _process_token(self, idx: int) -> None:
        tok = self.toks[idx]
        if tok.pos == "ADJ":
            self._process_adjective(idx)
        elif tok.pos in NOUN_POS and tok.dep == "attr" and self._is_copula(tok.head):
            subj_tok = self._subject_token(tok.head)
            if subj_tok is not None and subj_tok in self.node_of:
                negs = self._neg_tokens(tok.head)
                text = ("not " if negs else "") + tok.text.lower()
                for subj in self._node_group(subj_tok):
                    self._add_attribute(subj, text, [tok] + [self.toks[n] for n in negs])
        elif tok.pos in NOUN_POS and tok.dep == "compound" and tok.head in self.node_of:
            self._add_attribute(self.node_of[tok.head], tok.text.lower(), [tok])
        elif tok.pos == "NUM" and tok.dep == "nummod" and tok.head in self.node_of:
            value = _numeral_value(tok.text)
            if value is not None and value < 2:
                return  # singular counts carry no information beyond the noun itself
            owner = self.node_of[tok.head]
            owner.is_collective = True
            self._add_attribute(owner, tok.text.lower(), [tok])
        elif tok.pos == "VERB" and tok.lemma.lower() != "be":
            self._process_verb(idx)
        elif tok.pos == "ADP" and tok.dep == "prep" and idx not in self._consumed_adps:
            head = self.toks[tok.head]
            if head.pos == "VERB" and head.lemma.lower() != "be":
                return  # emitted while processing the verb
            self._process_noun_prep(idx)
        if tok.dep == "poss" and idx in self.node_of and tok.head in self.node_of:
            self._add_part_of(self.node_of[tok.head], self.node_of[idx], [tok])

    def build(self) -> SceneGraph:
        self._make_nodes()
        for idx in range(len(self.toks)):
            self._process_token(idx)
        return SceneGraph(
            doc_id="",
            role="",
            objects=self.objects,
            attributes=self.attributes,
            relations=self.relations,
            diagnostics=self.diagnostics,
        )


def build_sentence_graph(
    sentence: Sentence,
    sent_index: int = 0,
    ids: IdAllocator | None = None,
    *,
    collapse_adp_chains: bool = True,
) -> SceneGraph:
    """Build the scene-graph fragment for one sentence.

    Unparseable constructions are skipped and tallied in the fragment's
    diagnostics rather than raised. Pronouns yield placeholder nodes (flagged
    `is_pron`) that only coreference merging can turn into real objects.
    """
    builder = _SentenceBuilder(sentence, sent_index, ids or IdAllocator(), collapse_adp_chains)
    return builder.build()


def _copy_graph_parts(fragments: Iterable[SceneGraph]):
    objects, attributes, relations = [], [], []
    diagnostics: dict[str, int] = {}
    for fragment in fragments:
        objects.extend(replace(o, surface_forms=list(o.surface_forms), mention_spans=list(o.mention_spans)) for o in fragment.objects)
        attributes.extend(replace(a) for a in fragment.attributes)
        relations.extend(replace(r) for r in fragment.relations)
        for key, value in fragment.diagnostics.items():
            diagnostics[key] = diagnostics.get(key, 0) + value
    return objects, attributes, relations, diagnostics


def merge_graphs(
    fragments: list[SceneGraph],
    coref,
    *,
    doc_id: str = "",
    role: str = "generation",
) -> SceneGraph:
    """Unify objects across sentence fragments through coreference clusters.

    Objects whose head tokens fall inside mentions of one cluster collapse
    into a single object that keeps the earliest non-pronoun mention's class
    and id and the union of spans, surface forms, attributes and relations.
    A cluster that would unify an object with its own part-of ancestor is a
    merge conflict: it is counted in diagnostics and left unmerged. Nothing
    is ever dropped here; attachment is preserved exactly (up to collapsing
    duplicate edges created by the unification itself).
    """
    objects, attributes, relations, diagnostics = _copy_graph_parts(fragments)

    def count(key: str, amount: int = 1) -> None:
        if amount:
            diagnostics[key] = diagnostics.get(key, 0) + amount

    order = {o.object_id: n for n, o in enumerate(objects)}
    parent = {o.object_id: o.object_id for o in objects}
    part_parent = {o.object_id: o.part_of for o in objects}

    def find(node_id: str) -> str:
        while parent[node_id] != node_id:
            parent[node_id] = parent[parent[node_id]]
            node_id = parent[node_id]
        return node_id

    def mention_node(mention) -> SGObject | None:
        inside = [
            o
            for o in objects
            if o.head[0] == mention.sent and mention.start_tok <= o.head[1] < mention.end_tok
        ]
        heads = [
            o
            for o in inside
            if not (mention.start_tok <= o.head_parent < mention.end_tok) or o.head_parent == o.head[1]
        ]
        candidates = heads or inside
        return min(candidates, key=lambda o: order[o.object_id]) if candidates else None

    def walk_has_cycle() -> bool:
        for start in {find(n) for n in parent}:
            seen: set[str] = set()
            current: str | None = start
            while current is not None:
                current = find(current)
                if current in seen:
                    return True
                seen.add(current)
                nxt = part_parent.get(current)
                current = find(nxt) if nxt is not None else None
        return False

    for cluster in coref:
        member_nodes = []
        for mention in cluster.mentions:
            node = mention_node(mention)
            if node is None:
                count("unresolved_mentions")
            else:
                member_nodes.append(node)
        reps = sorted({find(n.object_id) for n in member_nodes}, key=order.get)
        if len(reps) < 2:
            continue
        target = min(reps, key=lambda r: (next(o.is_pron for o in objects if o.object_id == r), order[r]))

        parent_snapshot = dict(parent)
        part_snapshot = dict(part_parent)
        merged_part = part_parent.get(target)
        for rep in reps:
            if rep == target:
                continue
            if merged_part is None:
                merged_part = part_parent.get(rep)
            parent[rep] = target
        part_parent[target] = merged_part
        if walk_has_cycle():
            parent.clear()
            parent.update(parent_snapshot)
            part_parent.clear()
            part_parent.update(part_snapshot)
            count("merge_conflicts")

    groups: dict[str, list[SGObject]] = {}
    for obj in objects:
        groups.setdefault(find(obj.object_id), []).append(obj)

    merged_objects: list[SGObject] = []
    for obj in objects:
        rep = find(obj.object_id)
        if rep != obj.object_id:
            continue
        members = groups[rep]
        non_pron = [m for m in members if not m.is_pron]
        canon = non_pron[0] if non_pron else members[0]
        surface: list[str] = []
        for member in non_pron:
            for form in member.surface_forms:
                if form not in surface:
                    surface.append(form)
        spans = sorted({(s.start, s.end) for m in members for s in m.mention_spans})
        raw_part = part_parent.get(rep)
        merged_objects.append(
            SGObject(
                object_id=rep,
                class_name=canon.class_name,
                surface_forms=surface,
                mention_spans=[Span(s, e) for s, e in spans],
                head=canon.head,
                head_parent=canon.head_parent,
                part_of=find(raw_part) if raw_part is not None else None,
                is_collective=any(m.is_collective for m in members),
                is_pron=not non_pron,
            )
        )

    merged_attributes: list[SGAttribute] = []
    seen_attrs: set[tuple] = set()
    for attr in attributes:
        owner = find(attr.object_id)
        key = (owner, attr.text, attr.span.start, attr.span.end)
        if key in seen_attrs:
            count("duplicates_collapsed")
            continue
        seen_attrs.add(key)
        merged_attributes.append(replace(attr, object_id=owner))

    merged_relations: list[SGRelation] = []
    seen_rels: set[tuple] = set()
    for rel in relations:
        head_id, tail_id = find(rel.head_id), find(rel.tail_id)
        key = (head_id, rel.label, tail_id, rel.kind, rel.span.start, rel.span.end)
        if key in seen_rels:
            count("duplicates_collapsed")
            continue
        seen_rels.add(key)
        merged_relations.append(replace(rel, head_id=head_id, tail_id=tail_id))

    return SceneGraph(
        doc_id=doc_id,
        role=role,
        objects=merged_objects,
        attributes=merged_attributes,
        relations=merged_relations,
        diagnostics=diagnostics,
    )


def _drop_unresolved_pronouns(graph: SceneGraph) -> SceneGraph:
    pron_ids = {o.object_id for o in graph.objects if o.is_pron}
    if not pron_ids:
        return graph
    diagnostics = dict(graph.diagnostics)

    def count(key: str, amount: int) -> None:
        if amount:
            diagnostics[key] = diagnostics.get(key, 0) + amount

    objects = []
    for obj in graph.objects:
        if obj.object_id in pron_ids:
            continue
        if obj.part_of in pron_ids:
            obj = replace(obj, part_of=None)
        objects.append(obj)
    attributes = [a for a in graph.attributes if a.object_id not in pron_ids]
    relations = [r for r in graph.relations if r.head_id not in pron_ids and r.tail_id not in pron_ids]
    count("dropped_pronoun_objects", len(pron_ids))
    count("dropped_pronoun_attributes", len(graph.attributes) - len(attributes))
    count("dropped_pronoun_relations", len(graph.relations) - len(relations))
    return SceneGraph(
        doc_id=graph.doc_id,
        role=graph.role,
        objects=objects,
        attributes=attributes,
        relations=relations,
        diagnostics=diagnostics,
    )


def extract_scene_graph(doc: AnnotatedDocument, *, collapse_adp_chains: bool = True) -> SceneGraph:
    """Full pipeline: per-sentence fragments, coreference merge, pronoun cleanup.

    Deterministic: identical input yields an identical graph, including id
    assignment order (component ids follow document order of head tokens).
    """
    ids = IdAllocator()
    fragments = [
        build_sentence_graph(sentence, i, ids, collapse_adp_chains=collapse_adp_chains)
        for i, sentence in enumerate(doc.sentences)
    ]
    merged = merge_graphs(fragments, doc.coref, doc_id=doc.doc_id, role=doc.role)
    return _drop_unresolved_pronouns(merged)

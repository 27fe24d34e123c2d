"""Shared test helpers: compact builders for hand-annotated parse fixtures."""

from __future__ import annotations

import json

from posh.document import AnnotatedDocument, load_document
from posh.judge import ScoreDistribution


def make_payload(
    doc_id: str,
    role: str,
    sents: list[tuple[str, list[tuple[str, str, str, int, str]]]],
    coref: list[list[tuple[int, int, int]]] = (),
) -> dict:
    """Build interchange JSON from hand-written parse rows.

    Each sentence is (sentence_text, rows) with rows (text, lemma, pos, head,
    dep); character spans are computed by scanning the joined text. Coref
    clusters are lists of (sent, start_tok, end_tok) tuples.
    """
    full = " ".join(text for text, _ in sents)
    cursor = 0
    sentences = []
    for sent_text, rows in sents:
        s_start = full.index(sent_text, cursor)
        tok_cursor = s_start
        tokens = []
        for i, (text, lemma, pos, head, dep) in enumerate(rows):
            t_start = full.index(text, tok_cursor)
            tokens.append(
                {
                    "i": i,
                    "text": text,
                    "lemma": lemma,
                    "pos": pos,
                    "head": head,
                    "dep": dep,
                    "span": [t_start, t_start + len(text)],
                }
            )
            tok_cursor = t_start + len(text)
        sentences.append({"span": [s_start, s_start + len(sent_text)], "tokens": tokens})
        cursor = s_start + len(sent_text)
    return {
        "schema_version": 1,
        "doc_id": doc_id,
        "role": role,
        "text": full,
        "sentences": sentences,
        "coref": [
            {"id": n, "mentions": [{"sent": s, "start_tok": a, "end_tok": b} for s, a, b in cluster]}
            for n, cluster in enumerate(coref)
        ],
    }


def make_doc(doc_id, role, sents, coref=()) -> AnnotatedDocument:
    return load_document(json.dumps(make_payload(doc_id, role, sents, coref)))


# -- frequently used parse rows ---------------------------------------------

SMALL_DOG_BARKS = (
    "The small dog barks.",
    [
        ("The", "the", "DET", 2, "det"),
        ("small", "small", "ADJ", 2, "amod"),
        ("dog", "dog", "NOUN", 3, "nsubj"),
        ("barks", "bark", "VERB", 3, "ROOT"),
        (".", ".", "OTHER", 3, "punct"),
    ],
)

DOG_SLEEPS = (
    "A dog sleeps.",
    [
        ("A", "a", "DET", 1, "det"),
        ("dog", "dog", "NOUN", 2, "nsubj"),
        ("sleeps", "sleep", "VERB", 2, "ROOT"),
        (".", ".", "OTHER", 2, "punct"),
    ],
)

CAT_JUMPS_ON_WINDOW = (
    "A cat jumps on the window.",
    [
        ("A", "a", "DET", 1, "det"),
        ("cat", "cat", "NOUN", 2, "nsubj"),
        ("jumps", "jump", "VERB", 2, "ROOT"),
        ("on", "on", "ADP", 2, "prep"),
        ("the", "the", "DET", 5, "det"),
        ("window", "window", "NOUN", 3, "pobj"),
        (".", ".", "OTHER", 2, "punct"),
    ],
)


def dog_doc(doc_id="d1", role="generation") -> AnnotatedDocument:
    return make_doc(doc_id, role, [SMALL_DOG_BARKS])


# -- canned judges -----------------------------------------------------------


class TableJudge:
    """Scores and rewrites looked up from tables; everything else defaults."""

    def __init__(self, scores=None, rewrites=None, default=5.0):
        self.scores = scores or {}
        self.rewrites = rewrites or {}
        self.default = default
        self.questions = []

    def score_presence(self, question, component_text="", target_text=""):
        self.questions.append(question)
        for needle, value in self.scores.items():
            if needle in question.prompt:
                return ScoreDistribution.point(int(value)) if float(value).is_integer() else ScoreDistribution.from_weights({1: 5 - value, 5: value - 1})
        if float(self.default).is_integer():
            return ScoreDistribution.point(int(self.default))
        return ScoreDistribution.from_weights({1: 5 - self.default, 5: self.default - 1})

    def rewrite(self, prompt):
        import re

        match = re.search(r'"([^"]+)"', prompt)
        raw = match.group(1) if match else ""
        return self.rewrites.get(raw, raw)

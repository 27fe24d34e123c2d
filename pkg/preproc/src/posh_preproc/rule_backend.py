"""Deterministic heuristic English pipeline.

A small rule-based tokenizer, tagger, dependency attacher and pronoun
resolver. It exists so the adapter (and its frozen fixtures) run with no
model downloads; production runs should prefer the spaCy backend. The rules
target simple declarative description sentences and always produce output
satisfying the interchange invariants (one root per sentence, in-bounds
heads, spans that reconstruct the text).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_TOKEN_RE = re.compile(r"\w+|'s|n't|[^\w\s]")
_SENT_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")

DETS = {"a", "an", "the", "this", "that", "these", "those"}
ADPS = {
    "on", "in", "at", "of", "by", "with", "under", "over", "from", "to", "into",
    "onto", "near", "behind", "above", "below", "out", "through", "across",
    "between", "around", "beside", "against", "along", "toward", "towards",
}
PRONOUNS = {
    "he", "she", "it", "they", "him", "her", "them", "i", "you", "we", "us", "me",
    "his", "its", "their", "hers", "theirs", "my", "your", "our", "mine", "ours",
}
POSSESSIVE_PRONOUNS = {"his", "her", "its", "their", "my", "your", "our"}
AUXILIARIES = {
    "is": "be", "are": "be", "was": "be", "were": "be", "be": "be", "been": "be",
    "being": "be", "am": "be", "does": "do", "do": "do", "did": "do",
    "has": "have", "have": "have", "had": "have",
}
NEGATIONS = {"not", "n't", "never"}
CONJUNCTIONS = {"and", "or", "but"}
NUMBER_WORDS = {
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    "ten", "eleven", "twelve", "dozen",
}
ADJECTIVES = {
    "small", "big", "large", "red", "blue", "green", "yellow", "white", "black",
    "tall", "short", "pale", "dark", "bright", "old", "young", "new", "long",
    "central", "tiny", "huge", "round", "wooden", "golden", "quiet", "loud",
    "happy", "sad", "empty", "full", "wide", "narrow", "deep",
}
ADJ_SUFFIXES = ("ful", "less", "ish", "ous", "ive", "able")
VERB_LEMMAS = {
    "bark", "jump", "sleep", "hang", "hold", "perform", "stand", "smile", "pour",
    "wave", "greet", "run", "walk", "sit", "look", "watch", "wear", "carry",
    "play", "paint", "point", "lean", "rest", "ride",
    "fly", "swim", "read", "write", "sing", "dance", "eat", "drink", "see",
}
IRREGULAR_NOUNS = {
    "men": "man", "women": "woman", "children": "child", "people": "person",
    "feet": "foot", "teeth": "tooth", "mice": "mouse", "geese": "goose",
}
IRREGULAR_PARTICIPLES = {"held", "worn", "seen", "done", "made", "drawn", "shown", "hung"}


@dataclass
class RuleToken:
    text: str
    start: int
    end: int
    lemma: str = ""
    pos: str = "OTHER"
    head: int = 0
    dep: str = "dep"


def _noun_lemma(word: str) -> str:
    lowered = word.lower()
    if lowered in IRREGULAR_NOUNS:
        return IRREGULAR_NOUNS[lowered]
    if lowered.endswith("ies") and len(lowered) > 4:
        return lowered[:-3] + "y"
    if lowered.endswith(("ses", "xes", "zes", "ches", "shes")):
        return lowered[:-2]
    if lowered.endswith("s") and not lowered.endswith("ss") and len(lowered) > 3:
        return lowered[:-1]
    return lowered


def _verb_lemma(word: str) -> str | None:
    """Return the lemma when the word looks like an inflected known verb."""
    lowered = word.lower()
    if lowered in IRREGULAR_PARTICIPLES:
        return {"held": "hold", "worn": "wear", "seen": "see", "done": "do",
                "made": "make", "drawn": "draw", "shown": "show", "hung": "hang"}[lowered]
    candidates = [lowered]
    if lowered.endswith("ing"):
        stem = lowered[:-3]
        candidates += [stem, stem + "e"]
        if len(stem) >= 2 and stem[-1] == stem[-2]:
            candidates.append(stem[:-1])
    if lowered.endswith("ed"):
        stem = lowered[:-2]
        candidates += [stem, stem[:-1] if stem and stem[-1] == "e" else stem]
        if len(stem) >= 2 and stem[-1] == stem[-2]:
            candidates.append(stem[:-1])
    if lowered.endswith("ies"):
        candidates.append(lowered[:-3] + "y")
    elif lowered.endswith(("ses", "xes", "zes", "ches", "shes")):
        candidates.append(lowered[:-2])
    elif lowered.endswith("s") and not lowered.endswith("ss"):
        candidates.append(lowered[:-1])
    for candidate in candidates:
        if candidate in VERB_LEMMAS:
            return candidate
    return None


def sentence_offsets(text: str) -> list[tuple[int, int]]:
    """Half-open character ranges of sentences (never splitting non-space runs)."""
    offsets = []
    cursor = 0
    for chunk in _SENT_SPLIT_RE.split(text):
        if not chunk:
            continue
        start = text.index(chunk, cursor)
        offsets.append((start, start + len(chunk)))
        cursor = start + len(chunk)
    return [(s, e) for s, e in offsets if text[s:e].strip()]


def _tag(tokens: list[RuleToken]) -> None:
    for i, tok in enumerate(tokens):
        word = tok.text
        lowered = word.lower()
        if lowered in DETS:
            tok.pos, tok.lemma = "DET", lowered
        elif lowered in ADPS:
            tok.pos, tok.lemma = "ADP", lowered
        elif lowered in PRONOUNS:
            tok.pos, tok.lemma = "PRON", lowered
        elif lowered in AUXILIARIES:
            tok.pos, tok.lemma = "OTHER", AUXILIARIES[lowered]
        elif lowered in NEGATIONS or lowered == "n't":
            tok.pos, tok.lemma = "OTHER", "not"
        elif lowered in CONJUNCTIONS:
            tok.pos, tok.lemma = "OTHER", lowered
        elif lowered.isdigit() or lowered in NUMBER_WORDS:
            tok.pos, tok.lemma = "NUM", lowered
        elif lowered in ADJECTIVES or lowered.endswith(ADJ_SUFFIXES):
            tok.pos, tok.lemma = "ADJ", lowered
        elif not word[0].isalnum():
            tok.pos, tok.lemma = "OTHER", word
        else:
            verb_lemma = _verb_lemma(lowered)
            looks_verbal = verb_lemma is not None and not (
                i > 0 and tokens[i - 1].pos in ("DET", "ADJ", "NUM")
            )
            if looks_verbal and lowered.endswith("ing"):
                # participle right after a noun is usually a noun ("oil painting")
                prev = tokens[i - 1] if i > 0 else None
                if prev is not None and prev.pos in ("NOUN", "PROPN"):
                    looks_verbal = False
            if looks_verbal:
                tok.pos, tok.lemma = "VERB", verb_lemma
            elif word[0].isupper() and i > 0:
                tok.pos, tok.lemma = "PROPN", word
            else:
                tok.pos, tok.lemma = "NOUN", _noun_lemma(word)


def _noun_run_head(tokens: list[RuleToken], start: int) -> int | None:
    """Index of the last noun in the nominal run beginning at/after `start`."""
    i = start
    head = None
    while i < len(tokens) and tokens[i].pos in ("ADJ", "NUM", "NOUN", "PROPN", "DET"):
        if tokens[i].pos in ("NOUN", "PROPN"):
            head = i
        i += 1
    return head


def _attach(tokens: list[RuleToken]) -> None:
    n = len(tokens)
    root = next((i for i, t in enumerate(tokens) if t.pos == "VERB"), None)
    if root is None:
        root = next((i for i, t in enumerate(tokens) if t.lemma == "be" and t.pos == "OTHER"), None)
    if root is None:
        root = next((i for i, t in enumerate(tokens) if t.pos in ("NOUN", "PROPN")), 0)

    passive = (
        tokens[root].pos == "VERB"
        and any(t.lemma == "be" for t in tokens[:root] if t.pos == "OTHER")
        and (tokens[root].text.lower().endswith("ed") or tokens[root].text.lower() in IRREGULAR_PARTICIPLES)
    )

    assigned = [False] * n
    tokens[root].head, tokens[root].dep = root, "ROOT"
    assigned[root] = True

    open_adps: list[int] = []
    subject_taken = False
    first_conjunct: int | None = None

    for i, tok in enumerate(tokens):
        if assigned[i]:
            continue
        lowered = tok.text.lower()
        if tok.pos == "DET":
            head = _noun_run_head(tokens, i + 1)
            tok.head, tok.dep = (head, "det") if head is not None else (root, "det")
        elif tok.pos == "NUM":
            head = _noun_run_head(tokens, i + 1)
            tok.head, tok.dep = (head, "nummod") if head is not None else (root, "nummod")
        elif tok.pos == "ADJ":
            head = _noun_run_head(tokens, i + 1)
            if head is not None:
                tok.head, tok.dep = head, "amod"
            else:
                tok.head, tok.dep = root, "acomp"
        elif tok.pos == "OTHER" and tok.lemma == "not":
            tok.head, tok.dep = root, "neg"
        elif tok.pos == "OTHER" and tok.lemma in ("be", "do", "have") and i != root:
            tok.head, tok.dep = root, "auxpass" if passive else "aux"
        elif tok.pos == "OTHER" and lowered in CONJUNCTIONS:
            prev_noun = next((j for j in range(i - 1, -1, -1) if tokens[j].pos in ("NOUN", "PROPN")), None)
            if prev_noun is not None:
                if first_conjunct is None:
                    first_conjunct = prev_noun
                tok.head, tok.dep = first_conjunct, "cc"
            else:
                tok.head, tok.dep = root, "cc"
        elif tok.text == "'s":
            prev_noun = next((j for j in range(i - 1, -1, -1) if tokens[j].pos in ("NOUN", "PROPN")), root)
            tok.head, tok.dep = prev_noun, "case"
        elif tok.pos == "ADP":
            prev = next(
                (j for j in range(i - 1, -1, -1) if tokens[j].pos in ("NOUN", "PROPN", "VERB") or tokens[j].lemma == "be"),
                root,
            )
            dep = "agent" if passive and lowered == "by" else "prep"
            tok.head, tok.dep = prev, dep
            open_adps.append(i)
        elif tok.pos in ("NOUN", "PROPN", "PRON"):
            nxt = tokens[i + 1] if i + 1 < n else None
            run_head = _noun_run_head(tokens, i)
            if tok.pos == "PRON" and lowered in POSSESSIVE_PRONOUNS:
                head = _noun_run_head(tokens, i + 1)
                tok.head, tok.dep = (head, "poss") if head is not None else (root, "nsubj")
            elif nxt is not None and nxt.text == "'s":
                head = _noun_run_head(tokens, i + 2)
                tok.head, tok.dep = (head, "poss") if head is not None else (root, "poss")
            elif tok.pos != "PRON" and run_head is not None and run_head != i:
                tok.head, tok.dep = run_head, "compound"
            elif open_adps:
                tok.head, tok.dep = open_adps.pop(), "pobj"
            elif first_conjunct is not None and i != first_conjunct and not any(
                tokens[j].pos in ("VERB", "ADP") for j in range(first_conjunct + 1, i)
            ):
                tok.head, tok.dep = first_conjunct, "conj"
            elif i < root and not subject_taken:
                tok.head, tok.dep = root, "nsubjpass" if passive else "nsubj"
                subject_taken = True
            elif i > root:
                tok.head, tok.dep = root, "dobj"
            else:
                tok.head, tok.dep = root, "dep"
        elif tok.pos == "VERB":
            tok.head, tok.dep = root, "conj"
        elif not tok.text[0].isalnum():
            tok.head, tok.dep = root, "punct"
        else:
            tok.head, tok.dep = root, "dep"
        assigned[i] = True

    # exactly one root: repoint any stray self-reference
    for i, tok in enumerate(tokens):
        if tok.head == i and i != root:
            tok.head, tok.dep = root, "dep"


def parse_sentence(text: str, offset: int) -> list[RuleToken]:
    tokens = [
        RuleToken(text=m.group(), start=offset + m.start(), end=offset + m.end())
        for m in _TOKEN_RE.finditer(text)
    ]
    if not tokens:
        return []
    _tag(tokens)
    _attach(tokens)
    return tokens


def resolve_pronouns(sentences: list[list[RuleToken]]) -> list[list[tuple[int, int, int]]]:
    """Link each personal pronoun to the nearest preceding noun token.

    Returns clusters as lists of (sentence, start_tok, end_tok) mentions.
    """
    clusters: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
    nouns: list[tuple[int, int]] = []
    for s_idx, tokens in enumerate(sentences):
        for t_idx, tok in enumerate(tokens):
            if tok.pos in ("NOUN", "PROPN"):
                nouns.append((s_idx, t_idx))
            elif tok.pos == "PRON" and nouns:
                antecedent = nouns[-1]
                cluster = clusters.setdefault(antecedent, [(antecedent[0], antecedent[1], antecedent[1] + 1)])
                cluster.append((s_idx, t_idx, t_idx + 1))
    out = []
    for mentions in clusters.values():
        seen = set()
        unique = [m for m in mentions if not (m in seen or seen.add(m))]
        if len(unique) >= 2:
            out.append(unique)
    return out

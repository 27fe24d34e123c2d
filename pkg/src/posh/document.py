"""Validated linguistic interchange documents.

The scoring engine never parses text itself. It consumes documents that some
upstream tool (any dependency parser plus coreference resolver) has already
annotated and exported as interchange JSON: sentences of tokens with lemmas,
coarse part-of-speech tags and dependency edges, plus coreference clusters.
All offsets are character offsets into the original text, so spans compare
across tools and encodings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .errors import IntegrityError, SchemaError, VersionError

SCHEMA_VERSION = 1

POS_TAGS = ("NOUN", "PROPN", "PRON", "ADJ", "VERB", "ADP", "DET", "NUM", "OTHER")
ROLES = ("generation", "reference")


@dataclass(frozen=True, order=True)
class Span:
    """Half-open character interval [start, end) into the source text."""

    start: int
    end: int

    def text(self, source: str) -> str:
        return source[self.start : self.end]

    def overlaps(self, other: "Span") -> bool:
        return self.start < other.end and other.start < self.end

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def to_json(self) -> list[int]:
        return [self.start, self.end]

    @classmethod
    def from_json(cls, value: Any) -> "Span":
        if (
            not isinstance(value, list)
            or len(value) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
        ):
            raise SchemaError(f"span must be a two-integer array, got {value!r}")
        return cls(value[0], value[1])


@dataclass(frozen=True)
class Token:
    index: int
    text: str
    lemma: str
    pos: str
    head: int  # token index of the dependency head within the sentence; self for root
    dep: str
    span: Span

    @property
    def is_root(self) -> bool:
        return self.head == self.index


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    span: Span


@dataclass(frozen=True)
class Mention:
    """A coreference mention: token range [start_tok, end_tok) in one sentence."""

    sent: int
    start_tok: int
    end_tok: int

    def to_json(self) -> dict[str, int]:
        return {"sent": self.sent, "start_tok": self.start_tok, "end_tok": self.end_tok}


@dataclass(frozen=True)
class CorefCluster:
    cluster_id: int
    mentions: tuple[Mention, ...]


@dataclass(frozen=True)
class AnnotatedDocument:
    doc_id: str
    role: str
    text: str
    sentences: tuple[Sentence, ...]
    coref: tuple[CorefCluster, ...] = field(default_factory=tuple)
    schema_version: int = SCHEMA_VERSION


_TOKEN_KEYS = ("i", "text", "lemma", "pos", "head", "dep", "span")
_SENTENCE_KEYS = ("span", "tokens")
_MENTION_KEYS = ("sent", "start_tok", "end_tok")
_CLUSTER_KEYS = ("id", "mentions")
_DOC_KEYS = ("schema_version", "doc_id", "role", "text", "sentences", "coref")


def _require_keys(obj: Any, keys: tuple[str, ...], where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object, got {type(obj).__name__}")
    missing = [k for k in keys if k not in obj]
    extra = [k for k in obj if k not in keys]
    if missing:
        raise SchemaError(f"{where}: missing fields {missing}")
    if extra:
        raise SchemaError(f"{where}: unexpected fields {extra}")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise SchemaError(message)


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def load_document(data: bytes | str) -> AnnotatedDocument:
    """Parse and fully validate one interchange JSON document.

    Raises SchemaError for structural problems, VersionError for an
    unsupported schema version and IntegrityError when the parsed document
    violates an invariant (dangling heads or mentions, overlapping spans...).
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc

    _require_keys(raw, _DOC_KEYS, "document")
    if not _is_int(raw["schema_version"]):
        raise SchemaError("schema_version: expected an integer")
    if raw["schema_version"] != SCHEMA_VERSION:
        raise VersionError(
            f"unsupported schema version {raw['schema_version']} (expected {SCHEMA_VERSION})"
        )
    _require(isinstance(raw["doc_id"], str) and raw["doc_id"] != "", "doc_id: expected a non-empty string")
    _require(raw["role"] in ROLES, f"role: expected one of {ROLES}, got {raw['role']!r}")
    _require(isinstance(raw["text"], str), "text: expected a string")
    _require(isinstance(raw["sentences"], list), "sentences: expected an array")
    _require(isinstance(raw["coref"], list), "coref: expected an array")

    sentences = []
    for s_idx, s_raw in enumerate(raw["sentences"]):
        _require_keys(s_raw, _SENTENCE_KEYS, f"sentence {s_idx}")
        _require(isinstance(s_raw["tokens"], list), f"sentence {s_idx}: tokens must be an array")
        tokens = []
        for t_idx, t_raw in enumerate(s_raw["tokens"]):
            _require_keys(t_raw, _TOKEN_KEYS, f"sentence {s_idx} token {t_idx}")
            _require(_is_int(t_raw["i"]), f"sentence {s_idx} token {t_idx}: i must be an integer")
            for key in ("text", "lemma", "pos", "dep"):
                _require(
                    isinstance(t_raw[key], str),
                    f"sentence {s_idx} token {t_idx}: {key} must be a string",
                )
            _require(_is_int(t_raw["head"]), f"sentence {s_idx} token {t_idx}: head must be an integer")
            _require(
                t_raw["pos"] in POS_TAGS,
                f"sentence {s_idx} token {t_idx}: pos {t_raw['pos']!r} not in {POS_TAGS}",
            )
            tokens.append(
                Token(
                    index=t_raw["i"],
                    text=t_raw["text"],
                    lemma=t_raw["lemma"],
                    pos=t_raw["pos"],
                    head=t_raw["head"],
                    dep=t_raw["dep"],
                    span=Span.from_json(t_raw["span"]),
                )
            )
        sentences.append(Sentence(tokens=tuple(tokens), span=Span.from_json(s_raw["span"])))

    clusters = []
    for c_idx, c_raw in enumerate(raw["coref"]):
        _require_keys(c_raw, _CLUSTER_KEYS, f"coref cluster {c_idx}")
        _require(_is_int(c_raw["id"]), f"coref cluster {c_idx}: id must be an integer")
        _require(isinstance(c_raw["mentions"], list), f"coref cluster {c_idx}: mentions must be an array")
        mentions = []
        for m_idx, m_raw in enumerate(c_raw["mentions"]):
            _require_keys(m_raw, _MENTION_KEYS, f"coref cluster {c_idx} mention {m_idx}")
            for key in _MENTION_KEYS:
                _require(
                    _is_int(m_raw[key]),
                    f"coref cluster {c_idx} mention {m_idx}: {key} must be an integer",
                )
            mentions.append(Mention(m_raw["sent"], m_raw["start_tok"], m_raw["end_tok"]))
        clusters.append(CorefCluster(cluster_id=c_raw["id"], mentions=tuple(mentions)))

    doc = AnnotatedDocument(
        doc_id=raw["doc_id"],
        role=raw["role"],
        text=raw["text"],
        sentences=tuple(sentences),
        coref=tuple(clusters),
        schema_version=raw["schema_version"],
    )
    violations = validate_document(doc)
    if violations:
        raise IntegrityError("; ".join(violations))
    return doc


def validate_document(doc: AnnotatedDocument) -> list[str]:
    """Check every document invariant; return one message per violation.

    Reports, never raises. An empty list means the document is valid.
    """
    violations: list[str] = []
    n = len(doc.text)

    def check_span(span: Span, where: str) -> bool:
        if not (0 <= span.start < span.end <= n):
            violations.append(f"{where}: span [{span.start}, {span.end}) out of range for text of length {n}")
            return False
        return True

    prev_sent_end = 0
    for s_idx, sentence in enumerate(doc.sentences):
        where = f"sentence {s_idx}"
        ok = check_span(sentence.span, where)
        if ok and sentence.span.start < prev_sent_end:
            violations.append(f"{where}: span overlaps or precedes the previous sentence")
        if ok:
            prev_sent_end = max(prev_sent_end, sentence.span.end)

        if not sentence.tokens:
            violations.append(f"{where}: empty sentence (no root token)")
            continue

        n_tokens = len(sentence.tokens)
        roots = 0
        prev_tok_end = sentence.span.start
        for t_idx, token in enumerate(sentence.tokens):
            t_where = f"{where} token {t_idx}"
            if token.index != t_idx:
                violations.append(f"{t_where}: index field {token.index} does not match position")
            if not (0 <= token.head < n_tokens):
                violations.append(f"{t_where}: head out of range")
            elif token.head == t_idx:
                roots += 1
            if token.pos not in POS_TAGS:
                violations.append(f"{t_where}: unknown pos {token.pos!r}")
            if check_span(token.span, t_where):
                if not sentence.span.contains(token.span):
                    violations.append(f"{t_where}: span not contained in sentence span")
                if token.span.start < prev_tok_end:
                    violations.append(f"{t_where}: span overlaps or precedes the previous token")
                prev_tok_end = max(prev_tok_end, token.span.end)
                if token.span.text(doc.text) != token.text:
                    violations.append(
                        f"{t_where}: span text {token.span.text(doc.text)!r} does not match token text {token.text!r}"
                    )
        if roots != 1:
            violations.append(f"{where}: expected exactly one root token, found {roots}")

    covered = [False] * n
    for sentence in doc.sentences:
        for i in range(max(sentence.span.start, 0), min(sentence.span.end, n)):
            covered[i] = True
    for i, ch in enumerate(doc.text):
        if not ch.isspace() and not covered[i]:
            violations.append(f"text position {i}: non-whitespace character {ch!r} outside every sentence span")
            break  # one message is enough; tiling failures repeat

    seen_mentions: dict[tuple[int, int, int], int] = {}
    for cluster in doc.coref:
        c_where = f"coref cluster {cluster.cluster_id}"
        for m_idx, mention in enumerate(cluster.mentions):
            m_where = f"{c_where} mention {m_idx}"
            if not (0 <= mention.sent < len(doc.sentences)):
                violations.append(f"{m_where}: sentence index {mention.sent} out of range")
                continue
            n_tokens = len(doc.sentences[mention.sent].tokens)
            if not (0 <= mention.start_tok < mention.end_tok <= n_tokens):
                violations.append(
                    f"{m_where}: token range [{mention.start_tok}, {mention.end_tok}) out of range"
                )
                continue
            key = (mention.sent, mention.start_tok, mention.end_tok)
            if key in seen_mentions and seen_mentions[key] != cluster.cluster_id:
                violations.append(
                    f"{m_where}: mention also appears in cluster {seen_mentions[key]}"
                )
            seen_mentions.setdefault(key, cluster.cluster_id)

    if doc.schema_version != SCHEMA_VERSION:
        violations.append(f"schema_version: {doc.schema_version} is not supported")

    return violations


def document_to_dict(doc: AnnotatedDocument) -> dict[str, Any]:
    return {
        "schema_version": doc.schema_version,
        "doc_id": doc.doc_id,
        "role": doc.role,
        "text": doc.text,
        "sentences": [
            {
                "span": sentence.span.to_json(),
                "tokens": [
                    {
                        "i": token.index,
                        "text": token.text,
                        "lemma": token.lemma,
                        "pos": token.pos,
                        "head": token.head,
                        "dep": token.dep,
                        "span": token.span.to_json(),
                    }
                    for token in sentence.tokens
                ],
            }
            for sentence in doc.sentences
        ],
        "coref": [
            {"id": cluster.cluster_id, "mentions": [m.to_json() for m in cluster.mentions]}
            for cluster in doc.coref
        ],
    }


def serialize_document(doc: AnnotatedDocument) -> str:
    """Canonical serialization: fixed field order, two-space indent, trailing newline."""
    return json.dumps(document_to_dict(doc), ensure_ascii=False, indent=2) + "\n"


def load_document_file(path) -> AnnotatedDocument:
    with open(path, "rb") as handle:
        return load_document(handle.read())

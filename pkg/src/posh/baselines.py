"""Embedding-similarity comparators for granular error localization.

Two span-scoring baselines: one compares token 4-grams between a generation
and its reference, the other compares rendered scene-graph components. A
span is flagged when its best similarity against the other side falls below
the threshold (0.7 for 4-grams, 0.8 for graph components).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import requests

from .document import AnnotatedDocument, Span
from .errors import EmbedderUnavailable
from .graph import SceneGraph

FOURGRAM_THRESHOLD = 0.7
SGEMBED_THRESHOLD = 0.8


@dataclass
class SpanScore:
    span: Span
    text: str
    similarity: float
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "span": self.span.to_json(),
            "text": self.text,
            "similarity": self.similarity,
            "flagged": self.flagged,
        }


class HttpEmbedder:
    """OpenAI-compatible /embeddings endpoint client."""

    def __init__(self, url: str, model: str = "", timeout: float = 60.0, max_retries: int = 3):
        self.url = url.rstrip("/")
        self.model = model
        self.timeout = timeout
        self.max_retries = max_retries

    def embed(self, texts: list[str]) -> list[list[float]]:
        endpoint = self.url if self.url.endswith("/embeddings") else self.url + "/v1/embeddings"
        payload = {"model": self.model, "input": texts}
        last_error: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                reply = requests.post(endpoint, json=payload, timeout=self.timeout)
                reply.raise_for_status()
                data = reply.json()["data"]
                return [row["embedding"] for row in sorted(data, key=lambda r: r["index"])]
            except (requests.RequestException, ValueError, KeyError) as exc:
                last_error = exc
        raise EmbedderUnavailable(f"embedding endpoint failed: {last_error}")


class HashingEmbedder:
    """Deterministic local embedder: hashed bag of character trigrams.

    Identical texts embed identically (similarity 1); texts with disjoint
    vocabulary land near 0. Good enough for tests and offline smoke runs.
    """

    def __init__(self, dimensions: int = 256):
        self.dimensions = dimensions

    def _vector(self, text: str) -> list[float]:
        vec = [0.0] * self.dimensions
        padded = f"  {text.lower()}  "
        for i in range(len(padded) - 2):
            gram = padded[i : i + 3]
            digest = hashlib.sha256(gram.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dimensions
            sign = 1.0 if digest[4] % 2 == 0 else -1.0
            vec[bucket] += sign
        norm = math.sqrt(sum(v * v for v in vec)) or 1.0
        return [v / norm for v in vec]

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [self._vector(t) for t in texts]


def _cosine(a: list[float], b: list[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a)) or 1.0
    nb = math.sqrt(sum(x * x for x in b)) or 1.0
    return dot / (na * nb)


def _max_similarities(
    left: list[str], right: list[str], embedder
) -> list[float]:
    """For each left text, its best cosine similarity against the right texts."""
    if not left:
        return []
    if not right:
        return [0.0] * len(left)
    unique = list(dict.fromkeys(left + right))
    vectors = dict(zip(unique, embedder.embed(unique)))
    out = []
    for l_text in left:
        out.append(max(_cosine(vectors[l_text], vectors[r_text]) for r_text in right))
    return out


def _doc_fourgrams(doc: AnnotatedDocument) -> list[tuple[Span, str]]:
    grams = []
    for sentence in doc.sentences:
        tokens = sentence.tokens
        for i in range(max(0, len(tokens) - 3)):
            window = tokens[i : i + 4]
            span = Span(window[0].span.start, window[-1].span.end)
            grams.append((span, span.text(doc.text)))
    return grams


def baseline_4gram(
    gen: AnnotatedDocument,
    ref: AnnotatedDocument,
    embedder,
    threshold: float = FOURGRAM_THRESHOLD,
) -> tuple[list[SpanScore], list[SpanScore]]:
    """Flag generation 4-grams unmatched in the reference and vice versa.

    Returns (mistake flags over the generation, omission flags over the
    reference)."""
    gen_grams = _doc_fourgrams(gen)
    ref_grams = _doc_fourgrams(ref)
    gen_sims = _max_similarities([t for _, t in gen_grams], [t for _, t in ref_grams], embedder)
    ref_sims = _max_similarities([t for _, t in ref_grams], [t for _, t in gen_grams], embedder)
    mistakes = [
        SpanScore(span=s, text=t, similarity=sim, flagged=sim < threshold)
        for (s, t), sim in zip(gen_grams, gen_sims)
    ]
    omissions = [
        SpanScore(span=s, text=t, similarity=sim, flagged=sim < threshold)
        for (s, t), sim in zip(ref_grams, ref_sims)
    ]
    return mistakes, omissions


def graph_component_texts(graph: SceneGraph, source_text: str) -> list[tuple[Span, str]]:
    """Render each component as a comparable phrase, keeping its span."""
    out: list[tuple[Span, str]] = []
    by_id = {o.object_id: o for o in graph.objects}
    for obj in graph.objects:
        out.append((obj.mention_spans[0], obj.class_name))
    for attr in graph.attributes:
        owner = by_id[attr.object_id]
        out.append((attr.span, f"{attr.text} {owner.class_name}"))
    for rel in graph.relations:
        head, tail = by_id[rel.head_id], by_id[rel.tail_id]
        out.append((rel.span, f"{head.class_name} {rel.label} {tail.class_name}"))
    return out


def baseline_sgembed(
    gen_graph: SceneGraph,
    ref_graph: SceneGraph,
    gen_text: str,
    ref_text: str,
    embedder,
    threshold: float = SGEMBED_THRESHOLD,
) -> tuple[list[SpanScore], list[SpanScore]]:
    """Flag scene-graph components unmatched on the other side."""
    gen_parts = graph_component_texts(gen_graph, gen_text)
    ref_parts = graph_component_texts(ref_graph, ref_text)
    gen_sims = _max_similarities([t for _, t in gen_parts], [t for _, t in ref_parts], embedder)
    ref_sims = _max_similarities([t for _, t in ref_parts], [t for _, t in gen_parts], embedder)
    mistakes = [
        SpanScore(span=s, text=t, similarity=sim, flagged=sim < threshold)
        for (s, t), sim in zip(gen_parts, gen_sims)
    ]
    omissions = [
        SpanScore(span=s, text=t, similarity=sim, flagged=sim < threshold)
        for (s, t), sim in zip(ref_parts, ref_sims)
    ]
    return mistakes, omissions

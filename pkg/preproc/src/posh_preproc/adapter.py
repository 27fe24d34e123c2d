"""Assemble interchange JSON documents from a parsing backend.

The adapter is a thin shell: a backend turns raw text into per-sentence
token annotations plus coreference clusters; this module packs the result
into the interchange schema (schema_version 1) and self-checks the
invariants the downstream engine will enforce, so an invalid document never
reaches stdout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


class ModelLoadError(Exception):
    """A configured parser or coreference model cannot be loaded."""


@dataclass
class AdapterConfig:
    parser_model: str = "rule"  # "rule" or a spaCy pipeline name
    coref_model: str = "rule"  # "rule", "none" or a coreference model name
    batch_size: int = 8

    def backend(self):
        if self.parser_model == "rule":
            from . import rule_backend

            return RuleBackendAdapter(self.coref_model)
        from .spacy_backend import SpacyBackendAdapter

        return SpacyBackendAdapter(self.parser_model, self.coref_model, self.batch_size)


class RuleBackendAdapter:
    name = "rule"

    def __init__(self, coref_model: str = "rule"):
        self.coref = coref_model != "none"

    def annotate(self, text: str):
        from .rule_backend import parse_sentence, resolve_pronouns, sentence_offsets

        sentences = []
        for start, end in sentence_offsets(text):
            tokens = parse_sentence(text[start:end], start)
            if tokens:
                sentences.append(tokens)
        clusters = resolve_pronouns(sentences) if self.coref else []
        parsed = [
            {
                "tokens": [
                    {
                        "text": t.text,
                        "lemma": t.lemma,
                        "pos": t.pos,
                        "head": t.head,
                        "dep": t.dep,
                        "start": t.start,
                        "end": t.end,
                    }
                    for t in tokens
                ]
            }
            for tokens in sentences
        ]
        return parsed, clusters


def build_document(doc_id: str, role: str, text: str, config: AdapterConfig | None = None) -> dict:
    config = config or AdapterConfig()
    backend = config.backend()
    parsed, clusters = backend.annotate(text)
    sentences = []
    for sentence in parsed:
        tokens = sentence["tokens"]
        sentences.append(
            {
                "span": [tokens[0]["start"], tokens[-1]["end"]],
                "tokens": [
                    {
                        "i": i,
                        "text": t["text"],
                        "lemma": t["lemma"],
                        "pos": t["pos"],
                        "head": t["head"],
                        "dep": t["dep"],
                        "span": [t["start"], t["end"]],
                    }
                    for i, t in enumerate(tokens)
                ],
            }
        )
    payload = {
        "schema_version": 1,
        "doc_id": doc_id,
        "role": role,
        "text": text,
        "sentences": sentences,
        "coref": [
            {"id": n, "mentions": [{"sent": s, "start_tok": a, "end_tok": b} for s, a, b in cluster]}
            for n, cluster in enumerate(clusters)
        ],
    }
    problems = self_check(payload)
    if problems:
        raise ValueError("adapter produced an invalid document: " + "; ".join(problems))
    return payload


def serialize(payload: dict) -> str:
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


def self_check(payload: dict) -> list[str]:
    """Local invariant check mirroring what the consuming engine validates."""
    problems = []
    text = payload["text"]
    prev_end = 0
    covered = [False] * len(text)
    for s_idx, sentence in enumerate(payload["sentences"]):
        s_start, s_end = sentence["span"]
        if not (0 <= s_start < s_end <= len(text)):
            problems.append(f"sentence {s_idx}: span out of range")
            continue
        if s_start < prev_end:
            problems.append(f"sentence {s_idx}: overlaps previous sentence")
        prev_end = s_end
        for i in range(s_start, s_end):
            covered[i] = True
        tokens = sentence["tokens"]
        if not tokens:
            problems.append(f"sentence {s_idx}: empty")
            continue
        roots = 0
        prev_tok_end = s_start
        for t_idx, token in enumerate(tokens):
            t_start, t_end = token["span"]
            if token["i"] != t_idx:
                problems.append(f"sentence {s_idx} token {t_idx}: bad index")
            if not (0 <= token["head"] < len(tokens)):
                problems.append(f"sentence {s_idx} token {t_idx}: head out of range")
            elif token["head"] == t_idx:
                roots += 1
            if not (s_start <= t_start < t_end <= s_end):
                problems.append(f"sentence {s_idx} token {t_idx}: span outside sentence")
            elif text[t_start:t_end] != token["text"]:
                problems.append(f"sentence {s_idx} token {t_idx}: span/text mismatch")
            if t_start < prev_tok_end:
                problems.append(f"sentence {s_idx} token {t_idx}: overlapping spans")
            prev_tok_end = max(prev_tok_end, t_end)
        if roots != 1:
            problems.append(f"sentence {s_idx}: {roots} roots")
    for i, ch in enumerate(text):
        if not ch.isspace() and not covered[i]:
            problems.append(f"char {i}: non-whitespace outside sentences")
            break
    seen = set()
    for cluster in payload["coref"]:
        for mention in cluster["mentions"]:
            key = (mention["sent"], mention["start_tok"], mention["end_tok"])
            if not (0 <= mention["sent"] < len(payload["sentences"])):
                problems.append(f"cluster {cluster['id']}: bad sentence index")
                continue
            n_tokens = len(payload["sentences"][mention["sent"]]["tokens"])
            if not (0 <= mention["start_tok"] < mention["end_tok"] <= n_tokens):
                problems.append(f"cluster {cluster['id']}: bad token range")
            if key in seen:
                problems.append(f"cluster {cluster['id']}: duplicate mention {key}")
            seen.add(key)
    return problems

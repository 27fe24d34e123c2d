"""spaCy-based backend with optional neural coreference.

Loads the configured spaCy pipeline for tokenization, tagging, lemmas and
dependency parsing, and (when a coreference model is named) fastcoref for
clusters. Model identities stay configuration; this module only maps their
output onto the interchange conventions: the nine coarse POS tags (AUX,
ADV, etc. fold into OTHER), sentence-local head indices and character
spans.
"""

from __future__ import annotations

from .adapter import ModelLoadError

_POS_MAP = {
    "NOUN": "NOUN",
    "PROPN": "PROPN",
    "PRON": "PRON",
    "ADJ": "ADJ",
    "VERB": "VERB",
    "ADP": "ADP",
    "DET": "DET",
    "NUM": "NUM",
}


class SpacyBackendAdapter:
    name = "spacy"

    def __init__(self, parser_model: str, coref_model: str = "none", batch_size: int = 8):
        try:
            import spacy
        except ImportError as exc:
            raise ModelLoadError(
                "spaCy is not installed; install the 'spacy' extra or use --parser-model rule"
            ) from exc
        try:
            self.nlp = spacy.load(parser_model)
        except OSError as exc:
            raise ModelLoadError(f"cannot load spaCy pipeline {parser_model!r}: {exc}") from exc
        self.parser_model = parser_model
        self.coref_model = coref_model
        self.batch_size = batch_size
        self._coref = None
        if coref_model not in ("none", ""):
            try:
                from fastcoref import FCoref

                self._coref = FCoref(model_name_or_path=coref_model) if coref_model != "rule" else FCoref()
            except Exception as exc:  # import or checkpoint failure
                raise ModelLoadError(f"cannot load coreference model {coref_model!r}: {exc}") from exc

    def annotate(self, text: str):
        doc = self.nlp(text)
        sentences = []
        token_location: dict[int, tuple[int, int]] = {}  # doc token index -> (sent, tok)
        for s_idx, sent in enumerate(doc.sents):
            tokens = [t for t in sent if not t.is_space]
            if not tokens:
                continue
            index_of = {t.i: i for i, t in enumerate(tokens)}
            rows = []
            for i, t in enumerate(tokens):
                head = index_of.get(t.head.i, i)
                if t.dep_ == "ROOT" or t.head.i == t.i:
                    head = i
                token_location[t.i] = (len(sentences), i)
                rows.append(
                    {
                        "text": t.text,
                        "lemma": t.lemma_,
                        "pos": _POS_MAP.get(t.pos_, "OTHER"),
                        "head": head,
                        "dep": t.dep_,
                        "start": t.idx,
                        "end": t.idx + len(t.text),
                    }
                )
            sentences.append({"tokens": rows})

        clusters = []
        if self._coref is not None:
            predictions = self._coref.predict(texts=[text])
            for cluster in predictions[0].get_clusters(as_strings=False):
                mentions = []
                for start_char, end_char in cluster:
                    located = [
                        token_location[t.i]
                        for t in doc
                        if t.i in token_location and t.idx >= start_char and t.idx + len(t.text) <= end_char
                    ]
                    if not located:
                        continue
                    sents = {s for s, _ in located}
                    if len(sents) != 1:
                        continue  # cross-sentence mention spans are dropped
                    s = sents.pop()
                    toks = sorted(i for _, i in located)
                    mentions.append((s, toks[0], toks[-1] + 1))
                unique = sorted(set(mentions))
                if len(unique) >= 2:
                    clusters.append(unique)
        return sentences, clusters

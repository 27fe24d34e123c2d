"""Benchmark evaluation: span F1, pairwise accuracy, correlations and ELO.

These are the protocols used to validate a description metric against human
judgments: relaxed span matching for granular error localization, maximum
macro F1 across alerting thresholds, pairwise accuracy with a tie threshold
inferred from the gold tie rate, Spearman/Kendall rank correlations with
tie handling, and permutation-averaged ELO rankings from pairwise outcomes.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from scipy import stats as _scipy_stats

from .errors import MissingGold, UnknownLabel
from .document import AnnotatedDocument, Span

LABEL_SCORES = {
    "much_better_1": 2,
    "slightly_better_1": 1,
    "equal": 0,
    "slightly_better_2": -1,
    "much_better_2": -2,
}

DIMENSIONS = ("mistakes", "omissions", "overall")

NO_ALERT_SCORE = 5.0  # tokens uncovered by any component never alert


def label_to_score(label: str) -> int:
    """Map a five-way comparative label onto the signed score in {-2..2}."""
    try:
        return LABEL_SCORES[label]
    except KeyError:
        raise UnknownLabel(f"unknown coarse label {label!r}") from None


# ---------------------------------------------------------------------------
# Relaxed span F1


def _token_overlap(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def _span_matches(pred: tuple[int, int], gold: tuple[int, int], rule: str, relative: str) -> bool:
    overlap = _token_overlap(pred, gold)
    if overlap == 0:
        return False
    if rule == "any_overlap":
        return True
    if rule != "half_overlap":
        raise ValueError(f"unknown overlap rule {rule!r}")
    pred_len = pred[1] - pred[0]
    gold_len = gold[1] - gold[0]
    if relative == "pred":
        return overlap * 2 >= pred_len
    if relative == "gold":
        return overlap * 2 >= gold_len
    if relative == "symmetric":
        return overlap * 2 >= min(pred_len, gold_len)
    raise ValueError(f"unknown relative mode {relative!r}")


def relaxed_f1(
    pred: list[tuple[int, int]],
    gold: list[tuple[int, int]],
    rule: str = "any_overlap",
    *,
    relative: str = "pred",
) -> tuple[float, float, float]:
    """Precision, recall and F1 under relaxed token-overlap span matching.

    Spans are half-open token-index ranges. Matching is one-to-one and
    greedy in document order: each predicted span takes the first unmatched
    gold span satisfying the rule (>= 1 shared token, or >= 50% of the
    predicted span's tokens; `relative` switches the 50% base). An empty
    side's ratio is 1 by convention; F1 is 0 when P + R is 0.
    """
    pred = sorted(pred)
    gold = sorted(gold)
    matched_gold: set[int] = set()
    matched = 0
    for p in pred:
        for g_idx, g in enumerate(gold):
            if g_idx in matched_gold:
                continue
            if _span_matches(p, g, rule, relative):
                matched_gold.add(g_idx)
                matched += 1
                break
    precision = 1.0 if not pred else matched / len(pred)
    recall = 1.0 if not gold else matched / len(gold)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


# ---------------------------------------------------------------------------
# Maximum macro F1 across alerting thresholds


@dataclass
class MaxF1Result:
    f1: float
    threshold: float
    curve: list[tuple[float, float]] = field(default_factory=list)  # (threshold, macro F1)


def _binary_f1(pred: list[bool], labels: list[bool], positive: bool) -> float:
    tp = sum(1 for p, l in zip(pred, labels) if p == positive and l == positive)
    fp = sum(1 for p, l in zip(pred, labels) if p == positive and l != positive)
    fn = sum(1 for p, l in zip(pred, labels) if p != positive and l == positive)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def macro_f1(pred: list[bool], labels: list[bool]) -> float:
    """Mean of the F1 for the error class and the F1 for the non-error class."""
    return (_binary_f1(pred, labels, True) + _binary_f1(pred, labels, False)) / 2.0


def granular_max_f1(token_scores: list[float], token_labels: list[bool]) -> MaxF1Result:
    """Best macro F1 over every alerting threshold.

    A token alerts when its score is <= the threshold (low presence scores
    mean errors). All distinct scores are tried, plus a sentinel below the
    minimum for the empty alert set; ties prefer the lowest threshold.
    """
    if len(token_scores) != len(token_labels):
        raise ValueError("scores and labels must have equal length")
    if not token_scores:
        return MaxF1Result(f1=0.0, threshold=0.0, curve=[])
    candidates = sorted(set(token_scores))
    candidates = [candidates[0] - 1.0] + candidates
    curve = []
    best_f1, best_t = -1.0, candidates[0]
    for t in candidates:
        alerts = [score <= t for score in token_scores]
        value = macro_f1(alerts, token_labels)
        curve.append((t, value))
        if value > best_f1:
            best_f1, best_t = value, t
    return MaxF1Result(f1=best_f1, threshold=best_t, curve=curve)


def component_token_scores(
    doc: AnnotatedDocument, scored_spans: list[tuple[Span, float]]
) -> list[float]:
    """Per-token scores: each token inherits the worst score of the components
    covering it; uncovered tokens get the neutral no-alert score."""
    token_spans = [t.span for s in doc.sentences for t in s.tokens]
    scores = [NO_ALERT_SCORE] * len(token_spans)
    for span, value in scored_spans:
        for i, tok_span in enumerate(token_spans):
            if span.overlaps(tok_span):
                scores[i] = min(scores[i], value)
    return scores


def gold_token_labels(doc: AnnotatedDocument, gold_spans: list[Span]) -> list[bool]:
    token_spans = [t.span for s in doc.sentences for t in s.tokens]
    return [any(g.overlaps(t) for g in gold_spans) for t in token_spans]


def char_spans_to_token_ranges(doc: AnnotatedDocument, char_spans: list[Span]) -> list[tuple[int, int]]:
    """Convert char spans to half-open ranges over the document's flat token list."""
    token_spans = [t.span for s in doc.sentences for t in s.tokens]
    ranges = []
    for span in char_spans:
        covered = [i for i, tok in enumerate(token_spans) if span.overlaps(tok)]
        if covered:
            ranges.append((covered[0], covered[-1] + 1))
    return ranges


# ---------------------------------------------------------------------------
# Pairwise accuracy with an inferred tie threshold


@dataclass
class PairwiseResult:
    accuracy: float
    tie_threshold: float
    predictions: list[int] = field(default_factory=list)


def infer_tie_threshold(deltas: list[float], gold_tie_rate: float) -> float:
    """Largest |delta| value t with fraction(|delta| <= t) <= the gold tie rate.

    The quantile uses lower interpolation; when the rate admits no ties the
    threshold sits below every |delta| (returned as -1.0, valid since
    |delta| >= 0).
    """
    n = len(deltas)
    if n == 0:
        return -1.0
    magnitudes = sorted(abs(d) for d in deltas)
    k = math.floor(gold_tie_rate * n + 1e-12)
    best = -1.0
    for value in dict.fromkeys(magnitudes):
        count = sum(1 for m in magnitudes if m <= value)
        if count <= k:
            best = value
    return best


def pairwise_accuracy(deltas: list[float], gold_scores: list[int]) -> PairwiseResult:
    """Accuracy at picking the better text or a tie in each judged pair.

    `deltas` are metric differences m(text1) - m(text2); `gold_scores` the
    signed labels in {-2..2}. A pair is predicted a tie when |delta| is at or
    below a threshold calibrated so the predicted tie fraction matches the
    gold tie rate (never exceeding it).
    """
    if len(deltas) != len(gold_scores):
        raise ValueError("deltas and gold scores must have equal length")
    if not deltas:
        return PairwiseResult(accuracy=0.0, tie_threshold=-1.0)
    tie_rate = sum(1 for s in gold_scores if s == 0) / len(gold_scores)
    threshold = infer_tie_threshold(deltas, tie_rate)
    predictions = [0 if abs(d) <= threshold else (1 if d > 0 else -1) for d in deltas]
    targets = [0 if s == 0 else (1 if s > 0 else -1) for s in gold_scores]
    accuracy = sum(1 for p, t in zip(predictions, targets) if p == t) / len(deltas)
    return PairwiseResult(accuracy=accuracy, tie_threshold=threshold, predictions=predictions)


# ---------------------------------------------------------------------------
# Rank correlations


@dataclass
class CorrelationResult:
    spearman: float | None
    spearman_p: float | None
    kendall: float | None
    kendall_p: float | None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "spearman": self.spearman,
            "spearman_p": self.spearman_p,
            "kendall": self.kendall,
            "kendall_p": self.kendall_p,
            "degenerate": self.degenerate,
        }


def rank_correlations(deltas: list[float], scores: list[float]) -> CorrelationResult:
    """Spearman rho (average ranks for ties) and Kendall tau-b with two-sided p.

    A constant input makes the correlations undefined; they are reported as
    None rather than raised.
    """
    if len(deltas) != len(scores):
        raise ValueError("inputs must have equal length")
    if len(deltas) < 3:
        raise ValueError("need at least 3 pairs")
    if len(set(deltas)) == 1 or len(set(scores)) == 1:
        return CorrelationResult(None, None, None, None, degenerate=True)
    rho, rho_p = _scipy_stats.spearmanr(deltas, scores)
    tau, tau_p = _scipy_stats.kendalltau(deltas, scores, variant="b")
    if math.isnan(rho) or math.isnan(tau):
        return CorrelationResult(None, None, None, None, degenerate=True)
    return CorrelationResult(float(rho), float(rho_p), float(tau), float(tau_p))


# ---------------------------------------------------------------------------
# ELO


@dataclass
class EloResult:
    ratings: dict[str, float]
    ranks: dict[str, int]

    def table(self) -> list[tuple[str, float, int]]:
        return [(m, self.ratings[m], self.ranks[m]) for m in sorted(self.ranks, key=self.ranks.get)]


def _elo_single_order(judgments, ratings: dict[str, float], k_factor: float) -> None:
    for model_a, model_b, outcome in judgments:
        expected_a = 1.0 / (1.0 + 10 ** ((ratings[model_b] - ratings[model_a]) / 400.0))
        score_a = {"a": 1.0, "b": 0.0, "tie": 0.5}[outcome]
        delta = k_factor * (score_a - expected_a)
        ratings[model_a] += delta
        ratings[model_b] -= delta


def elo_rankings(
    judgments: list[tuple[str, str, str]],
    *,
    k_factor: float = 32.0,
    initial_rating: float = 1000.0,
    permutations: int = 100,
    seed: int = 13,
) -> EloResult:
    """Permutation-averaged ELO over pairwise outcomes ("a", "b" or "tie").

    Judgment order affects ELO, so ratings are averaged over shuffled orders
    (fixed count, fixed seed) for reproducibility.
    """
    if not judgments:
        return EloResult(ratings={}, ranks={})
    for _, _, outcome in judgments:
        if outcome not in ("a", "b", "tie"):
            raise ValueError(f"outcome must be 'a', 'b' or 'tie', got {outcome!r}")
    models = []
    for model_a, model_b, _ in judgments:
        for model in (model_a, model_b):
            if model not in models:
                models.append(model)

    totals = {m: 0.0 for m in models}
    rng = random.Random(seed)
    order = list(judgments)
    for _ in range(permutations):
        rng.shuffle(order)
        ratings = {m: initial_rating for m in models}
        _elo_single_order(order, ratings, k_factor)
        for m in models:
            totals[m] += ratings[m]
    averaged = {m: totals[m] / permutations for m in models}
    ranked = sorted(models, key=lambda m: (-averaged[m], m))
    ranks = {m: i + 1 for i, m in enumerate(ranked)}
    return EloResult(ratings=averaged, ranks=ranks)


# ---------------------------------------------------------------------------
# Gold-data readers


@dataclass
class GoldGranular:
    pair_id: str
    mistakes: list[Span]
    omissions: list[Span]
    annotator: str | None = None


@dataclass
class GoldCoarse:
    pair_id: str
    text1: str
    text2: str
    dimension: str
    label: str

    @property
    def score(self) -> int:
        return label_to_score(self.label)


def read_granular_gold(path: str | Path) -> dict[str, GoldGranular]:
    """Granular span judgments: JSON array of
    {pair_id, mistakes: [[start, end], ...], omissions: [[start, end], ...], annotator?}."""
    path = Path(path)
    if not path.exists():
        raise MissingGold(f"granular gold file {path} does not exist")
    rows = json.loads(path.read_text(encoding="utf-8"))
    if not rows:
        raise MissingGold(f"granular gold file {path} is empty")
    gold = {}
    for row in rows:
        gold[row["pair_id"]] = GoldGranular(
            pair_id=row["pair_id"],
            mistakes=[Span(s, e) for s, e in row.get("mistakes", [])],
            omissions=[Span(s, e) for s, e in row.get("omissions", [])],
            annotator=row.get("annotator"),
        )
    return gold


def read_coarse_gold(path: str | Path) -> list[GoldCoarse]:
    """Coarse pair judgments: JSON array of {pair_id, text1, text2, dimension, label}."""
    path = Path(path)
    if not path.exists():
        raise MissingGold(f"coarse gold file {path} does not exist")
    rows = json.loads(path.read_text(encoding="utf-8"))
    if not rows:
        raise MissingGold(f"coarse gold file {path} is empty")
    out = []
    for row in rows:
        if row["dimension"] not in DIMENSIONS:
            raise UnknownLabel(f"unknown dimension {row['dimension']!r}")
        record = GoldCoarse(
            pair_id=row["pair_id"],
            text1=row["text1"],
            text2=row["text2"],
            dimension=row["dimension"],
            label=row["label"],
        )
        label_to_score(record.label)  # validate eagerly
        out.append(record)
    return out


def read_pairwise_records(path: str | Path) -> list[tuple[str, str, str]]:
    """Model-vs-model winner records, one JSON object per line:
    {"model_a": ..., "model_b": ..., "winner": "a" | "b" | "tie"}."""
    path = Path(path)
    if not path.exists():
        raise MissingGold(f"pairwise records file {path} does not exist")
    records = []
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            records.append((row["model_a"], row["model_b"], row["winner"]))
    if not records:
        raise MissingGold(f"pairwise records file {path} is empty")
    return records


# ---------------------------------------------------------------------------
# Report container


@dataclass
class EvalReport:
    kind: str
    sections: dict = field(default_factory=dict)
    pair_diagnostics: list[dict] = field(default_factory=list)
    audit: dict = field(default_factory=dict)  # config hash, template version

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "audit": self.audit,
            "sections": self.sections,
            "pairs": self.pair_diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=False) + "\n"

"""Human-readable reports: span-highlighted text and figures.

Error spans are wrapped in [[ ... ]] markers directly inside the source
text, followed by a per-component table. Figures are rendered with the Agg
backend so report commands work headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .document import Span
from .scoring import GranularScore, PoshResult

ALERT_SCORE = 2.0  # granular scores at or below this are rendered as errors


def _merge_intervals(spans: list[Span]) -> list[Span]:
    merged: list[Span] = []
    for span in sorted(spans, key=lambda s: (s.start, s.end)):
        if merged and span.start <= merged[-1].end:
            merged[-1] = Span(merged[-1].start, max(merged[-1].end, span.end))
        else:
            merged.append(span)
    return merged


def highlight_text(text: str, spans: list[Span]) -> str:
    """Wrap the given character spans in [[ ]] markers."""
    pieces = []
    cursor = 0
    for span in _merge_intervals(spans):
        pieces.append(text[cursor : span.start])
        pieces.append("[[" + text[span.start : span.end] + "]]")
        cursor = span.end
    pieces.append(text[cursor:])
    return "".join(pieces)


def _component_lines(granular: list[GranularScore]) -> list[str]:
    lines = []
    for g in sorted(granular, key=lambda g: (g.span.start, g.span.end, g.component_id)):
        ident = f" via {g.identifier!r}" if g.identifier else ""
        lines.append(
            f"  {g.component_id:>6}  {g.kind:<9} {g.score:4.2f}  [{g.span.start},{g.span.end})"
            f" {g.provenance}{ident}  {g.text!r}"
        )
    return lines


def render_pair_report(
    result: PoshResult, gen_text: str, ref_text: str, alert_score: float = ALERT_SCORE
) -> str:
    """Plain-text report: highlighted texts plus the granular score table."""

    def fmt(value: float | None) -> str:
        return "null" if value is None else f"{value:.4f}"

    mistakes = [g for g in result.granular if g.direction == "mistake"]
    omissions = [g for g in result.granular if g.direction == "omission"]
    gen_alerts = [g.span for g in mistakes if g.score <= alert_score and g.provenance != "skipped"]
    ref_alerts = [g.span for g in omissions if g.score <= alert_score and g.provenance != "skipped"]

    lines = [
        f"pair: {result.gen_id} vs {result.ref_id}",
        f"coarse: mistakes={fmt(result.mistakes)} omissions={fmt(result.omissions)} overall={fmt(result.overall)}",
        "",
        "GENERATION (mistake spans marked [[...]]):",
        highlight_text(gen_text, gen_alerts),
        "",
        "REFERENCE (omission spans marked [[...]]):",
        highlight_text(ref_text, ref_alerts),
        "",
        f"granular mistakes ({len(mistakes)}):",
        *_component_lines(mistakes),
        "",
        f"granular omissions ({len(omissions)}):",
        *_component_lines(omissions),
        "",
    ]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Figures


def _save(fig, path: str | Path) -> None:
    fig.savefig(str(path), dpi=150, bbox_inches="tight")
    plt.close(fig)


def figure_threshold_curves(curves: dict[str, list[tuple[float, float]]], path: str | Path) -> None:
    """Macro F1 as a function of the alerting threshold, one line per direction."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, curve in sorted(curves.items()):
        if not curve:
            continue
        xs, ys = zip(*curve)
        ax.plot(xs, ys, marker="o", markersize=3, label=name)
    ax.set_xlabel("alert threshold (score <= t alerts)")
    ax.set_ylabel("macro F1")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, path)


def figure_delta_scatter(deltas: list[float], scores: list[int], dimension: str, path: str | Path) -> None:
    """Metric deltas against signed gold scores for one dimension."""
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(scores, deltas, alpha=0.6, s=18)
    ax.axhline(0.0, color="gray", linewidth=0.8)
    ax.set_xlabel("gold score (text1 vs text2)")
    ax.set_ylabel("metric delta m(text1) - m(text2)")
    ax.set_title(dimension)
    ax.set_xticks([-2, -1, 0, 1, 2])
    ax.grid(alpha=0.3)
    _save(fig, path)


def figure_leaderboard(
    model_means: dict[str, tuple[float, float]], path: str | Path
) -> None:
    """Per-model scatter of coarse mistakes against coarse omissions."""
    fig, ax = plt.subplots(figsize=(6, 5))
    for model, (mistakes, omissions) in sorted(model_means.items()):
        ax.scatter([omissions], [mistakes], s=60)
        ax.annotate(model, (omissions, mistakes), textcoords="offset points", xytext=(6, 4), fontsize=9)
    ax.set_xlabel("omissions score (higher = better coverage)")
    ax.set_ylabel("mistakes score (higher = fewer errors)")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    _save(fig, path)

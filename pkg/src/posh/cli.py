"""Batch command-line front end.

Subcommands:
  score          score generation/reference pairs and write result JSON,
                 a summary table and per-pair text reports
  eval-granular  token-level max-F1 of granular scores against gold spans
  eval-coarse    pairwise accuracy and rank correlations against gold labels
  leaderboard    per-model means and ELO rankings from scored pairs

Exit codes: 0 success, 1 usage error, 2 partial failure (some pairs failed).
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import RunConfig
from .document import AnnotatedDocument, Span, load_document
from .errors import MissingGold, PoshError, UnknownModel
from .harness import (
    EvalReport,
    component_token_scores,
    elo_rankings,
    gold_token_labels,
    granular_max_f1,
    pairwise_accuracy,
    rank_correlations,
    read_coarse_gold,
    read_granular_gold,
)
from .report import figure_delta_scatter, figure_leaderboard, figure_threshold_curves, render_pair_report
from .rubric import TEMPLATE_VERSION
from .scoring import score_pair

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2

DIMENSIONS = ("mistakes", "omissions", "overall")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with RunConfig fields")
    parser.add_argument("--judge-url", help="judge endpoint URL, or verbatim: / mock:[seed]")
    parser.add_argument("--model", help="judge model name")
    parser.add_argument("--presence-threshold", type=float, help="object presence threshold (default 2.0)")
    parser.add_argument(
        "--overall",
        choices=["harmonic", "arithmetic", "mistakes", "omissions"],
        help="overall score composition (default harmonic)",
    )
    parser.add_argument("--jobs", type=int, help="parallel workers (default 1)")
    parser.add_argument("--cache-dir", help="judge response cache directory")
    parser.add_argument("--preprocess", help="executable converting raw text to interchange JSON")


def _build_config(args) -> RunConfig:
    overrides = {
        key: value
        for key, value in {
            "judge_url": args.judge_url,
            "model": args.model,
            "presence_threshold": args.presence_threshold,
            "overall": args.overall,
            "jobs": args.jobs,
            "cache_dir": args.cache_dir,
            "preprocess": args.preprocess,
            "tie_threshold": getattr(args, "tie_threshold", None),
        }.items()
        if value is not None
    }
    if args.config:
        return RunConfig.from_file(args.config, overrides)
    return RunConfig(**overrides)


def _read_manifest(path: str | Path) -> list[dict]:
    """JSON-lines rows {pair_id, gen_path, ref_path, model?}; paths resolve
    relative to the manifest's directory."""
    path = Path(path)
    base = path.parent
    rows = []
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            for key in ("pair_id", "gen_path", "ref_path"):
                if key not in row:
                    raise PoshError(f"{path}:{line_no + 1}: manifest row missing {key!r}")
            row["gen_path"] = str((base / row["gen_path"]).resolve())
            row["ref_path"] = str((base / row["ref_path"]).resolve())
            rows.append(row)
    return rows


def _load_input(path: str, role: str, doc_id: str, config: RunConfig) -> AnnotatedDocument:
    raw = Path(path).read_bytes()
    if config.preprocess:
        completed = subprocess.run(
            [config.preprocess, "--role", role, "--doc-id", doc_id],
            input=raw,
            capture_output=True,
            check=False,
        )
        if completed.returncode != 0:
            raise PoshError(
                f"preprocess failed for {path}: {completed.stderr.decode('utf-8', 'replace').strip()}"
            )
        raw = completed.stdout
    return load_document(raw)


# ---------------------------------------------------------------------------
# score


def cmd_score(args) -> int:
    config = _build_config(args)
    if args.manifest:
        pairs = _read_manifest(args.manifest)
    elif args.gen and args.ref:
        pairs = [
            {
                "pair_id": args.pair_id or "pair",
                "gen_path": str(Path(args.gen).resolve()),
                "ref_path": str(Path(args.ref).resolve()),
                "model": "",
            }
        ]
    else:
        print("score: provide --manifest or both --gen and --ref", file=sys.stderr)
        return EXIT_USAGE

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    judge = config.judge()
    engine = config.engine_config()

    def run_one(pair: dict):
        try:
            gen = _load_input(pair["gen_path"], "generation", f"{pair['pair_id']}-gen", config)
            ref = _load_input(pair["ref_path"], "reference", f"{pair['pair_id']}-ref", config)
            result = score_pair(gen, ref, judge, engine)
            return pair, result, gen.text, ref.text, None
        except Exception as exc:  # isolate pair failures; the run continues
            return pair, None, "", "", f"{type(exc).__name__}: {exc}"

    if config.jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(run_one, pairs))
    else:
        outcomes = [run_one(pair) for pair in pairs]

    config_hash = config.hash()
    summary_rows = []
    errors = []
    for pair, result, gen_text, ref_text, error in outcomes:
        pair_id = pair["pair_id"]
        if error is not None:
            errors.append({"pair_id": pair_id, "error": error})
            summary_rows.append((pair_id, pair.get("model", ""), "error", "error", "error", error))
            continue
        payload = {
            "pair_id": pair_id,
            "model": pair.get("model", ""),
            "config_hash": config_hash,
            "template_version": TEMPLATE_VERSION,
            **result.to_dict(),
        }
        (out_dir / f"{pair_id}.json").write_text(
            json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
        (out_dir / f"{pair_id}.report.txt").write_text(
            render_pair_report(result, gen_text, ref_text), encoding="utf-8"
        )

        def fmt(value):
            return "null" if value is None else f"{value:.6f}"

        summary_rows.append(
            (pair_id, pair.get("model", ""), fmt(result.mistakes), fmt(result.omissions), fmt(result.overall), "")
        )

    header = "pair_id\tmodel\tmistakes\tomissions\toverall\terror"
    lines = [header] + ["\t".join(str(cell) for cell in row) for row in summary_rows]
    (out_dir / "summary.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    run_info = {
        "config_hash": config_hash,
        "template_version": TEMPLATE_VERSION,
        "pairs": len(pairs),
        "failed": len(errors),
        "errors": errors,
    }
    (out_dir / "run.json").write_text(json.dumps(run_info, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")

    for entry in errors:
        print(f"error: {entry['pair_id']}: {entry['error']}", file=sys.stderr)
    return EXIT_PARTIAL if errors else EXIT_OK


# ---------------------------------------------------------------------------
# shared result loading


def _load_results(results_dir: str | Path) -> dict[str, dict]:
    results = {}
    for path in sorted(Path(results_dir).glob("*.json")):
        if path.name == "run.json":
            continue
        payload = json.loads(path.read_text(encoding="utf-8"))
        if "pair_id" in payload and "granular" in payload:
            results[payload["pair_id"]] = payload
    return results


def _granular_spans(payload: dict, direction: str) -> list[tuple[Span, float]]:
    return [
        (Span(g["span"][0], g["span"][1]), g["score"])
        for g in payload["granular"]
        if g["direction"] == direction and g["provenance"] != "skipped"
    ]


# ---------------------------------------------------------------------------
# eval-granular


def cmd_eval_granular(args) -> int:
    results = _load_results(args.results)
    if not results:
        raise MissingGold(f"no result files in {args.results}")
    gold = read_granular_gold(args.gold)
    manifest = {row["pair_id"]: row for row in _read_manifest(args.manifest)}
    config = _build_config(args)

    pooled_scores = {"mistakes": [], "omissions": []}
    pooled_labels = {"mistakes": [], "omissions": []}
    pair_diags = []
    for pair_id in sorted(results):
        if pair_id not in gold or pair_id not in manifest:
            pair_diags.append({"pair_id": pair_id, "status": "missing gold or manifest entry"})
            continue
        row = manifest[pair_id]
        gen = _load_input(row["gen_path"], "generation", f"{pair_id}-gen", config)
        ref = _load_input(row["ref_path"], "reference", f"{pair_id}-ref", config)
        for direction, doc, gold_spans in (
            ("mistakes", gen, gold[pair_id].mistakes),
            ("omissions", ref, gold[pair_id].omissions),
        ):
            spans = _granular_spans(results[pair_id], "mistake" if direction == "mistakes" else "omission")
            scores = component_token_scores(doc, spans)
            labels = gold_token_labels(doc, gold_spans)
            pooled_scores[direction].extend(scores)
            pooled_labels[direction].extend(labels)
        pair_diags.append({"pair_id": pair_id, "status": "ok"})

    sections = {}
    curves = {}
    for direction in ("mistakes", "omissions"):
        outcome = granular_max_f1(pooled_scores[direction], pooled_labels[direction])
        sections[direction] = {
            "max_f1": outcome.f1,
            "threshold": outcome.threshold,
            "tokens": len(pooled_scores[direction]),
            "error_tokens": sum(pooled_labels[direction]),
        }
        curves[direction] = outcome.curve

    report = EvalReport(
        kind="granular",
        sections=sections,
        pair_diagnostics=pair_diags,
        audit={"config_hash": config.hash(), "template_version": TEMPLATE_VERSION},
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "granular_report.json").write_text(report.to_json(), encoding="utf-8")
    lines = ["direction\tmax_f1\tthreshold\ttokens\terror_tokens"]
    for direction in ("mistakes", "omissions"):
        s = sections[direction]
        lines.append(f"{direction}\t{s['max_f1']:.6f}\t{s['threshold']:.6f}\t{s['tokens']}\t{s['error_tokens']}")
    (out_dir / "granular_report.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    figure_threshold_curves(curves, out_dir / "granular_f1_curves.png")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval-coarse


def cmd_eval_coarse(args) -> int:
    results = _load_results(args.results)
    if not results:
        raise MissingGold(f"no result files in {args.results}")
    gold = read_coarse_gold(args.gold)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    sections = {}
    pair_diags = []
    lines = ["dimension\tn\taccuracy\ttie_threshold\tspearman\tspearman_p\tkendall\tkendall_p"]
    for dimension in DIMENSIONS:
        deltas, scores = [], []
        for record in gold:
            if record.dimension != dimension:
                continue
            left = results.get(record.text1)
            right = results.get(record.text2)
            if left is None or right is None:
                pair_diags.append({"pair_id": record.pair_id, "dimension": dimension, "status": "missing result"})
                continue
            v1 = left["coarse"][dimension]
            v2 = right["coarse"][dimension]
            if v1 is None or v2 is None:
                pair_diags.append({"pair_id": record.pair_id, "dimension": dimension, "status": "null coarse score"})
                continue
            deltas.append(v1 - v2)
            scores.append(record.score)
        if not deltas:
            sections[dimension] = {"n": 0}
            lines.append(f"{dimension}\t0\t\t\t\t\t\t")
            continue
        pairwise = pairwise_accuracy(deltas, scores)
        correlation = (
            rank_correlations(deltas, [float(s) for s in scores])
            if len(deltas) >= 3
            else None
        )
        sections[dimension] = {
            "n": len(deltas),
            "accuracy": pairwise.accuracy,
            "tie_threshold": pairwise.tie_threshold,
            "correlations": correlation.to_dict() if correlation else None,
        }
        c = correlation.to_dict() if correlation else {}

        def fmt(value):
            return "" if value is None else f"{value:.6f}"

        lines.append(
            f"{dimension}\t{len(deltas)}\t{pairwise.accuracy:.6f}\t{pairwise.tie_threshold:.6f}"
            f"\t{fmt(c.get('spearman'))}\t{fmt(c.get('spearman_p'))}\t{fmt(c.get('kendall'))}\t{fmt(c.get('kendall_p'))}"
        )
        figure_delta_scatter(deltas, scores, dimension, out_dir / f"coarse_scatter_{dimension}.png")

    report = EvalReport(
        kind="coarse",
        sections=sections,
        pair_diagnostics=pair_diags,
        audit={"config_hash": _build_config(args).hash(), "template_version": TEMPLATE_VERSION},
    )
    (out_dir / "coarse_report.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / "coarse_report.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# leaderboard


def cmd_leaderboard(args) -> int:
    results = _load_results(args.results)
    if not results:
        raise MissingGold(f"no result files in {args.results}")
    manifest = {row["pair_id"]: row for row in _read_manifest(args.manifest)}
    config = _build_config(args)

    model_of = {}
    for pair_id in sorted(results):
        row = manifest.get(pair_id)
        if row is None or not row.get("model"):
            raise UnknownModel(f"result {pair_id} has no model in the manifest")
        model_of[pair_id] = row["model"]

    per_model: dict[str, dict[str, list[float]]] = {}
    for pair_id, payload in sorted(results.items()):
        model = model_of[pair_id]
        bucket = per_model.setdefault(model, {dim: [] for dim in DIMENSIONS})
        for dim in DIMENSIONS:
            value = payload["coarse"][dim]
            if value is not None:
                bucket[dim].append(value)

    means = {
        model: {
            dim: (sum(values[dim]) / len(values[dim]) if values[dim] else None) for dim in DIMENSIONS
        }
        for model, values in per_model.items()
    }

    # Metric-derived pairwise judgments: every two generations scored against
    # the same reference form a pair; the higher overall wins, close is a tie.
    by_ref: dict[str, list[str]] = {}
    for pair_id, payload in sorted(results.items()):
        by_ref.setdefault(payload["ref_id"], []).append(pair_id)
    judgments = []
    for ref_id in sorted(by_ref):
        group = by_ref[ref_id]
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                a, b = group[i], group[j]
                model_a, model_b = model_of[a], model_of[b]
                if model_a == model_b:
                    continue
                va = results[a]["coarse"]["overall"]
                vb = results[b]["coarse"]["overall"]
                if va is None or vb is None:
                    continue
                delta = va - vb
                outcome = "tie" if abs(delta) <= config.tie_threshold else ("a" if delta > 0 else "b")
                judgments.append((model_a, model_b, outcome))

    elo = elo_rankings(judgments)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def fmt(value):
        return "" if value is None else f"{value:.6f}"

    lines = ["model\tn_pairs\tmistakes\tomissions\toverall\telo\trank"]
    for model in sorted(means):
        n = len(per_model[model]["overall"])
        lines.append(
            f"{model}\t{n}\t{fmt(means[model]['mistakes'])}\t{fmt(means[model]['omissions'])}"
            f"\t{fmt(means[model]['overall'])}\t{fmt(elo.ratings.get(model))}\t{elo.ranks.get(model, '')}"
        )
    (out_dir / "leaderboard.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    report = EvalReport(
        kind="leaderboard",
        sections={
            "means": means,
            "elo": {"ratings": elo.ratings, "ranks": elo.ranks, "judgments": len(judgments)},
        },
        audit={"config_hash": config.hash(), "template_version": TEMPLATE_VERSION},
    )
    (out_dir / "leaderboard.json").write_text(report.to_json(), encoding="utf-8")

    scatter = {
        model: (values["mistakes"], values["omissions"])
        for model, values in means.items()
        if values["mistakes"] is not None and values["omissions"] is not None
    }
    if scatter:
        figure_leaderboard(scatter, out_dir / "leaderboard.png")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="posh", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", help="score generation/reference pairs")
    p_score.add_argument("--gen", help="generation document (interchange JSON, or raw text with --preprocess)")
    p_score.add_argument("--ref", help="reference document")
    p_score.add_argument("--pair-id", help="pair id for single-pair mode")
    p_score.add_argument("--manifest", help="JSON-lines manifest {pair_id, gen_path, ref_path, model}")
    p_score.add_argument("--out", required=True, help="output directory")
    _add_common_flags(p_score)

    p_granular = sub.add_parser("eval-granular", help="token-level max-F1 against gold spans")
    p_granular.add_argument("--results", required=True, help="directory of score results")
    p_granular.add_argument("--gold", required=True, help="granular gold JSON")
    p_granular.add_argument("--manifest", required=True, help="manifest used for scoring (locates documents)")
    p_granular.add_argument("--out", required=True)
    _add_common_flags(p_granular)

    p_coarse = sub.add_parser("eval-coarse", help="pairwise accuracy and correlations against gold labels")
    p_coarse.add_argument("--results", required=True)
    p_coarse.add_argument("--gold", required=True, help="coarse gold JSON")
    p_coarse.add_argument("--out", required=True)
    _add_common_flags(p_coarse)

    p_board = sub.add_parser("leaderboard", help="per-model means and ELO from scored pairs")
    p_board.add_argument("--results", required=True)
    p_board.add_argument("--manifest", required=True, help="manifest mapping pair ids to models")
    p_board.add_argument("--out", required=True)
    p_board.add_argument("--tie-threshold", type=float, default=None, help="|overall delta| treated as a tie")
    _add_common_flags(p_board)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    commands = {
        "score": cmd_score,
        "eval-granular": cmd_eval_granular,
        "eval-coarse": cmd_eval_coarse,
        "leaderboard": cmd_leaderboard,
    }
    try:
        return commands[args.command](args)
    except PoshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())

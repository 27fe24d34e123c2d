import json
from pathlib import Path

import pytest

from posh.cli import EXIT_OK, EXIT_PARTIAL, EXIT_USAGE, main
from posh.harness import elo_rankings

from helpers import CAT_JUMPS_ON_WINDOW, DOG_SLEEPS, SMALL_DOG_BARKS, make_payload

RED_HAT = (
    "A red hat.",
    [
        ("A", "a", "DET", 2, "det"),
        ("red", "red", "ADJ", 2, "amod"),
        ("hat", "hat", "NOUN", 2, "ROOT"),
        (".", ".", "OTHER", 2, "punct"),
    ],
)

SENTENCE_POOL = [SMALL_DOG_BARKS, CAT_JUMPS_ON_WINDOW, DOG_SLEEPS, RED_HAT]


def write_doc(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def build_corpus(root: Path, n_pairs: int = 20) -> Path:
    """n_pairs mock pairs; refs shared in groups of four, two models."""
    docs = root / "docs"
    docs.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(n_pairs):
        gen_sents = [SENTENCE_POOL[i % 4], SENTENCE_POOL[(i + 1) % 4]]
        ref_sents = [SENTENCE_POOL[(i // 4) % 4]]
        gen = make_payload(f"p{i:02}-gen", "generation", gen_sents)
        ref = make_payload(f"ref{i // 4}", "reference", ref_sents)
        gen_path = docs / f"p{i:02}_gen.json"
        ref_path = docs / f"p{i:02}_ref.json"
        write_doc(gen_path, gen)
        write_doc(ref_path, ref)
        rows.append(
            {
                "pair_id": f"p{i:02}",
                "gen_path": f"docs/{gen_path.name}",
                "ref_path": f"docs/{ref_path.name}",
                "model": "model-a" if i % 2 == 0 else "model-b",
            }
        )
    manifest = root / "manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return manifest


def read_tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# ---------------------------------------------------------------------------
# score


def test_single_pair_score(tmp_path):
    gen = tmp_path / "gen.json"
    ref = tmp_path / "ref.json"
    write_doc(gen, make_payload("g1", "generation", [SMALL_DOG_BARKS]))
    write_doc(ref, make_payload("r1", "reference", [SMALL_DOG_BARKS]))
    out = tmp_path / "out"
    code = main(
        ["score", "--gen", str(gen), "--ref", str(ref), "--pair-id", "p0", "--out", str(out), "--judge-url", "verbatim:"]
    )
    assert code == EXIT_OK
    payload = json.loads((out / "p0.json").read_text(encoding="utf-8"))
    assert payload["coarse"]["overall"] == 1.0
    assert payload["config_hash"]
    assert payload["template_version"]
    assert (out / "summary.tsv").exists()
    assert (out / "p0.report.txt").exists()


def test_malformed_pair_isolated(tmp_path):
    manifest = build_corpus(tmp_path, n_pairs=3)
    (tmp_path / "docs" / "p01_gen.json").write_text("{broken", encoding="utf-8")
    out = tmp_path / "out"
    code = main(["score", "--manifest", str(manifest), "--out", str(out), "--judge-url", "verbatim:"])
    assert code == EXIT_PARTIAL
    assert (out / "p00.json").exists()
    assert (out / "p02.json").exists()
    assert not (out / "p01.json").exists()
    run_info = json.loads((out / "run.json").read_text(encoding="utf-8"))
    assert run_info["failed"] == 1
    assert run_info["errors"][0]["pair_id"] == "p01"


def test_usage_error_exit_code(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["score", "--out", str(tmp_path), "--bogus-flag"])
    assert excinfo.value.code == EXIT_USAGE
    assert main(["score", "--out", str(tmp_path / "o")]) == EXIT_USAGE  # neither --manifest nor --gen/--ref


def test_mock_corpus_runs_byte_identical_across_jobs(tmp_path):
    manifest = build_corpus(tmp_path, n_pairs=20)
    out1, out2 = tmp_path / "out1", tmp_path / "out2"
    code1 = main(["score", "--manifest", str(manifest), "--out", str(out1), "--judge-url", "mock:0", "--jobs", "1"])
    code2 = main(["score", "--manifest", str(manifest), "--out", str(out2), "--judge-url", "mock:0", "--jobs", "8"])
    assert code1 == code2 == EXIT_OK
    tree1, tree2 = read_tree(out1), read_tree(out2)
    assert tree1.keys() == tree2.keys()
    assert tree1 == tree2


def test_report_marks_alert_spans(tmp_path):
    gen = tmp_path / "gen.json"
    ref = tmp_path / "ref.json"
    write_doc(gen, make_payload("g1", "generation", [SMALL_DOG_BARKS, RED_HAT]))
    write_doc(ref, make_payload("r1", "reference", [SMALL_DOG_BARKS]))
    out = tmp_path / "out"
    main(["score", "--gen", str(gen), "--ref", str(ref), "--pair-id", "p0", "--out", str(out), "--judge-url", "verbatim:"])
    report = (out / "p0.report.txt").read_text(encoding="utf-8")
    assert "[[" in report and "]]" in report
    assert "hat" in report


# ---------------------------------------------------------------------------
# eval-granular


def scored_corpus(tmp_path, judge="verbatim:"):
    docs = tmp_path / "docs"
    docs.mkdir(exist_ok=True)
    rows = []
    for i in range(3):
        gen = make_payload(f"p{i}-gen", "generation", [SMALL_DOG_BARKS, RED_HAT])
        ref = make_payload(f"p{i}-ref", "reference", [SMALL_DOG_BARKS, CAT_JUMPS_ON_WINDOW])
        write_doc(docs / f"p{i}_gen.json", gen)
        write_doc(docs / f"p{i}_ref.json", ref)
        rows.append(
            {
                "pair_id": f"p{i}",
                "gen_path": f"docs/p{i}_gen.json",
                "ref_path": f"docs/p{i}_ref.json",
                "model": "m1" if i % 2 == 0 else "m2",
            }
        )
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    out = tmp_path / "results"
    assert main(["score", "--manifest", str(manifest), "--out", str(out), "--judge-url", judge]) == EXIT_OK
    return manifest, out


def test_eval_granular_perfect_gold(tmp_path):
    manifest, results = scored_corpus(tmp_path)
    gold_rows = []
    for path in sorted(results.glob("p*.json")):
        payload = json.loads(path.read_text(encoding="utf-8"))
        row = {"pair_id": payload["pair_id"], "mistakes": [], "omissions": []}
        for g in payload["granular"]:
            if g["score"] <= 2.0:
                row["mistakes" if g["direction"] == "mistake" else "omissions"].append(g["span"])
        gold_rows.append(row)
    gold = tmp_path / "gold.json"
    gold.write_text(json.dumps(gold_rows), encoding="utf-8")
    out = tmp_path / "eval"
    code = main(
        ["eval-granular", "--results", str(results), "--gold", str(gold), "--manifest", str(manifest), "--out", str(out)]
    )
    assert code == EXIT_OK
    report = json.loads((out / "granular_report.json").read_text(encoding="utf-8"))
    assert report["sections"]["mistakes"]["max_f1"] == 1.0
    assert report["sections"]["omissions"]["max_f1"] == 1.0
    assert (out / "granular_f1_curves.png").exists()
    assert (out / "granular_report.tsv").exists()


def test_eval_granular_missing_gold(tmp_path):
    manifest, results = scored_corpus(tmp_path)
    code = main(
        [
            "eval-granular",
            "--results",
            str(results),
            "--gold",
            str(tmp_path / "absent.json"),
            "--manifest",
            str(manifest),
            "--out",
            str(tmp_path / "eval"),
        ]
    )
    assert code == EXIT_PARTIAL


# ---------------------------------------------------------------------------
# eval-coarse


def test_eval_coarse_perfect_agreement(tmp_path):
    docs = tmp_path / "docs"
    docs.mkdir()
    rows = []
    # p-good reproduces the reference; p-bad hallucinates and misses content
    write_doc(docs / "good_gen.json", make_payload("good-gen", "generation", [SMALL_DOG_BARKS]))
    write_doc(docs / "good_ref.json", make_payload("shared-ref", "reference", [SMALL_DOG_BARKS]))
    write_doc(docs / "bad_gen.json", make_payload("bad-gen", "generation", [RED_HAT]))
    write_doc(docs / "bad_ref.json", make_payload("shared-ref", "reference", [SMALL_DOG_BARKS]))
    rows = [
        {"pair_id": "p-good", "gen_path": "docs/good_gen.json", "ref_path": "docs/good_ref.json", "model": "m1"},
        {"pair_id": "p-bad", "gen_path": "docs/bad_gen.json", "ref_path": "docs/bad_ref.json", "model": "m2"},
    ]
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    results = tmp_path / "results"
    assert main(["score", "--manifest", str(manifest), "--out", str(results), "--judge-url", "verbatim:"]) == EXIT_OK

    gold = tmp_path / "coarse_gold.json"
    gold.write_text(
        json.dumps(
            [
                {"pair_id": "c1", "text1": "p-good", "text2": "p-bad", "dimension": "overall", "label": "much_better_1"},
                {"pair_id": "c2", "text1": "p-bad", "text2": "p-good", "dimension": "overall", "label": "much_better_2"},
                {"pair_id": "c3", "text1": "p-good", "text2": "p-good", "dimension": "overall", "label": "equal"},
                {"pair_id": "c4", "text1": "p-good", "text2": "p-missing", "dimension": "overall", "label": "equal"},
            ]
        ),
        encoding="utf-8",
    )
    out = tmp_path / "eval"
    code = main(["eval-coarse", "--results", str(results), "--gold", str(gold), "--out", str(out)])
    assert code == EXIT_OK
    report = json.loads((out / "coarse_report.json").read_text(encoding="utf-8"))
    overall = report["sections"]["overall"]
    assert overall["n"] == 3  # the record with a missing result is excluded
    assert overall["accuracy"] == 1.0
    assert overall["correlations"]["spearman"] == 1.0
    assert any(p["status"] == "missing result" for p in report["pairs"])
    assert (out / "coarse_scatter_overall.png").exists()


# ---------------------------------------------------------------------------
# leaderboard


def test_leaderboard_single_model(tmp_path):
    manifest, results = scored_corpus(tmp_path)
    # strip model-b rows to leave one model
    rows = [json.loads(l) for l in manifest.read_text(encoding="utf-8").splitlines()]
    for row in rows:
        row["model"] = "only-model"
    manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    out = tmp_path / "board"
    assert main(["leaderboard", "--results", str(results), "--manifest", str(manifest), "--out", str(out)]) == EXIT_OK
    lines = (out / "leaderboard.tsv").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2  # header + one model


def test_leaderboard_orders_better_model_first(tmp_path):
    docs = tmp_path / "docs"
    docs.mkdir()
    rows = []
    for i in range(4):
        ref_payload = make_payload(f"ref{i}", "reference", [SMALL_DOG_BARKS])
        write_doc(docs / f"ref{i}.json", ref_payload)
        write_doc(docs / f"good{i}.json", make_payload(f"good{i}", "generation", [SMALL_DOG_BARKS]))
        write_doc(docs / f"bad{i}.json", make_payload(f"bad{i}", "generation", [RED_HAT]))
        rows.append({"pair_id": f"good-{i}", "gen_path": f"docs/good{i}.json", "ref_path": f"docs/ref{i}.json", "model": "strong"})
        rows.append({"pair_id": f"bad-{i}", "gen_path": f"docs/bad{i}.json", "ref_path": f"docs/ref{i}.json", "model": "weak"})
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    results = tmp_path / "results"
    assert main(["score", "--manifest", str(manifest), "--out", str(results), "--judge-url", "verbatim:"]) == EXIT_OK
    out = tmp_path / "board"
    assert main(["leaderboard", "--results", str(results), "--manifest", str(manifest), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "leaderboard.json").read_text(encoding="utf-8"))
    assert report["sections"]["elo"]["ranks"]["strong"] == 1
    assert report["sections"]["elo"]["ranks"]["weak"] == 2
    assert report["sections"]["means"]["strong"]["overall"] > report["sections"]["means"]["weak"]["overall"]
    assert (out / "leaderboard.png").exists()

    # the ELO table matches the harness run on the same derived judgments
    judgments = [("strong", "weak", "a")] * 4
    direct = elo_rankings(judgments)
    assert report["sections"]["elo"]["ratings"]["strong"] == pytest.approx(direct.ratings["strong"])


def test_leaderboard_unknown_model(tmp_path):
    manifest, results = scored_corpus(tmp_path)
    rows = [json.loads(l) for l in manifest.read_text(encoding="utf-8").splitlines()]
    for row in rows:
        row.pop("model", None)
    manifest.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    code = main(
        ["leaderboard", "--results", str(results), "--manifest", str(manifest), "--out", str(tmp_path / "b")]
    )
    assert code == EXIT_PARTIAL


def test_eval_granular_matches_oracle_recomputation(tmp_path):
    """The report's max F1 equals an independent recomputation from the same
    result spans and gold spans."""
    import oracles
    from posh.document import Span, load_document_file
    from posh.harness import component_token_scores, gold_token_labels

    manifest, results = scored_corpus(tmp_path)
    gold_rows = []
    for i, path in enumerate(sorted(results.glob("p*.json"))):
        payload = json.loads(path.read_text(encoding="utf-8"))
        # hand-pick gold: flag the first mistake-direction component span
        first = payload["granular"][0]["span"]
        gold_rows.append({"pair_id": payload["pair_id"], "mistakes": [first], "omissions": [[0, 3]]})
    gold = tmp_path / "gold.json"
    gold.write_text(json.dumps(gold_rows), encoding="utf-8")
    out = tmp_path / "eval"
    assert (
        main(["eval-granular", "--results", str(results), "--gold", str(gold), "--manifest", str(manifest), "--out", str(out)])
        == EXIT_OK
    )
    report = json.loads((out / "granular_report.json").read_text(encoding="utf-8"))
    assert report["audit"]["config_hash"]

    manifest_rows = {json.loads(l)["pair_id"]: json.loads(l) for l in manifest.read_text(encoding="utf-8").splitlines()}
    pooled_scores, pooled_labels = [], []
    for pair_id in sorted(r["pair_id"] for r in gold_rows):
        payload = json.loads((results / f"{pair_id}.json").read_text(encoding="utf-8"))
        doc = load_document_file(tmp_path / manifest_rows[pair_id]["gen_path"])
        spans = [
            (Span(*g["span"]), g["score"])
            for g in payload["granular"]
            if g["direction"] == "mistake" and g["provenance"] != "skipped"
        ]
        gold_spans = [Span(*s) for r in gold_rows if r["pair_id"] == pair_id for s in r["mistakes"]]
        pooled_scores.extend(component_token_scores(doc, spans))
        pooled_labels.extend(gold_token_labels(doc, gold_spans))
    oracle_f1, oracle_t = oracles.max_f1_oracle(pooled_scores, pooled_labels)
    assert report["sections"]["mistakes"]["max_f1"] == oracle_f1
    assert report["sections"]["mistakes"]["threshold"] == oracle_t

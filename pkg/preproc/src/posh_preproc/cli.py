"""Preprocess CLI: raw text on stdin, interchange JSON on stdout.

    posh-preprocess --role generation --doc-id img42 < description.txt

Diagnostics (backend and model identifiers, sentence/cluster counts) go to
stderr so stdout stays a single clean JSON document. Exits nonzero when the
backend cannot load or its output fails the invariant self-check.
"""

from __future__ import annotations

import argparse
import json
import sys

from .adapter import AdapterConfig, ModelLoadError, build_document, serialize


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posh-preprocess", description=__doc__)
    parser.add_argument("--role", required=True, choices=["generation", "reference"])
    parser.add_argument("--doc-id", required=True)
    parser.add_argument("--parser-model", default="rule", help="'rule' or a spaCy pipeline name")
    parser.add_argument("--coref-model", default="rule", help="'rule', 'none' or a coreference model name")
    parser.add_argument("--batch-size", type=int, default=8)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = AdapterConfig(
        parser_model=args.parser_model, coref_model=args.coref_model, batch_size=args.batch_size
    )
    text = sys.stdin.buffer.read().decode("utf-8")
    try:
        payload = build_document(args.doc_id, args.role, text, config)
    except ModelLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    sys.stdout.write(serialize(payload))
    diagnostics = {
        "parser_model": config.parser_model,
        "coref_model": config.coref_model,
        "sentences": len(payload["sentences"]),
        "coref_clusters": len(payload["coref"]),
    }
    print(json.dumps(diagnostics, ensure_ascii=False), file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""CLI: encode --in concept_text.txt --model <id> --out vectors.txt [--batch 64]"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .errors import EncoderError
from .export import EncodeJob, encode_concepts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="encode",
        description="Encode concept names (plus descriptions) into a vector file.",
    )
    parser.add_argument("--in", dest="input_path", required=True,
                        help="concept_text.txt path")
    parser.add_argument("--model", required=True,
                        help="encoder id: a sentence-transformers checkpoint, "
                             "st:<id>, or hash:<dim> for the offline featurizer")
    parser.add_argument("--out", required=True, help="output vector file path")
    parser.add_argument("--batch", type=int, default=64, help="encoding batch size")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    job = EncodeJob(input_path=args.input_path, model_name=args.model,
                    output_path=args.out, batch_size=args.batch)
    try:
        count, dim = encode_concepts(job)
    except EncoderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} vectors of dimension {dim} to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

    mlmfeat extract --inputs reviews.txt --template "It was [MASK] . [input]" \
        --verbalizer sentiment.json --model bert-base-uncased --out reviews.celda
"""

from __future__ import annotations

import argparse
import sys

from mlmfeat.extract import ExtractionJob, extract
from mlmfeat.template import Template


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlmfeat", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="turn a text file into a feature file")
    p.add_argument("--inputs", required=True, help="text file, one example per line")
    p.add_argument(
        "--template", required=True,
        help='cloze pattern with [MASK] and [input], e.g. "It was [MASK] . [input]"',
    )
    p.add_argument("--verbalizer", required=True, help="JSON: label name -> word list")
    p.add_argument("--model", required=True, help="masked-LM identifier or local path")
    p.add_argument("--out", required=True, help="feature file to write")
    p.add_argument("--max-len", type=int, default=128, help="token length cap")
    p.add_argument("--batch", type=int, default=32, help="inference batch size")
    p.add_argument(
        "--exclude-mask-pool", action="store_true",
        help="leave the mask position out of the mean-pooled hidden state",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExtractionJob(
            inputs=args.inputs,
            template=Template(args.template),
            verbalizer=args.verbalizer,
            model=args.model,
            out=args.out,
            max_length=args.max_len,
            batch_size=args.batch,
            include_mask_in_pool=not args.exclude_mask_pool,
        )
        result = extract(job)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if result.truncated:
        print(
            f"warning: {result.truncated} inputs exceeded --max-len and were truncated",
            file=sys.stderr,
        )
    print(
        f"wrote {result.records} records ({result.hidden_dim} dims, "
        f"{len(result.label_names)} labels) to {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Generate a synthetic feature file for pipeline experiments.

Examples:
    python3 scripts/make_synthetic.py --out /tmp/f.celda --n 4000 --labels 4 \
        --dim 8 --corruption 0.3
    python3 scripts/make_synthetic.py --out /tmp/g.celda --n 2000 --labels 20 \
        --dim 32 --correct 7
"""

import argparse
import sys

from clda.feature_store import write_feature_file, write_feature_jsonl
from clda.synthetic import confusion_map, make_mixture_dataset


def parse_map(raw):
    pairs = {}
    for chunk in raw.split(","):
        src, _, dst = chunk.partition(":")
        pairs[int(src)] = int(dst)
    return pairs


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--out", required=True, help="output path (.celda or .jsonl)")
    parser.add_argument("--n", type=int, default=4000)
    parser.add_argument("--labels", type=int, default=4)
    parser.add_argument("--dim", type=int, default=8)
    parser.add_argument("--seed", type=int, default=13)
    parser.add_argument(
        "--corruption", type=float, default=0.0,
        help="fraction of records given a uniformly random wrong pseudo-label",
    )
    parser.add_argument(
        "--map", dest="label_map", default=None, metavar="SRC:DST,...",
        help="systematic relabeling applied before corruption",
    )
    parser.add_argument(
        "--correct", type=int, default=None, metavar="C",
        help="shorthand: keep C classes correct, cycle the rest (overrides --map)",
    )
    parser.add_argument("--separation", type=float, default=6.0)
    parser.add_argument("--noise", type=float, default=1.0)
    args = parser.parse_args(argv)

    label_map = parse_map(args.label_map) if args.label_map else None
    if args.correct is not None:
        label_map = confusion_map(args.labels, args.correct)

    dataset, truths = make_mixture_dataset(
        args.n,
        args.labels,
        args.dim,
        seed=args.seed,
        corruption=args.corruption,
        label_map=label_map,
        separation=args.separation,
        noise=args.noise,
    )
    writer = write_feature_jsonl if args.out.endswith(".jsonl") else write_feature_file
    writer(dataset, args.out)

    initial = (dataset.pseudo_labels() == truths).mean()
    print(
        f"wrote {args.n} records ({args.labels} labels, {args.dim} dims) to {args.out}; "
        f"initial pseudo-label accuracy {initial:.4f}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())

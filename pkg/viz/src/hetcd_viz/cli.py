"""Command-line figure generation: embeddings scatter and label-rate sweep."""

from __future__ import annotations

import argparse
import sys

from .plots import VizError, plot_embeddings, plot_sweep


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetcd-viz", description="Figures from exported embeddings and metric logs."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    emb = sub.add_parser("embeddings", help="2D scatter of an exported embedding TSV")
    emb.add_argument("--tsv", required=True)
    emb.add_argument("--out", required=True)
    emb.add_argument("--color-by", choices=("true", "predicted"), default="true")
    emb.add_argument("--method", choices=("pca", "random"), default="pca")
    emb.add_argument("--seed", type=int, default=0)

    sweep = sub.add_parser("sweep", help="criterion vs label rate from metric JSON logs")
    sweep.add_argument("logs", nargs="+", help="metrics.json files, one per run")
    sweep.add_argument("--criterion", required=True)
    sweep.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "embeddings":
            plot_embeddings(
                args.tsv, args.out, color_by=args.color_by, method=args.method, seed=args.seed
            )
            print(f"wrote {args.out}")
        else:
            plot_sweep(args.logs, args.criterion, args.out)
            print(f"wrote {args.out}")
        return 0
    except VizError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

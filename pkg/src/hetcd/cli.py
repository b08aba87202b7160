"""Command-line surface: generate, train, evaluate, export, gradcheck.

Run configuration comes from an optional flat key-value config file;
explicit flags win over file values.  Contract violations exit with
code 1 and a machine-readable JSON error on stderr; argparse handles
bad flags with the usual usage text and exit code 2.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .datagen import GenConfig, generate_series, read_series, write_series
from .errors import ConfigError, HetcdError
from .training import (
    Checkpoint,
    RunConfig,
    evaluate,
    export_embeddings,
    gradient_check_toy,
    train,
)

GRADCHECK_TOLERANCE = 1e-5

_RUN_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_BOOL_FIELDS = {"keep_self_pairs", "attention_rescale", "gcn_only"}


def _parse_config_file(path: str) -> dict:
    values: dict = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError("config_file", f"line {line_no}: expected 'key = value'")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in _RUN_FIELDS:
            raise ConfigError(key, "unknown config key")
        values[key] = raw
    return values


def _coerce(key: str, raw: str):
    if key == "metapaths":
        return tuple(p for p in raw.split(";") if p)
    if key in _BOOL_FIELDS:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(key, f"expected a boolean, got {raw!r}")
    if key in ("learning_rate", "label_fraction", "early_stop_tol"):
        return float(raw)
    return int(raw)


def _build_run_config(args) -> RunConfig:
    values: dict = {}
    if args.config:
        for key, raw in _parse_config_file(args.config).items():
            values[key] = _coerce(key, raw)
    overrides = {
        "window": args.window,
        "hidden": args.hidden,
        "attn_dim": args.attn_dim,
        "learning_rate": args.lr,
        "epochs": args.epochs,
        "label_fraction": args.label_rate,
        "seed": args.seed,
        "pair_cap": args.pair_cap,
        "communities": args.communities,
    }
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    if args.meta_paths is not None:
        values["metapaths"] = tuple(p for p in args.meta_paths.split(";") if p)
    if args.keep_self_pairs:
        values["keep_self_pairs"] = True
    if args.attention_rescale:
        values["attention_rescale"] = True
    if args.gcn_only:
        values["gcn_only"] = True
    return RunConfig(**values)


def _run_block(cfg: RunConfig) -> dict:
    return {
        "label_rate": cfg.label_fraction,
        "window": cfg.window,
        "variant": "gcn_only" if cfg.gcn_only else f"window{cfg.window}",
        "seed": cfg.seed,
    }


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def cmd_generate(args) -> int:
    cfg = GenConfig(
        node_type_count=args.node_types,
        edge_type_count=args.edge_types,
        communities=args.communities,
        nodes_per_type=tuple(int(x) for x in args.nodes_per_type.split(",")),
        time_steps=args.time_steps,
        p_in=args.p_in,
        p_out=args.p_out,
        churn_rate=args.churn,
        migration_rate=args.migration,
        feature_dim=args.feature_dim,
        feature_noise=args.feature_noise,
        labeled_type=args.labeled_type,
        seed=args.seed,
    )
    series = generate_series(cfg)
    write_series(series, args.out)
    print(f"wrote {len(series)} snapshots to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = _build_run_config(args)
    series = read_series(args.inp)
    result = train(cfg, series)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result.checkpoint.save(out_dir / "checkpoint.json")
    with open(out_dir / "epochs.jsonl", "w", encoding="utf-8") as fh:
        for entry in result.epoch_log:
            fh.write(json.dumps(entry))
            fh.write("\n")
    metrics = dict(result.checkpoint.metrics)
    metrics["run"] = _run_block(result.checkpoint.config)
    _write_json(out_dir / "metrics.json", metrics)
    print(
        f"trained {result.checkpoint.epoch} epochs; "
        f"held-out metrics: {json.dumps(result.checkpoint.metrics)}"
    )
    return 0


def cmd_evaluate(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    series = read_series(args.inp)
    metrics = evaluate(ckpt, series, split=args.split)
    doc = dict(metrics)
    doc["run"] = _run_block(ckpt.config)
    if args.out:
        _write_json(Path(args.out), doc)
    print(json.dumps(doc))
    return 0


def cmd_export(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    series = read_series(args.inp)
    export_embeddings(ckpt, series, args.out)
    print(f"wrote embeddings to {args.out}")
    return 0


def cmd_gradcheck(args) -> int:
    error = gradient_check_toy(seed=args.seed)
    print(f"max relative gradient error: {error:.3e}")
    return 0 if error < args.tolerance else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetcd",
        description="Community detection on heterogeneous temporal graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic benchmark series")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--node-types", type=int, default=3)
    gen.add_argument("--edge-types", type=int, default=3)
    gen.add_argument("--communities", type=int, default=3)
    gen.add_argument("--nodes-per-type", default="120,60,24")
    gen.add_argument("--time-steps", type=int, default=3)
    gen.add_argument("--p-in", type=float, default=0.1)
    gen.add_argument("--p-out", type=float, default=0.01)
    gen.add_argument("--churn", type=float, default=0.1)
    gen.add_argument("--migration", type=float, default=0.05)
    gen.add_argument("--feature-dim", type=int, default=8)
    gen.add_argument("--feature-noise", type=float, default=0.5)
    gen.add_argument("--labeled-type", type=int, default=0)
    gen.set_defaults(func=cmd_generate)

    def add_run_flags(p):
        p.add_argument("--config", help="flat key = value config file; flags win")
        p.add_argument("--seed", type=int)
        p.add_argument("--window", type=int, choices=(3, 5, 7))
        p.add_argument("--lr", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--label-rate", type=float)
        p.add_argument("--meta-paths", help="semicolon-separated 'n0,n1,n2:e0,e1' entries")
        p.add_argument("--hidden", type=int)
        p.add_argument("--attn-dim", type=int)
        p.add_argument("--pair-cap", type=int)
        p.add_argument("--communities", type=int)
        p.add_argument("--keep-self-pairs", action="store_true")
        p.add_argument("--attention-rescale", action="store_true")
        p.add_argument("--gcn-only", action="store_true")

    tr = sub.add_parser("train", help="train on a series file")
    tr.add_argument("--in", dest="inp", required=True)
    tr.add_argument("--out", required=True, help="output directory")
    add_run_flags(tr)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--in", dest="inp", required=True)
    ev.add_argument("--out")
    ev.add_argument("--split", choices=("train", "heldout", "all"), default="heldout")
    ev.set_defaults(func=cmd_evaluate)

    ex = sub.add_parser("export", help="export final-snapshot embeddings as TSV")
    ex.add_argument("--checkpoint", required=True)
    ex.add_argument("--in", dest="inp", required=True)
    ex.add_argument("--out", required=True)
    ex.set_defaults(func=cmd_export)

    gc = sub.add_parser("gradcheck", help="finite-difference check on a seeded toy window")
    gc.add_argument("--seed", type=int, default=1)
    gc.add_argument("--tolerance", type=float, default=GRADCHECK_TOLERANCE)
    gc.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HetcdError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())

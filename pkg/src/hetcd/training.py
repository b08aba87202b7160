"""Training loop, run configuration, checkpointing, and embedding export.

Everything downstream of a (seed, config, input series) triple is
deterministic: parameter init, train/held-out mask, and pair sampling
each draw from their own seeded stream.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import model as mdl
from . import objective as obj
from .autodiff import AdamState, Tape, Value, adam_step, backward
from .errors import (
    ConfigError,
    DomainError,
    GraphInvariantError,
    SeriesFormatError,
    TrainingDivergedError,
)
from .graphs import HeteroSnapshot, TemporalSeries, collapse_adjacency
from .metapaths import MetaPath

# Matches the default generator layout: type 0 is labeled, edge types
# 0/1/2 connect type pairs (0,1), (0,2), (1,2).  The first two paths
# terminate at the labeled type so their injections land on scored rows.
DEFAULT_METAPATHS = ("0,1,0:0,0", "0,2,0:1,1", "1,2,1:2,2")

WINDOW_CHOICES = (3, 5, 7)
CHECKPOINT_VERSION = 1

# Seeded sub-streams so mask selection stays a pure function of
# (seed, fraction) no matter what else draws randomness.
_STREAM_INIT = 0
_STREAM_PAIRING = 1
_STREAM_MASK = 2


@dataclass(frozen=True)
class RunConfig:
    window: int = 3
    hidden: int = 16
    attn_dim: int = 8
    metapaths: tuple[str, ...] = DEFAULT_METAPATHS
    learning_rate: float = 0.001
    epochs: int = 200
    label_fraction: float = 0.8
    seed: int = 0
    pair_cap: int = 32
    keep_self_pairs: bool = False
    attention_rescale: bool = False
    gcn_only: bool = False
    early_stop_patience: int = 30
    early_stop_tol: float = 1e-6
    communities: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "metapaths", tuple(self.metapaths))
        if self.window not in WINDOW_CHOICES:
            raise ConfigError("window", f"must be one of {WINDOW_CHOICES}")
        if self.hidden < 1:
            raise ConfigError("hidden", "must be >= 1")
        if self.attn_dim < 1:
            raise ConfigError("attn_dim", "must be >= 1")
        if not self.metapaths:
            raise ConfigError("metapaths", "need at least one meta-path")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate", "must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs", "must be >= 0")
        if not 0.0 < self.label_fraction <= 1.0:
            raise ConfigError("label_fraction", "must be in (0, 1]")
        if self.pair_cap < 1:
            raise ConfigError("pair_cap", "must be >= 1")
        if self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience", "must be >= 1")
        if self.communities is not None and self.communities < 2:
            raise ConfigError("communities", "must be >= 2")

    def parsed_metapaths(self) -> list[MetaPath]:
        return [MetaPath.parse(text) for text in self.metapaths]


@dataclass
class Checkpoint:
    """Named parameter matrices plus the config that produced them."""

    config: RunConfig
    epoch: int
    metrics: dict[str, float]
    params: dict[str, np.ndarray]
    version: int = CHECKPOINT_VERSION

    def save(self, path) -> None:
        doc = {
            "version": self.version,
            "config": dataclasses.asdict(self.config),
            "epoch": self.epoch,
            "metrics": self.metrics,
            "params": {
                name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
                for name, arr in self.params.items()
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")

    @staticmethod
    def load(path) -> "Checkpoint":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("version") != CHECKPOINT_VERSION:
            raise SeriesFormatError(
                f"unsupported checkpoint version {doc.get('version')}", field="version"
            )
        cfg_doc = dict(doc["config"])
        cfg_doc["metapaths"] = tuple(cfg_doc["metapaths"])
        config = RunConfig(**cfg_doc)
        params = {}
        for name, entry in doc["params"].items():
            shape = tuple(entry["shape"])
            arr = np.asarray(entry["data"], dtype=np.float64).reshape(shape)
            params[name] = arr
        return Checkpoint(
            config=config, epoch=int(doc["epoch"]), metrics=dict(doc["metrics"]), params=params
        )


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    epoch_log: list[dict]
    train_rows: np.ndarray
    heldout_rows: np.ndarray


def glorot_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def param_names(metapath_count: int) -> list[str]:
    return (
        ["w0", "w1"]
        + [f"compress_{i}" for i in range(metapath_count)]
        + ["attn_v", "attn_w"]
    )


def init_params(
    cfg: RunConfig, feature_dim: int, num_classes: int, rng: np.random.Generator
) -> dict[str, Value]:
    """Seeded uniform init for every named parameter, in a fixed draw order."""
    d = num_classes
    shapes = {
        "w0": (feature_dim, cfg.hidden),
        "w1": (cfg.hidden, d),
        **{f"compress_{i}": (d * d, d) for i in range(len(cfg.metapaths))},
        "attn_v": (cfg.attn_dim, d),
        "attn_w": (1, cfg.attn_dim),
    }
    return {
        name: Value(glorot_uniform(rng, *shapes[name]), op=name)
        for name in param_names(len(cfg.metapaths))
    }


def params_as_model(cfg: RunConfig, params: dict[str, Value]) -> tuple[mdl.GcnParams, mdl.CrossTimeParams]:
    gcn = mdl.GcnParams(w0=params["w0"], w1=params["w1"])
    cross = mdl.CrossTimeParams(
        compress=tuple(params[f"compress_{i}"] for i in range(len(cfg.metapaths))),
        attn_v=params["attn_v"],
        attn_w=params["attn_w"],
    )
    return gcn, cross


def split_labeled_rows(
    snapshot: HeteroSnapshot, fraction: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Partition the labeled rows into train and held-out sets.

    Pure function of (snapshot, fraction, seed); at least one row always
    lands in the train set.
    """
    rows = snapshot.labeled_rows()
    if rows.size == 0:
        raise GraphInvariantError("final snapshot has no labeled nodes")
    rng = np.random.default_rng([seed, _STREAM_MASK])
    order = rng.permutation(rows.size)
    k = min(max(int(round(fraction * rows.size)), 1), rows.size)
    train = np.sort(rows[order[:k]])
    heldout = np.sort(rows[order[k:]])
    return train, heldout


def infer_communities(snapshot: HeteroSnapshot, declared: int | None) -> int:
    labels = snapshot.label_vector()
    labeled = labels[labels >= 0]
    if labeled.size == 0:
        raise GraphInvariantError("final snapshot has no labeled nodes")
    found = int(labeled.max()) + 1
    if declared is None:
        return max(found, 2)
    if found > declared:
        raise ConfigError("communities", f"labels reach {found - 1} but config declares {declared}")
    return declared


def _labeled_type(snapshot: HeteroSnapshot) -> int:
    types = {n.node_type for n in snapshot.nodes if n.label is not None}
    if not types:
        raise GraphInvariantError("final snapshot has no labeled nodes")
    if len(types) > 1:
        raise GraphInvariantError(f"labels span several node types {sorted(types)}")
    return types.pop()


class WindowRunner:
    """Precomputed adjacencies and pairings for repeated window passes."""

    def __init__(self, cfg: RunConfig, series: TemporalSeries):
        self.cfg = cfg
        self.snapshots = series.window(cfg.window)
        self.final = self.snapshots[-1]
        self.metapaths = cfg.parsed_metapaths()
        self.a_hats = mdl.normalized_adjacencies(self.snapshots)
        pairing_rng = np.random.default_rng([cfg.seed, _STREAM_PAIRING])
        self.pairings = mdl.build_window_pairings(
            self.snapshots,
            self.metapaths,
            keep_self_pairs=cfg.keep_self_pairs,
            pair_cap=cfg.pair_cap,
            rng=pairing_rng,
        )
        self.labeled_type = _labeled_type(self.final)
        self.labeled_type_rows = np.array(
            [self.final.id_to_row[n.id] for n in self.final.nodes_of_type(self.labeled_type)]
        )
        self.modularity_graph = collapse_adjacency(self.final, self.labeled_type)

    def forward(self, params: dict[str, Value]) -> Value:
        gcn, cross = params_as_model(self.cfg, params)
        if self.cfg.gcn_only:
            return mdl.gcn_only_forward(self.final, gcn, a_hat=self.a_hats[-1])
        return mdl.window_forward(
            self.snapshots,
            self.metapaths,
            gcn,
            cross,
            a_hats=self.a_hats,
            pairings_per_step=self.pairings,
            attention_rescale=self.cfg.attention_rescale,
        )


def _report(
    runner: WindowRunner,
    prediction: obj.Prediction,
    rows: np.ndarray,
    num_classes: int,
) -> dict[str, float]:
    """All six criteria as percentages; modularity scores the whole
    labeled type's collapsed graph, the rest score the given rows."""
    truth = runner.final.label_vector()
    report = obj.classification_report(prediction.hard_labels[rows], truth[rows], num_classes)
    report["Modularity"] = obj.modularity_from_adjacency(
        runner.modularity_graph, prediction.hard_labels[runner.labeled_type_rows]
    )
    return obj.to_percentages(report)


def train(cfg: RunConfig, series: TemporalSeries) -> TrainResult:
    """Full-batch training of the window model on the final snapshot's labels.

    Logs loss plus held-out metrics per epoch; stops early on a loss
    plateau; aborts with a diagnostic if the loss turns non-finite.
    """
    runner = WindowRunner(cfg, series)
    final = runner.final
    num_classes = infer_communities(final, cfg.communities)
    cfg = dataclasses.replace(cfg, communities=num_classes)
    runner.cfg = cfg

    train_rows, heldout_rows = split_labeled_rows(final, cfg.label_fraction, cfg.seed)
    eval_rows = heldout_rows if heldout_rows.size else train_rows
    truth = final.label_vector()

    rng = np.random.default_rng([cfg.seed, _STREAM_INIT])
    params = init_params(cfg, final.feature_dim, num_classes, rng)
    state = AdamState(params=tuple(params.values()), learning_rate=cfg.learning_rate)

    epoch_log: list[dict] = []
    losses: list[float] = []
    for epoch in range(cfg.epochs):
        with Tape():
            try:
                z = runner.forward(params)
                probs = ad.softmax_over_rows(ad.row_gather(z, train_rows))
                loss, _ = obj.perm_ce_loss(probs, truth[train_rows], num_classes)
                loss_val = float(loss.data[0, 0])
            except DomainError as exc:
                # log/exp leaving their domain is how divergence surfaces
                raise TrainingDivergedError(
                    f"training diverged at epoch {epoch}: {exc}; lower the learning rate"
                ) from exc
            if not math.isfinite(loss_val):
                raise TrainingDivergedError(
                    f"loss became non-finite at epoch {epoch}; lower the learning rate"
                )
            prediction = obj.Prediction.from_logits(z.data)
            backward(loss)
        entry = {"epoch": epoch, "loss": loss_val}
        entry.update(_report(runner, prediction, eval_rows, num_classes))
        epoch_log.append(entry)
        losses.append(loss_val)
        adam_step(state)

        patience, tol = cfg.early_stop_patience, cfg.early_stop_tol
        if len(losses) > patience:
            anchor = losses[-patience - 1]
            if abs(losses[-1] - anchor) / max(abs(anchor), 1e-12) < tol:
                break

    final_metrics = evaluate_params(cfg, series, params, eval_rows, runner=runner)
    checkpoint = Checkpoint(
        config=cfg,
        epoch=len(epoch_log),
        metrics=final_metrics,
        params={name: value.data.copy() for name, value in params.items()},
    )
    return TrainResult(
        checkpoint=checkpoint,
        epoch_log=epoch_log,
        train_rows=train_rows,
        heldout_rows=heldout_rows,
    )


def _params_from_checkpoint(ckpt: Checkpoint) -> dict[str, Value]:
    expected = param_names(len(ckpt.config.metapaths))
    missing = [n for n in expected if n not in ckpt.params]
    if missing:
        raise ConfigError("params", f"checkpoint missing parameters {missing}")
    return {name: Value(ckpt.params[name], op=name) for name in expected}


def evaluate_params(
    cfg: RunConfig,
    series: TemporalSeries,
    params: dict[str, Value],
    rows: np.ndarray,
    *,
    runner: WindowRunner | None = None,
) -> dict[str, float]:
    """Single forward pass and the six criteria (percentages) on `rows`."""
    if runner is None:
        runner = WindowRunner(cfg, series)
    num_classes = infer_communities(runner.final, cfg.communities)
    with Tape():
        z = runner.forward(params)
    prediction = obj.Prediction.from_logits(z.data)
    return _report(runner, prediction, np.asarray(rows, dtype=np.int64), num_classes)


def select_rows(cfg: RunConfig, series: TemporalSeries, split: str) -> np.ndarray:
    """Row set for one of the named splits of the final window snapshot."""
    final = series.window(cfg.window)[-1]
    if split == "all":
        return final.labeled_rows()
    train_rows, heldout_rows = split_labeled_rows(final, cfg.label_fraction, cfg.seed)
    if split == "train":
        return train_rows
    if split == "heldout":
        return heldout_rows if heldout_rows.size else train_rows
    raise ConfigError("split", f"unknown split {split!r}")


def evaluate(ckpt: Checkpoint, series: TemporalSeries, split: str = "heldout") -> dict[str, float]:
    params = _params_from_checkpoint(ckpt)
    rows = select_rows(ckpt.config, series, split)
    return evaluate_params(ckpt.config, series, params, rows)


def export_embeddings(ckpt: Checkpoint, series: TemporalSeries, path) -> None:
    """Write final-snapshot embeddings as TSV.

    Columns: node_id, true_label (-1 when unlabeled), predicted_label
    (raw argmax, not permutation-aligned), then the d embedding values.
    """
    cfg = ckpt.config
    runner = WindowRunner(cfg, series)
    params = _params_from_checkpoint(ckpt)
    with Tape():
        z = runner.forward(params)
    prediction = obj.Prediction.from_logits(z.data)
    final = runner.final
    truth = final.label_vector()
    d = z.data.shape[1]
    header = ["node_id", "true_label", "predicted_label"] + [f"z{j}" for j in range(d)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for i, node in enumerate(final.nodes):
            cells = [str(node.id), str(int(truth[i])), str(int(prediction.hard_labels[i]))]
            cells += [repr(float(v)) for v in z.data[i]]
            fh.write("\t".join(cells) + "\n")


def gradient_check_toy(seed: int = 1, h: float = 1e-6) -> float:
    """Finite-difference check of the full loss on a small seeded window.

    Builds a 3-step series (12 nodes per snapshot), three communities,
    two meta-paths, and returns the max relative gradient error over
    every parameter matrix.
    """
    from .datagen import GenConfig, generate_series

    gen = GenConfig(
        nodes_per_type=(6, 4, 2),
        communities=3,
        time_steps=3,
        p_in=0.5,
        p_out=0.05,
        churn_rate=0.1,
        migration_rate=0.1,
        feature_dim=4,
        feature_noise=0.5,
        seed=seed,
    )
    series = generate_series(gen)
    # Label-terminal meta-paths and rescaled attention keep every
    # parameter's gradient well above the finite-difference noise floor.
    cfg = RunConfig(
        window=3,
        hidden=5,
        attn_dim=2,
        metapaths=("0,1,0:0,0", "0,2,0:1,1"),
        seed=seed,
        communities=3,
        attention_rescale=True,
    )
    runner = WindowRunner(cfg, series)
    truth = runner.final.label_vector()
    rows = runner.final.labeled_rows()
    rng = np.random.default_rng([seed, _STREAM_INIT])
    params = init_params(cfg, runner.final.feature_dim, 3, rng)

    def loss_fn() -> Value:
        z = runner.forward(params)
        probs = ad.softmax_over_rows(ad.row_gather(z, rows))
        loss, _ = obj.perm_ce_loss(probs, truth[rows], 3)
        return loss

    return ad.finite_difference_check(loss_fn, list(params.values()), h=h)

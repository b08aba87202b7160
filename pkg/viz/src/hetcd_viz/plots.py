"""Offline figures from exported embedding tables and metric JSON logs.

Reads only the training pipeline's two on-disk formats: the tab-separated
embedding export (node_id, true_label, predicted_label, d embedding
columns) and the per-run metrics JSON (criterion percentages plus a
"run" block with label_rate and variant).  Never mutates its inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CRITERIA = ("ACC", "NMI", "Modularity", "ARI", "Macro-F1", "Micro-F1")
REQUIRED_COLUMNS = ("node_id", "true_label", "predicted_label")


class VizError(ValueError):
    """Malformed input or unsupported request."""


@dataclass(frozen=True)
class EmbeddingTable:
    node_id: np.ndarray
    true_label: np.ndarray
    predicted_label: np.ndarray
    embeddings: np.ndarray

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


def load_embedding_table(path) -> EmbeddingTable:
    """Parse an exported TSV; diagnostics carry the offending line."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise VizError(f"{path}: empty file")
    header = lines[0].split("\t")
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise VizError(f"{path}: missing column {col!r} in header")
    col_index = {name: i for i, name in enumerate(header)}
    embed_cols = [i for i, name in enumerate(header) if name.startswith("z")]
    if len(embed_cols) < 1:
        raise VizError(f"{path}: no embedding columns found")

    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split("\t")
        if len(cells) != len(header):
            raise VizError(
                f"{path}: line {line_no} has {len(cells)} cells, expected {len(header)}"
            )
        try:
            rows.append(
                (
                    int(cells[col_index["node_id"]]),
                    int(cells[col_index["true_label"]]),
                    int(cells[col_index["predicted_label"]]),
                    [float(cells[i]) for i in embed_cols],
                )
            )
        except ValueError as exc:
            raise VizError(f"{path}: line {line_no}: {exc}") from exc
    if not rows:
        raise VizError(f"{path}: no data rows")
    return EmbeddingTable(
        node_id=np.array([r[0] for r in rows]),
        true_label=np.array([r[1] for r in rows]),
        predicted_label=np.array([r[2] for r in rows]),
        embeddings=np.array([r[3] for r in rows]),
    )


def project_2d(embeddings: np.ndarray, method: str = "pca", seed: int = 0) -> np.ndarray:
    """Deterministic 2D coordinates; 2-D input is passed through untouched."""
    if embeddings.shape[1] < 2:
        raise VizError("need at least 2 embedding dimensions to plot")
    if embeddings.shape[1] == 2:
        return embeddings.copy()
    if method == "pca":
        centered = embeddings - embeddings.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        axes = vt[:2]
        # fix the sign so identical inputs always project identically
        for k in range(2):
            lead = axes[k, np.argmax(np.abs(axes[k]))]
            if lead < 0:
                axes[k] = -axes[k]
        return centered @ axes.T
    if method == "random":
        rng = np.random.default_rng(seed)
        proj = rng.normal(size=(embeddings.shape[1], 2)) / np.sqrt(embeddings.shape[1])
        return embeddings @ proj
    raise VizError(f"unknown projection method {method!r}; choose pca or random")


def plot_embeddings(tsv_path, out_path=None, *, color_by: str = "true",
                    method: str = "pca", seed: int = 0):
    """Scatter of the 2D-projected embeddings, one color per community.

    Unlabeled nodes (true_label -1) get their own gray legend entry.
    Returns the matplotlib figure (also written to out_path when given).
    """
    if color_by not in ("true", "predicted"):
        raise VizError(f"color_by must be 'true' or 'predicted', got {color_by!r}")
    table = load_embedding_table(tsv_path)
    coords = project_2d(table.embeddings, method=method, seed=seed)
    labels = table.true_label if color_by == "true" else table.predicted_label

    fig, ax = plt.subplots(figsize=(6, 5))
    cmap = plt.get_cmap("tab10")
    for value in sorted(np.unique(labels).tolist()):
        mask = labels == value
        if value < 0:
            ax.scatter(coords[mask, 0], coords[mask, 1], s=14, c="0.7", label="unlabeled")
        else:
            ax.scatter(
                coords[mask, 0], coords[mask, 1], s=14,
                color=cmap(value % 10), label=f"community {value}",
            )
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    ax.set_title(f"communities by {color_by} label")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    if out_path is not None:
        fig.savefig(out_path, dpi=150)
    return fig


def load_metric_log(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise VizError(f"{path}: invalid JSON: {exc.msg}") from exc
    if "run" not in doc or "label_rate" not in doc.get("run", {}):
        raise VizError(f"{path}: metrics log lacks a run.label_rate entry")
    return doc


def plot_sweep(log_paths, criterion: str, out_path=None):
    """Criterion vs training label rate, one line per model variant."""
    if not log_paths:
        raise VizError("no metric logs given")
    docs = [load_metric_log(p) for p in log_paths]
    known = [k for k in docs[0] if k != "run"]
    if criterion not in known:
        raise VizError(
            f"unknown criterion {criterion!r}; valid names: {', '.join(known)}"
        )
    rates = {round(100.0 * doc["run"]["label_rate"], 10) for doc in docs}
    if len(rates) < 2:
        raise VizError("need logs for at least 2 distinct label rates")

    by_variant: dict[str, list[tuple[float, float]]] = {}
    for doc in docs:
        variant = doc["run"].get("variant", "model")
        rate = 100.0 * doc["run"]["label_rate"]
        by_variant.setdefault(variant, []).append((rate, float(doc[criterion])))

    fig, ax = plt.subplots(figsize=(6, 4))
    for variant, points in sorted(by_variant.items()):
        points.sort()
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.plot(xs, ys, marker="o", label=variant)
    ax.set_xticks(sorted(rates))
    ax.set_xlabel("training label rate (%)")
    ax.set_ylabel(f"{criterion} (%)")
    ax.set_title(f"effect of label rate on {criterion}")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    if out_path is not None:
        fig.savefig(out_path, dpi=150)
    return fig

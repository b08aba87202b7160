"""Offline figures for community-detection runs."""

from .plots import (
    EmbeddingTable,
    VizError,
    load_embedding_table,
    load_metric_log,
    plot_embeddings,
    plot_sweep,
    project_2d,
)

__all__ = [
    "EmbeddingTable",
    "VizError",
    "load_embedding_table",
    "load_metric_log",
    "plot_embeddings",
    "plot_sweep",
    "project_2d",
]

__version__ = "0.1.0"

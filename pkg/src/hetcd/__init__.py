"""Community detection on heterogeneous temporal graphs.

Pipeline: typed snapshots -> same-type adjacency assembly -> per-snapshot
graph convolution -> cross-time interaction folded over a window -> a
permutation-invariant cross-entropy objective, all on a small
reverse-mode autodiff engine.  A seeded block-model generator and a full
evaluation suite make runs reproducible end to end.
"""

from .datagen import GenConfig, generate_series, read_series, write_series
from .graphs import (
    EdgeRecord,
    HeteroSnapshot,
    NodeRecord,
    TemporalSeries,
    block_adjacency,
    collapse_adjacency,
    full_adjacency,
    normalize_adjacency,
)
from .metapaths import AnchorPairing, MetaPath, enumerate_instances, sample_pair_matrices, shared_anchors
from .training import Checkpoint, RunConfig, evaluate, export_embeddings, train

__all__ = [
    "AnchorPairing",
    "Checkpoint",
    "EdgeRecord",
    "GenConfig",
    "HeteroSnapshot",
    "MetaPath",
    "NodeRecord",
    "RunConfig",
    "TemporalSeries",
    "block_adjacency",
    "collapse_adjacency",
    "enumerate_instances",
    "evaluate",
    "export_embeddings",
    "full_adjacency",
    "generate_series",
    "normalize_adjacency",
    "read_series",
    "sample_pair_matrices",
    "shared_anchors",
    "train",
    "write_series",
]

__version__ = "0.1.0"

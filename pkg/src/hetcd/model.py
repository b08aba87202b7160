"""Forward pass over a window of snapshots.

Each snapshot is embedded by a two-layer graph convolution on its
normalized same-type adjacency (second layer linear).  The carried
embedding is then folded left-to-right: per step, aligned cross-time
endpoint pairs interact via outer products, are compressed through a
learned map and scatter-added onto the current embedding, which is then
rescaled by per-node attention.  The snapshot embedding of the final
step is added back as a residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .autodiff import Value
from .errors import GraphInvariantError, PairingError, ShapeError
from .graphs import HeteroSnapshot, full_adjacency, normalize_adjacency
from .metapaths import PAIR_CAP_DEFAULT, AnchorPairing, MetaPath, shared_anchors


@dataclass
class GcnParams:
    """Two-layer convolution weights: D x h and h x d."""

    w0: Value
    w1: Value

    def __post_init__(self):
        if self.w0.shape[1] != self.w1.shape[0]:
            raise ShapeError("GcnParams", self.w0.shape, self.w1.shape)


@dataclass
class CrossTimeParams:
    """Per-meta-path compression maps (d^2 x d) plus attention weights.

    attn_v is d_a x d and attn_w is 1 x d_a.
    """

    compress: tuple[Value, ...]
    attn_v: Value
    attn_w: Value

    def __post_init__(self):
        self.compress = tuple(self.compress)
        d = self.attn_v.shape[1]
        for w in self.compress:
            if w.shape != (d * d, d):
                raise ShapeError("CrossTimeParams.compress", w.shape, (d * d, d))
        if self.attn_w.shape != (1, self.attn_v.shape[0]):
            raise ShapeError("CrossTimeParams.attn", self.attn_w.shape, self.attn_v.shape)

    @property
    def embed_dim(self) -> int:
        return self.attn_v.shape[1]


@dataclass
class WindowState:
    """Intermediates of one window pass, for diagnostics and tests."""

    snapshot_embeddings: list[Value]
    carried: list[Value]
    output: Value


def gcn_forward(a_hat: np.ndarray, x: Value, params: GcnParams) -> Value:
    """Two-layer convolution A(ReLU(A X W0))W1 on a normalized adjacency."""
    a_hat = np.asarray(a_hat, dtype=np.float64)
    if a_hat.ndim != 2 or a_hat.shape[0] != a_hat.shape[1]:
        raise ShapeError("gcn_forward", a_hat.shape)
    if x.shape[0] != a_hat.shape[0]:
        raise ShapeError("gcn_forward", a_hat.shape, x.shape)
    a = Value(a_hat, op="adjacency")
    hidden = ad.relu(ad.matmul(ad.matmul(a, x), params.w0))
    return ad.matmul(ad.matmul(a, hidden), params.w1)


def interaction_tensor(z_prev: np.ndarray, x_cur: np.ndarray) -> np.ndarray:
    """P x d x d tensor of per-pair feature outer products."""
    z_prev = np.asarray(z_prev, dtype=np.float64)
    x_cur = np.asarray(x_cur, dtype=np.float64)
    if z_prev.shape != x_cur.shape:
        raise ShapeError("interaction_tensor", z_prev.shape, x_cur.shape)
    return np.einsum("pi,pj->pij", z_prev, x_cur)


@lru_cache(maxsize=8)
def _flatten_maps(d: int) -> tuple[np.ndarray, np.ndarray]:
    # left[i, i*d+j] = 1 repeats each column d times; right[j, i*d+j] = 1 tiles.
    left = np.zeros((d, d * d))
    right = np.zeros((d, d * d))
    for i in range(d):
        for j in range(d):
            left[i, i * d + j] = 1.0
            right[j, i * d + j] = 1.0
    return left, right


def interaction_features(z_prev: Value, x_cur: Value) -> Value:
    """Differentiable P x d^2 flattening of the pair outer products.

    Column i*d + j holds z_prev[:, i] * x_cur[:, j], matching
    interaction_tensor reshaped row-major.
    """
    if z_prev.shape != x_cur.shape:
        raise ShapeError("interaction_features", z_prev.shape, x_cur.shape)
    d = z_prev.shape[1]
    left, right = _flatten_maps(d)
    repeated = ad.matmul(z_prev, Value(left, op="repeat_map"))
    tiled = ad.matmul(x_cur, Value(right, op="tile_map"))
    return ad.elementwise_mul(repeated, tiled)


def compress_and_inject(
    h_flat: Value, pairing: AnchorPairing, w_compress: Value, z_cur: Value
) -> Value:
    """Compress each pair's interaction row to d values and scatter-add
    the sigmoid onto the pair's current endpoint row."""
    if len(pairing) == 0:
        return z_cur
    if h_flat.shape[0] != len(pairing):
        raise ShapeError("compress_and_inject", h_flat.shape, (len(pairing), h_flat.shape[1]))
    if int(pairing.cur_rows.max()) >= z_cur.shape[0]:
        raise PairingError(
            f"pairing targets row {int(pairing.cur_rows.max())} "
            f"but the embedding has {z_cur.shape[0]} rows"
        )
    injection = ad.sigmoid(ad.matmul(h_flat, w_compress))
    return ad.scatter_rows_add(z_cur, injection, pairing.cur_rows)


def node_attention(z: Value, attn_v: Value, attn_w: Value, *, rescale: bool = False) -> Value:
    """Per-node softmax weights w tanh(V z_i^T), as an N x 1 column.

    The softmax runs over all N nodes, so weights sum to 1; with
    `rescale` they are multiplied by N to undo the 1/N shrinkage.
    """
    n = z.shape[0]
    if n < 1:
        raise ShapeError("node_attention", z.shape)
    scores = ad.matmul(attn_w, ad.tanh(ad.matmul(attn_v, ad.transpose(z))))
    weights = ad.transpose(ad.softmax_over_rows(scores))
    if rescale:
        weights = ad.scale(weights, float(n))
    return weights


def apply_attention(z: Value, weights: Value) -> Value:
    """Row i of the output is weights[i] times row i of z."""
    return ad.diag_row_scale(weights, z)


def cross_time_step(
    prev_z: Value,
    cur_x: Value,
    prev_snap: HeteroSnapshot,
    cur_snap: HeteroSnapshot,
    metapaths: list[MetaPath],
    params: CrossTimeParams,
    *,
    pairings: list[AnchorPairing] | None = None,
    keep_self_pairs: bool = False,
    pair_cap: int = PAIR_CAP_DEFAULT,
    rng: np.random.Generator | None = None,
    attention_rescale: bool = False,
) -> Value:
    """One fold step: inject cross-time interactions per meta-path, then attend."""
    if len(params.compress) != len(metapaths):
        raise ShapeError("cross_time_step", (len(params.compress),), (len(metapaths),))
    if pairings is None:
        pairings = [
            shared_anchors(
                prev_snap, cur_snap, mp,
                keep_self_pairs=keep_self_pairs, pair_cap=pair_cap, rng=rng,
            )
            for mp in metapaths
        ]
    z = cur_x
    for pairing, w_compress in zip(pairings, params.compress):
        if len(pairing) == 0:
            continue
        zp = ad.row_gather(prev_z, pairing.prev_rows)
        xc = ad.row_gather(cur_x, pairing.cur_rows)
        h_flat = interaction_features(zp, xc)
        z = compress_and_inject(h_flat, pairing, w_compress, z)
    weights = node_attention(z, params.attn_v, params.attn_w, rescale=attention_rescale)
    return apply_attention(z, weights)


def build_window_pairings(
    snapshots: tuple[HeteroSnapshot, ...],
    metapaths: list[MetaPath],
    *,
    keep_self_pairs: bool = False,
    pair_cap: int = PAIR_CAP_DEFAULT,
    rng: np.random.Generator | None = None,
) -> list[list[AnchorPairing]]:
    """Pairings for each consecutive snapshot pair, one list per step."""
    return [
        [
            shared_anchors(
                prev, cur, mp,
                keep_self_pairs=keep_self_pairs, pair_cap=pair_cap, rng=rng,
            )
            for mp in metapaths
        ]
        for prev, cur in zip(snapshots, snapshots[1:])
    ]


def normalized_adjacencies(snapshots) -> list[np.ndarray]:
    """Normalized same-type adjacency per snapshot (precompute once)."""
    return [normalize_adjacency(full_adjacency(s)) for s in snapshots]


def window_forward_state(
    snapshots: tuple[HeteroSnapshot, ...],
    metapaths: list[MetaPath],
    gcn_params: GcnParams,
    ct_params: CrossTimeParams,
    *,
    a_hats: list[np.ndarray] | None = None,
    pairings_per_step: list[list[AnchorPairing]] | None = None,
    keep_self_pairs: bool = False,
    pair_cap: int = PAIR_CAP_DEFAULT,
    rng: np.random.Generator | None = None,
    attention_rescale: bool = False,
) -> WindowState:
    """Full window pass returning all intermediates.

    Folds the carried embedding across consecutive snapshots starting
    from the first snapshot's convolution output, and adds the final
    snapshot's convolution output as a residual at the last step only.
    """
    snapshots = tuple(snapshots)
    if len(snapshots) < 2:
        raise GraphInvariantError(f"window needs at least 2 snapshots, got {len(snapshots)}")
    if a_hats is None:
        a_hats = normalized_adjacencies(snapshots)
    embeds = [
        gcn_forward(a_hat, Value(s.feature_matrix(), op="features"), gcn_params)
        for a_hat, s in zip(a_hats, snapshots)
    ]
    carried = [embeds[0]]
    for step, (prev_snap, cur_snap) in enumerate(zip(snapshots, snapshots[1:])):
        pairings = pairings_per_step[step] if pairings_per_step is not None else None
        carried.append(
            cross_time_step(
                carried[-1], embeds[step + 1], prev_snap, cur_snap,
                metapaths, ct_params,
                pairings=pairings, keep_self_pairs=keep_self_pairs,
                pair_cap=pair_cap, rng=rng, attention_rescale=attention_rescale,
            )
        )
    output = ad.add(carried[-1], embeds[-1])
    return WindowState(snapshot_embeddings=embeds, carried=carried, output=output)


def window_forward(snapshots, metapaths, gcn_params, ct_params, **kwargs) -> Value:
    """Final-snapshot embedding of a window pass (see window_forward_state)."""
    return window_forward_state(snapshots, metapaths, gcn_params, ct_params, **kwargs).output


def gcn_only_forward(snapshot: HeteroSnapshot, gcn_params: GcnParams,
                     a_hat: np.ndarray | None = None) -> Value:
    """Ablation path: embed the final snapshot alone, no cross-time fold."""
    if a_hat is None:
        a_hat = normalize_adjacency(full_adjacency(snapshot))
    return gcn_forward(a_hat, Value(snapshot.feature_matrix(), op="features"), gcn_params)

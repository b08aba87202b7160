"""Meta-path instances within a snapshot and anchor pairing across snapshots.

A length-3 meta-path (terminal type, middle type, terminal type with two
edge types) relates nodes of the terminal type through a shared middle
node.  Middle-type nodes present in two consecutive snapshots act as
anchors tying the snapshots together: per anchor, its endpoints in the
earlier snapshot are crossed with its endpoints in the later one, and
those aligned endpoint pairs drive the cross-time feature interaction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GraphInvariantError, PairingError, UnknownTypeTagError
from .graphs import HeteroSnapshot

PAIR_CAP_DEFAULT = 32


@dataclass(frozen=True)
class MetaPath:
    """Alternating node-type / edge-type sequence, e.g. (1,0,1) via (0,0)."""

    node_types: tuple[int, ...]
    edge_types: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "node_types", tuple(int(t) for t in self.node_types))
        object.__setattr__(self, "edge_types", tuple(int(t) for t in self.edge_types))
        if len(self.node_types) < 2:
            raise GraphInvariantError("meta-path needs at least two node types")
        if len(self.edge_types) != len(self.node_types) - 1:
            raise GraphInvariantError(
                f"meta-path with {len(self.node_types)} node types needs "
                f"{len(self.node_types) - 1} edge types, got {len(self.edge_types)}"
            )

    def __str__(self) -> str:
        return ",".join(map(str, self.node_types)) + ":" + ",".join(map(str, self.edge_types))

    @staticmethod
    def parse(text: str) -> "MetaPath":
        """Parse 'n0,n1,n2:e0,e1' into a MetaPath."""
        try:
            node_part, edge_part = text.split(":")
            return MetaPath(
                node_types=tuple(int(x) for x in node_part.split(",")),
                edge_types=tuple(int(x) for x in edge_part.split(",")),
            )
        except (ValueError, TypeError) as exc:
            raise GraphInvariantError(f"cannot parse meta-path {text!r}: {exc}") from exc


@dataclass(frozen=True)
class AnchorPairing:
    """Aligned endpoint pairs produced by anchors shared across two snapshots.

    pairs[p] = (prev_endpoint_id, cur_endpoint_id, anchor_id); prev_rows
    and cur_rows hold the endpoints' row indices in their snapshots.
    """

    anchor_ids: tuple[int, ...]
    pairs: tuple[tuple[int, int, int], ...]
    prev_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    cur_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        prev_rows = np.asarray(self.prev_rows, dtype=np.int64)
        cur_rows = np.asarray(self.cur_rows, dtype=np.int64)
        if len(prev_rows) != len(self.pairs) or len(cur_rows) != len(self.pairs):
            raise PairingError("row index arrays must match the number of pairs")
        prev_rows.flags.writeable = False
        cur_rows.flags.writeable = False
        object.__setattr__(self, "prev_rows", prev_rows)
        object.__setattr__(self, "cur_rows", cur_rows)

    def __len__(self) -> int:
        return len(self.pairs)


def _check_three_step(snapshot: HeteroSnapshot, mp: MetaPath) -> None:
    if len(mp.node_types) != 3:
        raise GraphInvariantError("only length-3 meta-paths are supported")
    for t in mp.node_types:
        if not 0 <= t < snapshot.node_type_count:
            raise UnknownTypeTagError("node_type", t, snapshot.node_type_count)
    for t in mp.edge_types:
        if not 0 <= t < snapshot.edge_type_count:
            raise UnknownTypeTagError("edge_type", t, snapshot.edge_type_count)


def _endpoints(snapshot: HeteroSnapshot, anchor_id: int, terminal_type: int, edge_type: int) -> list[int]:
    by_id = snapshot.node_by_id
    return [
        v for v in snapshot.neighbors(anchor_id, edge_type)
        if by_id[v].node_type == terminal_type
    ]


def enumerate_instances(snapshot: HeteroSnapshot, mp: MetaPath) -> list[tuple[int, int, int]]:
    """All (u, anchor, v) triples realizing the meta-path in one snapshot.

    A plain double loop over the anchor's two endpoint sets, so u == v
    degenerate triples are included; cross-time pairing filters those
    separately.
    """
    _check_three_step(snapshot, mp)
    first, middle, last = mp.node_types
    e1, e2 = mp.edge_types
    out: list[tuple[int, int, int]] = []
    for anchor in snapshot.nodes_of_type(middle):
        us = _endpoints(snapshot, anchor.id, first, e1)
        vs = _endpoints(snapshot, anchor.id, last, e2)
        out.extend((u, anchor.id, v) for u in us for v in vs)
    return out


def shared_anchors(
    prev: HeteroSnapshot,
    cur: HeteroSnapshot,
    mp: MetaPath,
    *,
    keep_self_pairs: bool = False,
    pair_cap: int = PAIR_CAP_DEFAULT,
    rng: np.random.Generator | None = None,
) -> AnchorPairing:
    """Pair up meta-path endpoints across two snapshots through shared anchors.

    Anchors are middle-type ids present in both snapshots.  Per anchor the
    earlier snapshot's endpoints are crossed with the later snapshot's
    endpoints, sorted by (anchor, prev endpoint, cur endpoint); when the
    cross product exceeds `pair_cap` a uniform subset of that size is
    drawn with `rng` (a fixed-seed generator when none is passed, so the
    result stays deterministic).  Self-pairs (the same node id on both
    sides) are dropped unless `keep_self_pairs`.
    """
    _check_three_step(prev, mp)
    _check_three_step(cur, mp)
    if cur.time_index - prev.time_index not in (0, 1):
        raise GraphInvariantError(
            f"snapshots must be consecutive (or identical for self-comparison); "
            f"got t={prev.time_index} and t={cur.time_index}"
        )
    first, middle, last = mp.node_types
    e1, e2 = mp.edge_types

    prev_middle = {n.id for n in prev.nodes_of_type(middle)}
    cur_middle = {n.id for n in cur.nodes_of_type(middle)}
    anchors = sorted(prev_middle & cur_middle)

    pairs: list[tuple[int, int, int]] = []
    for anchor_id in anchors:
        us = _endpoints(prev, anchor_id, first, e1)
        vs = _endpoints(cur, anchor_id, last, e2)
        candidates = sorted(
            (u, v, anchor_id)
            for u in us
            for v in vs
            if keep_self_pairs or u != v
        )
        if len(candidates) > pair_cap:
            if rng is None:
                rng = np.random.default_rng(0)
            picked = rng.choice(len(candidates), size=pair_cap, replace=False)
            candidates = [candidates[i] for i in sorted(picked.tolist())]
        pairs.extend(candidates)

    prev_rows = np.array([prev.id_to_row[u] for u, _, _ in pairs], dtype=np.int64)
    cur_rows = np.array([cur.id_to_row[v] for _, v, _ in pairs], dtype=np.int64)
    return AnchorPairing(
        anchor_ids=tuple(anchors),
        pairs=tuple(pairs),
        prev_rows=prev_rows,
        cur_rows=cur_rows,
    )


def sample_pair_matrices(
    z_prev: np.ndarray, x_cur: np.ndarray, pairing: AnchorPairing
) -> tuple[np.ndarray, np.ndarray]:
    """Row-gather the two aligned P x d matrices a pairing selects.

    Row p of the first output is the earlier-snapshot embedding of pair
    p's prev endpoint; row p of the second is the later-snapshot
    embedding of its cur endpoint.
    """
    z_prev = np.asarray(z_prev, dtype=np.float64)
    x_cur = np.asarray(x_cur, dtype=np.float64)
    if len(pairing) == 0:
        d = z_prev.shape[1] if z_prev.ndim == 2 else 0
        return np.zeros((0, d)), np.zeros((0, d))
    if pairing.prev_rows.max(initial=-1) >= z_prev.shape[0]:
        raise PairingError(
            f"pairing references row {int(pairing.prev_rows.max())} "
            f"but the earlier matrix has {z_prev.shape[0]} rows"
        )
    if pairing.cur_rows.max(initial=-1) >= x_cur.shape[0]:
        raise PairingError(
            f"pairing references row {int(pairing.cur_rows.max())} "
            f"but the later matrix has {x_cur.shape[0]} rows"
        )
    return z_prev[pairing.prev_rows], x_cur[pairing.cur_rows]

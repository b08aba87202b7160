"""Typed heterogeneous graph snapshots and homogeneous adjacency construction.

A snapshot holds typed nodes (with one dense feature row each and an
optional community label) and typed undirected edges.  Same-type
connectivity is derived, per edge type, from direct same-type edges and
length-2 paths through a node of any other type; summing those blocks
over edge types yields the homogeneous graph a convolution layer
consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GraphInvariantError, ShapeError, UnknownTypeTagError


@dataclass(frozen=True)
class NodeRecord:
    """One node: stable id, type tag, feature row, optional community label."""

    id: int
    node_type: int
    features: np.ndarray
    label: int | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1:
            raise GraphInvariantError(f"node {self.id}: features must be a 1-D vector")
        if not np.all(np.isfinite(feats)):
            raise GraphInvariantError(f"node {self.id}: features must be finite")
        feats.flags.writeable = False
        object.__setattr__(self, "features", feats)
        if self.node_type < 0:
            raise GraphInvariantError(f"node {self.id}: negative node_type")
        if self.label is not None and self.label < 0:
            raise GraphInvariantError(f"node {self.id}: negative label")


@dataclass(frozen=True)
class EdgeRecord:
    """One undirected typed edge, stored once with src < dst."""

    src: int
    dst: int
    edge_type: int

    def __post_init__(self):
        if self.src == self.dst:
            raise GraphInvariantError(f"self-loop on node {self.src} rejected")
        if self.edge_type < 0:
            raise GraphInvariantError("negative edge_type")
        if self.src > self.dst:
            src, dst = self.dst, self.src
            object.__setattr__(self, "src", src)
            object.__setattr__(self, "dst", dst)


class HeteroSnapshot:
    """The heterogeneous graph observed at one time step.

    Nodes keep their given order; matrices produced from a snapshot are
    indexed by that order (or by the order of nodes within one type).
    Instances are immutable after construction and safe to share.
    """

    def __init__(
        self,
        time_index: int,
        nodes: list[NodeRecord],
        edges: list[EdgeRecord],
        node_type_count: int,
        edge_type_count: int,
    ):
        if time_index < 1:
            raise GraphInvariantError(f"time_index must be >= 1, got {time_index}")
        if node_type_count + edge_type_count <= 2:
            raise GraphInvariantError(
                "need node_type_count + edge_type_count > 2 for a heterogeneous graph"
            )
        self.time_index = time_index
        self.nodes = tuple(nodes)
        self.node_type_count = node_type_count
        self.edge_type_count = edge_type_count

        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise GraphInvariantError(f"duplicate node ids in snapshot t={time_index}")
        dims = {n.features.shape[0] for n in self.nodes}
        if len(dims) > 1:
            raise GraphInvariantError(
                f"inconsistent feature dimensions {sorted(dims)} in snapshot t={time_index}"
            )
        for n in self.nodes:
            if n.node_type >= node_type_count:
                raise UnknownTypeTagError("node_type", n.node_type, node_type_count)

        id_set = set(ids)
        seen: set[tuple[int, int, int]] = set()
        kept: list[EdgeRecord] = []
        for e in edges:
            if e.edge_type >= edge_type_count:
                raise UnknownTypeTagError("edge_type", e.edge_type, edge_type_count)
            if e.src not in id_set or e.dst not in id_set:
                raise GraphInvariantError(
                    f"edge ({e.src},{e.dst}) references a node missing from snapshot t={time_index}"
                )
            key = (e.src, e.dst, e.edge_type)
            if key in seen:
                continue
            seen.add(key)
            kept.append(e)
        self.edges = tuple(kept)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def feature_dim(self) -> int:
        return self.nodes[0].features.shape[0] if self.nodes else 0

    @cached_property
    def id_to_row(self) -> dict[int, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    @cached_property
    def node_by_id(self) -> dict[int, NodeRecord]:
        return {n.id: n for n in self.nodes}

    def nodes_of_type(self, node_type: int) -> tuple[NodeRecord, ...]:
        if not 0 <= node_type < self.node_type_count:
            raise UnknownTypeTagError("node_type", node_type, self.node_type_count)
        return self._nodes_by_type[node_type]

    @cached_property
    def _nodes_by_type(self) -> tuple[tuple[NodeRecord, ...], ...]:
        buckets: list[list[NodeRecord]] = [[] for _ in range(self.node_type_count)]
        for n in self.nodes:
            buckets[n.node_type].append(n)
        return tuple(tuple(b) for b in buckets)

    @cached_property
    def _adjacency_by_edge_type(self) -> tuple[dict[int, tuple[int, ...]], ...]:
        builders: list[dict[int, list[int]]] = [{} for _ in range(self.edge_type_count)]
        for e in self.edges:
            builders[e.edge_type].setdefault(e.src, []).append(e.dst)
            builders[e.edge_type].setdefault(e.dst, []).append(e.src)
        return tuple(
            {u: tuple(sorted(vs)) for u, vs in b.items()} for b in builders
        )

    def neighbors(self, node_id: int, edge_type: int) -> tuple[int, ...]:
        """Ids adjacent to `node_id` via edges of `edge_type`, sorted."""
        if not 0 <= edge_type < self.edge_type_count:
            raise UnknownTypeTagError("edge_type", edge_type, self.edge_type_count)
        if node_id not in self.id_to_row:
            raise GraphInvariantError(f"node id {node_id} not in snapshot t={self.time_index}")
        return self._adjacency_by_edge_type[edge_type].get(node_id, ())

    def feature_matrix(self) -> np.ndarray:
        """N x D feature matrix in node order."""
        if not self.nodes:
            return np.zeros((0, 0))
        return np.vstack([n.features for n in self.nodes])

    def label_vector(self) -> np.ndarray:
        """N-vector of labels in node order; -1 marks unlabeled nodes."""
        return np.array(
            [n.label if n.label is not None else -1 for n in self.nodes], dtype=np.int64
        )

    def labeled_rows(self) -> np.ndarray:
        """Row indices of nodes that carry a community label."""
        return np.array([i for i, n in enumerate(self.nodes) if n.label is not None], dtype=np.int64)


@dataclass(frozen=True)
class TemporalSeries:
    """Ordered snapshots with strictly increasing time and stable node identities."""

    snapshots: tuple[HeteroSnapshot, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        snaps = self.snapshots
        for prev, cur in zip(snaps, snaps[1:]):
            if cur.time_index <= prev.time_index:
                raise GraphInvariantError(
                    f"time indices must increase: {prev.time_index} then {cur.time_index}"
                )
        dims = {s.feature_dim for s in snaps if s.num_nodes > 0}
        if len(dims) > 1:
            raise GraphInvariantError(f"feature dimension varies across snapshots: {sorted(dims)}")
        # A shared id must denote the same entity: its type may never change.
        types_seen: dict[int, int] = {}
        for s in snaps:
            for n in s.nodes:
                prev_type = types_seen.setdefault(n.id, n.node_type)
                if prev_type != n.node_type:
                    raise GraphInvariantError(
                        f"node id {n.id} changes type across snapshots ({prev_type} -> {n.node_type})"
                    )

    def __len__(self) -> int:
        return len(self.snapshots)

    def window(self, length: int) -> tuple[HeteroSnapshot, ...]:
        """The last `length` snapshots."""
        if length > len(self.snapshots):
            raise GraphInvariantError(
                f"window of {length} requested but series has {len(self.snapshots)} snapshots"
            )
        return self.snapshots[-length:]


def block_adjacency(snapshot: HeteroSnapshot, node_type: int, edge_type: int) -> np.ndarray:
    """0/1 adjacency over nodes of one type, derived from one edge type.

    Two distinct same-type nodes are adjacent iff an edge of `edge_type`
    connects them directly, or a length-2 path of such edges connects
    them through a node of any other type.  Rows/columns follow the
    order of the type's nodes within the snapshot.
    """
    members = snapshot.nodes_of_type(node_type)
    if not 0 <= edge_type < snapshot.edge_type_count:
        raise UnknownTypeTagError("edge_type", edge_type, snapshot.edge_type_count)
    local = {n.id: i for i, n in enumerate(members)}
    k = len(members)
    out = np.zeros((k, k))

    for e in snapshot.edges:
        if e.edge_type == edge_type and e.src in local and e.dst in local:
            out[local[e.src], local[e.dst]] = 1.0
            out[local[e.dst], local[e.src]] = 1.0

    by_id = snapshot.node_by_id
    for mid in snapshot.nodes:
        if mid.node_type == node_type:
            continue
        ends = [local[v] for v in snapshot.neighbors(mid.id, edge_type) if by_id[v].node_type == node_type]
        for i, u in enumerate(ends):
            for v in ends[i + 1:]:
                out[u, v] = 1.0
                out[v, u] = 1.0
    return out


def collapse_adjacency(snapshot: HeteroSnapshot, target_type: int) -> np.ndarray:
    """Entrywise sum of `block_adjacency` over every edge type.

    Entries count how many edge types connect a same-type pair, so
    values may exceed 1.
    """
    members = snapshot.nodes_of_type(target_type)
    if not members:
        raise GraphInvariantError(f"no nodes of type {target_type} to collapse")
    total = np.zeros((len(members), len(members)))
    for etype in range(snapshot.edge_type_count):
        total += block_adjacency(snapshot, target_type, etype)
    return total


def full_adjacency(snapshot: HeteroSnapshot) -> np.ndarray:
    """N x N same-type connectivity over all nodes, in snapshot node order.

    Assembles each node type's collapsed block into global positions;
    cross-type entries stay zero (cross-type structure is already folded
    into the blocks via the length-2 path rule).
    """
    n = snapshot.num_nodes
    out = np.zeros((n, n))
    rows = snapshot.id_to_row
    for node_type in range(snapshot.node_type_count):
        members = snapshot.nodes_of_type(node_type)
        if not members:
            continue
        block = collapse_adjacency(snapshot, node_type)
        pos = np.array([rows[m.id] for m in members])
        out[np.ix_(pos, pos)] = block
    return out


def normalize_adjacency(a: np.ndarray) -> np.ndarray:
    """Self-loop-augmented symmetric normalization of a square adjacency.

    Returns d^(-1/2) (A + I) d^(-1/2) where d holds the row sums of
    A + I, so every node's scaling uses 1 + its degree.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("normalize_adjacency", a.shape)
    if not np.array_equal(a, a.T):
        raise GraphInvariantError("normalize_adjacency: input must be symmetric")
    with_loops = a + np.eye(a.shape[0])
    inv_sqrt = 1.0 / np.sqrt(with_loops.sum(axis=1))
    return inv_sqrt[:, None] * with_loops * inv_sqrt[None, :]

"""Synthetic temporal heterogeneous benchmark graphs with planted communities.

A stochastic block model with typed nodes: every node carries a hidden
community, features are the community mean plus Gaussian noise, and
edges between related node types appear with probability p_in inside a
community and p_out across communities.  Between steps a fraction of
nodes is replaced by fresh identities (churn) and a fraction of the
survivors switches community (migration).  Output is fully determined
by the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SeriesFormatError
from .graphs import EdgeRecord, HeteroSnapshot, NodeRecord, TemporalSeries


@dataclass(frozen=True)
class GenConfig:
    node_type_count: int = 3
    edge_type_count: int = 3
    communities: int = 3
    nodes_per_type: tuple[int, ...] = (120, 60, 24)
    time_steps: int = 3
    p_in: float = 0.1
    p_out: float = 0.01
    churn_rate: float = 0.1
    migration_rate: float = 0.05
    feature_dim: int = 8
    feature_noise: float = 0.5
    labeled_type: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nodes_per_type", tuple(int(n) for n in self.nodes_per_type))
        if self.node_type_count < 1:
            raise ConfigError("node_type_count", "must be >= 1")
        if self.edge_type_count < 1:
            raise ConfigError("edge_type_count", "must be >= 1")
        if self.node_type_count + self.edge_type_count <= 2:
            raise ConfigError("edge_type_count", "need node_type_count + edge_type_count > 2")
        if self.communities < 1:
            raise ConfigError("communities", "must be >= 1")
        if len(self.nodes_per_type) != self.node_type_count:
            raise ConfigError("nodes_per_type", f"need {self.node_type_count} entries")
        if any(n < 1 for n in self.nodes_per_type):
            raise ConfigError("nodes_per_type", "every type needs >= 1 node")
        if self.time_steps < 1:
            raise ConfigError("time_steps", "must be >= 1")
        if not 0.0 <= self.p_out <= 1.0:
            raise ConfigError("p_out", "must be in [0, 1]")
        if not 0.0 <= self.p_in <= 1.0:
            raise ConfigError("p_in", "must be in [0, 1]")
        if self.p_in <= self.p_out:
            raise ConfigError("p_in", "must exceed p_out")
        if not 0.0 <= self.churn_rate < 1.0:
            raise ConfigError("churn_rate", "must be in [0, 1)")
        if not 0.0 <= self.migration_rate < 1.0:
            raise ConfigError("migration_rate", "must be in [0, 1)")
        if self.feature_dim < 1:
            raise ConfigError("feature_dim", "must be >= 1")
        if self.feature_noise < 0:
            raise ConfigError("feature_noise", "must be >= 0")
        if not 0 <= self.labeled_type < self.node_type_count:
            raise ConfigError("labeled_type", "must name an existing node type")


def relation_pairs(node_type_count: int, edge_type_count: int) -> tuple[tuple[int, int], ...]:
    """Node-type pair each edge type connects: cross-type pairs in
    lexicographic order, cycled to the number of edge types."""
    pairs = [
        (a, b)
        for a in range(node_type_count)
        for b in range(a + 1, node_type_count)
    ]
    if not pairs:
        pairs = [(0, 0)]
    return tuple(pairs[j % len(pairs)] for j in range(edge_type_count))


def generate_series(cfg: GenConfig) -> TemporalSeries:
    """Draw a full temporal series; identical seeds give identical output."""
    rng = np.random.default_rng(cfg.seed)
    means = rng.normal(size=(cfg.communities, cfg.feature_dim))
    relations = relation_pairs(cfg.node_type_count, cfg.edge_type_count)

    # Node roster as parallel lists; churn replaces entries in place so
    # surviving nodes keep their position (and therefore their row).
    ids: list[int] = []
    types: list[int] = []
    comms: list[int] = []
    next_id = 0
    for node_type, count in enumerate(cfg.nodes_per_type):
        for _ in range(count):
            ids.append(next_id)
            types.append(node_type)
            comms.append(int(rng.integers(cfg.communities)))
            next_id += 1

    snapshots = []
    for t in range(1, cfg.time_steps + 1):
        n = len(ids)
        noise = rng.normal(scale=cfg.feature_noise, size=(n, cfg.feature_dim)) \
            if cfg.feature_noise > 0 else np.zeros((n, cfg.feature_dim))
        features = means[np.array(comms)] + noise

        nodes = [
            NodeRecord(
                id=ids[i],
                node_type=types[i],
                features=features[i],
                label=comms[i] if types[i] == cfg.labeled_type else None,
            )
            for i in range(n)
        ]

        positions_by_type = [
            [i for i in range(n) if types[i] == node_type]
            for node_type in range(cfg.node_type_count)
        ]
        comm_arr = np.array(comms)
        edges: list[EdgeRecord] = []
        for etype, (ta, tb) in enumerate(relations):
            rows = positions_by_type[ta]
            cols = positions_by_type[tb]
            same = comm_arr[rows][:, None] == comm_arr[cols][None, :]
            prob = np.where(same, cfg.p_in, cfg.p_out)
            draw = rng.random((len(rows), len(cols))) < prob
            if ta == tb:
                draw = np.triu(draw, k=1)
            for ui, vi in zip(*np.nonzero(draw)):
                u, v = ids[rows[ui]], ids[cols[vi]]
                if u != v:
                    edges.append(EdgeRecord(src=u, dst=v, edge_type=etype))

        snapshots.append(
            HeteroSnapshot(
                time_index=t,
                nodes=nodes,
                edges=edges,
                node_type_count=cfg.node_type_count,
                edge_type_count=cfg.edge_type_count,
            )
        )

        if t == cfg.time_steps:
            break

        # Churn: replace round(churn_rate * N) positions with fresh nodes.
        replaced = int(round(cfg.churn_rate * n))
        churn_pos = set(rng.choice(n, size=replaced, replace=False).tolist()) if replaced else set()
        for pos in sorted(churn_pos):
            ids[pos] = next_id
            next_id += 1
            comms[pos] = int(rng.integers(cfg.communities))
        # Migration: a fraction of survivors moves to a different community.
        survivors = [i for i in range(n) if i not in churn_pos]
        migrating = int(round(cfg.migration_rate * len(survivors)))
        if migrating and cfg.communities > 1:
            chosen = rng.choice(len(survivors), size=migrating, replace=False)
            for si in sorted(chosen.tolist()):
                pos = survivors[si]
                shift = int(rng.integers(1, cfg.communities))
                comms[pos] = (comms[pos] + shift) % cfg.communities

    return TemporalSeries(snapshots=tuple(snapshots))


def _snapshot_to_doc(snap: HeteroSnapshot) -> dict:
    return {
        "t": snap.time_index,
        "nodes": [
            {
                "id": n.id,
                "type": n.node_type,
                "features": n.features.tolist(),
                "label": n.label,
            }
            for n in snap.nodes
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "etype": e.edge_type} for e in snap.edges
        ],
    }


def write_series(series: TemporalSeries, path) -> None:
    """Write one JSON document per snapshot, newline-delimited.

    Floats serialize via their shortest round-trip representation, so
    read_series(write_series(s)) reproduces s exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for snap in series.snapshots:
            fh.write(json.dumps(_snapshot_to_doc(snap)))
            fh.write("\n")


def _parse_node(obj: dict, line: int) -> NodeRecord:
    for key in ("id", "type", "features"):
        if key not in obj:
            raise SeriesFormatError("node record missing field", line=line, field=key)
    label = obj.get("label")
    try:
        return NodeRecord(
            id=int(obj["id"]),
            node_type=int(obj["type"]),
            features=np.asarray(obj["features"], dtype=np.float64),
            label=None if label is None else int(label),
        )
    except (TypeError, ValueError) as exc:
        raise SeriesFormatError(f"bad node record: {exc}", line=line, field="nodes") from exc


def _parse_edge(obj: dict, line: int) -> EdgeRecord:
    for key in ("src", "dst", "etype"):
        if key not in obj:
            raise SeriesFormatError("edge record missing field", line=line, field=key)
    try:
        return EdgeRecord(src=int(obj["src"]), dst=int(obj["dst"]), edge_type=int(obj["etype"]))
    except (TypeError, ValueError) as exc:
        raise SeriesFormatError(f"bad edge record: {exc}", line=line, field="edges") from exc


def read_series(path) -> TemporalSeries:
    """Parse a series file written by write_series.

    Type-tag counts are not stored in the file; they are inferred as
    max tag + 1 over the whole file so every snapshot shares them.
    """
    raw: list[tuple[int, dict]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SeriesFormatError(f"invalid JSON: {exc.msg}", line=line_no) from exc
            if not isinstance(doc, dict):
                raise SeriesFormatError("snapshot document must be an object", line=line_no)
            raw.append((line_no, doc))

    parsed = []
    max_node_type = -1
    max_edge_type = -1
    for line_no, doc in raw:
        if "t" not in doc:
            raise SeriesFormatError("snapshot document missing field", line=line_no, field="t")
        nodes = [_parse_node(o, line_no) for o in doc.get("nodes", [])]
        edges = [_parse_edge(o, line_no) for o in doc.get("edges", [])]
        parsed.append((line_no, int(doc["t"]), nodes, edges))
        max_node_type = max([max_node_type] + [n.node_type for n in nodes])
        max_edge_type = max([max_edge_type] + [e.edge_type for e in edges])

    node_type_count = max(max_node_type + 1, 1)
    edge_type_count = max(max_edge_type + 1, 2)
    if node_type_count + edge_type_count <= 2:
        edge_type_count = 3 - node_type_count

    snapshots = []
    for line_no, t, nodes, edges in parsed:
        try:
            snapshots.append(
                HeteroSnapshot(
                    time_index=t,
                    nodes=nodes,
                    edges=edges,
                    node_type_count=node_type_count,
                    edge_type_count=edge_type_count,
                )
            )
        except Exception as exc:
            raise SeriesFormatError(f"invalid snapshot: {exc}", line=line_no) from exc
    return TemporalSeries(snapshots=tuple(snapshots))

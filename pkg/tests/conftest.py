import numpy as np
import pytest

from hetcd.datagen import GenConfig, generate_series
from hetcd.graphs import EdgeRecord, HeteroSnapshot, NodeRecord


def make_snapshot(time_index, node_specs, edge_specs, node_type_count=3, edge_type_count=3, dim=2):
    """Small hand-built snapshot.

    node_specs: (id, type) or (id, type, label) tuples; features default
    to [id, id + 0.5] padded to `dim`.
    """
    nodes = []
    for spec in node_specs:
        nid, ntype, *rest = spec
        label = rest[0] if rest else None
        feats = np.zeros(dim)
        feats[0] = nid
        if dim > 1:
            feats[1] = nid + 0.5
        nodes.append(NodeRecord(id=nid, node_type=ntype, features=feats, label=label))
    edges = [EdgeRecord(src=s, dst=d, edge_type=t) for s, d, t in edge_specs]
    return HeteroSnapshot(
        time_index=time_index,
        nodes=nodes,
        edges=edges,
        node_type_count=node_type_count,
        edge_type_count=edge_type_count,
    )


def random_snapshot(rng, time_index=1, max_nodes_per_type=5, node_type_count=3,
                    edge_type_count=3, edge_prob=0.3, dim=3, id_offset=0):
    """Random valid snapshot for property tests."""
    nodes = []
    nid = id_offset
    for ntype in range(node_type_count):
        for _ in range(int(rng.integers(1, max_nodes_per_type + 1))):
            nodes.append(
                NodeRecord(id=nid, node_type=ntype, features=rng.normal(size=dim),
                           label=int(rng.integers(3)) if ntype == 0 else None)
            )
            nid += 1
    edges = []
    for i, u in enumerate(nodes):
        for v in nodes[i + 1:]:
            for etype in range(edge_type_count):
                if rng.random() < edge_prob:
                    edges.append(EdgeRecord(src=u.id, dst=v.id, edge_type=etype))
    return HeteroSnapshot(
        time_index=time_index,
        nodes=nodes,
        edges=edges,
        node_type_count=node_type_count,
        edge_type_count=edge_type_count,
    )


@pytest.fixture(scope="session")
def seed7_series():
    cfg = GenConfig(
        nodes_per_type=(12, 8, 4),
        communities=3,
        time_steps=3,
        p_in=0.4,
        p_out=0.05,
        churn_rate=0.1,
        migration_rate=0.1,
        feature_dim=4,
        feature_noise=0.5,
        seed=7,
    )
    return generate_series(cfg)


@pytest.fixture(scope="session")
def seed7_snapshot(seed7_series):
    return seed7_series.snapshots[0]

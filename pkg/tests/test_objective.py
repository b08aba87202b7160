import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetcd import objective as obj
from hetcd.autodiff import Tape, Value, backward
from hetcd.errors import DomainError, GraphInvariantError
from hetcd.graphs import collapse_adjacency

from conftest import make_snapshot


# ---------------------------------------------------------------------------
# Independent oracles (direct definitions, no shared code with the package)

def ce_oracle(probs, labels, c):
    """Minimum over all c! permutations, plain loops."""
    best = math.inf
    best_perm = None
    for perm in itertools.permutations(range(c)):
        total = 0.0
        for i, lab in enumerate(labels):
            total -= math.log(probs[i][perm[lab]])
        if total < best:
            best, best_perm = total, perm
    return best, best_perm


def nmi_oracle(pred, true):
    n = len(pred)
    joint = Counter(zip(pred, true))
    pc = Counter(pred)
    tc = Counter(true)
    h_p = -sum((k / n) * math.log(k / n) for k in pc.values())
    h_t = -sum((k / n) * math.log(k / n) for k in tc.values())
    if h_p + h_t == 0.0:
        return 0.0
    info = sum(
        (k / n) * math.log((k / n) / ((pc[a] / n) * (tc[b] / n)))
        for (a, b), k in joint.items()
    )
    return info / ((h_p + h_t) / 2.0)


def ari_oracle(pred, true):
    """Pair-counting over all node pairs (a different formulation than
    the package's contingency-sum implementation)."""
    n = len(pred)
    ss = sd = ds = dd = 0
    for i in range(n):
        for j in range(i + 1, n):
            same_p = pred[i] == pred[j]
            same_t = true[i] == true[j]
            if same_p and same_t:
                ss += 1
            elif same_p:
                sd += 1
            elif same_t:
                ds += 1
            else:
                dd += 1
    denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd)
    if denom == 0:
        return 1.0
    return 2.0 * (ss * dd - sd * ds) / denom


def f1_oracles(aligned, true):
    """Macro/micro F1 via precision/recall harmonic means."""
    classes = sorted(set(aligned) | set(true))
    per_class = []
    tp_total = fp_total = fn_total = 0
    for c in classes:
        tp = sum(1 for a, t in zip(aligned, true) if a == c and t == c)
        fp = sum(1 for a, t in zip(aligned, true) if a == c and t != c)
        fn = sum(1 for a, t in zip(aligned, true) if a != c and t == c)
        tp_total, fp_total, fn_total = tp_total + tp, fp_total + fp, fn_total + fn
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        per_class.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    macro = sum(per_class) / len(per_class)
    prec = tp_total / (tp_total + fp_total)
    rec = tp_total / (tp_total + fn_total)
    micro = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return macro, micro


def modularity_oracle(a, labels):
    n = a.shape[0]
    two_m = a.sum()
    q = 0.0
    k = a.sum(axis=1)
    for u in range(n):
        for v in range(n):
            if labels[u] == labels[v]:
                q += a[u, v] - k[u] * k[v] / two_m
    return q / two_m


# ---------------------------------------------------------------------------

class TestPermCeLoss:
    def test_two_class_hand_case(self):
        probs = Value(np.array([[0.9, 0.1], [0.1, 0.9]]))
        with Tape():
            loss, perm = obj.perm_ce_loss(probs, np.array([0, 1]), 2)
        want = -2.0 * math.log(0.9)  # = 0.21072103131565256, identity wins
        assert abs(float(loss.data[0, 0]) - want) < 1e-12
        assert perm == (0, 1)

    def test_matching_one_hot_gives_zero(self):
        probs = Value(np.eye(3))
        with Tape():
            loss, _ = obj.perm_ce_loss(probs, np.array([0, 1, 2]), 3)
        assert float(loss.data[0, 0]) == 0.0

    def test_invariant_under_ground_truth_relabeling(self):
        rng = np.random.default_rng(0)
        c, n = 3, 12
        probs_data = obj.softmax_rows(rng.normal(size=(n, c)))
        labels = rng.integers(c, size=n)
        values = []
        for perm in itertools.permutations(range(c)):
            relabeled = np.array(perm)[labels]
            with Tape():
                loss, _ = obj.perm_ce_loss(Value(probs_data), relabeled, c)
            values.append(float(loss.data[0, 0]))
        assert max(values) - min(values) < 1e-12

    @pytest.mark.parametrize("c", [2, 3, 4, 5, 6])
    def test_equals_brute_force_enumeration(self, c):
        rng = np.random.default_rng(c)
        for _ in range(10):
            n = int(rng.integers(2, 15))
            probs_data = obj.softmax_rows(rng.normal(size=(n, c)) * 2)
            labels = rng.integers(c, size=n)
            with Tape():
                loss, perm = obj.perm_ce_loss(Value(probs_data), labels, c)
            want, want_perm = ce_oracle(probs_data.tolist(), labels.tolist(), c)
            assert abs(float(loss.data[0, 0]) - want) < 1e-12
            assert perm == want_perm

    def test_large_class_count_rejected(self):
        probs = Value(np.full((2, 9), 1.0 / 9))
        with Tape():
            with pytest.raises(DomainError) as info:
                obj.perm_ce_loss(probs, np.array([0, 1]), 9)
        assert "grouping" in str(info.value)

    def test_gradient_only_through_minimizing_terms(self):
        rng = np.random.default_rng(1)
        probs_data = obj.softmax_rows(rng.normal(size=(4, 3)) * 2)
        labels = np.array([0, 1, 2, 0])
        probs = Value(probs_data)
        with Tape():
            loss, perm = obj.perm_ce_loss(probs, labels, 3)
            backward(loss)
        selected = np.zeros_like(probs_data, dtype=bool)
        selected[np.arange(4), np.array(perm)[labels]] = True
        assert np.all(probs.grad[~selected] == 0.0)
        assert np.all(probs.grad[selected] != 0.0)


class TestPrediction:
    def test_rows_are_distributions(self):
        rng = np.random.default_rng(2)
        pred = obj.Prediction.from_logits(rng.normal(size=(6, 4)))
        assert np.max(np.abs(pred.probabilities.sum(axis=1) - 1.0)) <= 1e-12
        assert pred.hard_labels.shape == (6,)
        assert np.all(pred.hard_labels == pred.probabilities.argmax(axis=1))


class TestAlignmentMetrics:
    def test_identical_partitions_are_perfect(self):
        labels = np.array([0, 1, 2, 0, 1, 2])
        assert obj.accuracy(labels, labels) == 1.0
        assert obj.nmi(labels, labels) == pytest.approx(1.0, abs=1e-12)
        assert obj.ari(labels, labels) == pytest.approx(1.0, abs=1e-12)
        assert obj.macro_f1(labels, labels) == 1.0
        assert obj.micro_f1(labels, labels) == 1.0

    def test_permuted_ground_truth_still_perfect_accuracy(self):
        rng = np.random.default_rng(3)
        true = rng.integers(3, size=30)
        pred = (true + 1) % 3
        assert obj.accuracy(pred, true, 3) == 1.0

    def test_six_point_hand_case(self):
        true = [0, 0, 0, 1, 1, 1]
        pred = [0, 0, 1, 1, 1, 1]
        got_nmi = obj.nmi(pred, true)
        got_ari = obj.ari(pred, true)
        assert got_nmi == pytest.approx(nmi_oracle(pred, true), abs=1e-12)
        assert got_ari == pytest.approx(ari_oracle(pred, true), abs=1e-12)
        # frozen oracle outputs
        assert got_nmi == pytest.approx(0.47870397138567994, abs=1e-12)
        assert got_ari == pytest.approx(0.32432432432432434, abs=1e-12)

    def test_metric_oracles_on_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(60):
            c = int(rng.integers(2, 5))
            n = int(rng.integers(4, 25))
            pred = rng.integers(c, size=n)
            true = rng.integers(c, size=n)
            assert obj.nmi(pred, true) == pytest.approx(
                nmi_oracle(pred.tolist(), true.tolist()), abs=1e-9
            )
            assert obj.ari(pred, true) == pytest.approx(
                ari_oracle(pred.tolist(), true.tolist()), abs=1e-9
            )
            aligned, _ = obj.align_labels(pred, true, c)
            macro, micro = f1_oracles(aligned.tolist(), true.tolist())
            assert obj.macro_f1(pred, true, c) == pytest.approx(macro, abs=1e-9)
            assert obj.micro_f1(pred, true, c) == pytest.approx(micro, abs=1e-9)

    @given(st.lists(st.integers(0, 3), min_size=2, max_size=40))
    @settings(max_examples=60, deadline=None)
    def test_alignment_never_hurts_accuracy(self, raw):
        rng = np.random.default_rng(len(raw))
        true = np.array(raw)
        pred = rng.integers(4, size=true.size)
        identity_acc = float((pred == true).mean())
        assert obj.accuracy(pred, true, 4) + 1e-12 >= identity_acc

    def test_invariant_under_node_reordering(self):
        rng = np.random.default_rng(5)
        true = rng.integers(3, size=40)
        pred = rng.integers(3, size=40)
        perm = rng.permutation(40)
        for fn in (obj.accuracy, obj.nmi, obj.ari, obj.macro_f1, obj.micro_f1):
            assert fn(pred, true) == pytest.approx(fn(pred[perm], true[perm]), abs=1e-12)

    def test_single_cluster_nmi_convention(self):
        ones = np.zeros(5, dtype=int)
        assert obj.nmi(ones, ones) == 0.0

    def test_micro_f1_equals_accuracy(self):
        rng = np.random.default_rng(6)
        pred = rng.integers(3, size=50)
        true = rng.integers(3, size=50)
        assert obj.micro_f1(pred, true, 3) == pytest.approx(obj.accuracy(pred, true, 3), abs=1e-12)


def two_triangles_snapshot():
    nodes = [(i, 0) for i in range(6)] + [(6, 1)]
    edges = [(0, 1, 0), (1, 2, 0), (0, 2, 0), (3, 4, 0), (4, 5, 0), (3, 5, 0)]
    return make_snapshot(1, nodes, edges, node_type_count=2, edge_type_count=1)


class TestModularity:
    def test_two_disjoint_triangles(self):
        snap = two_triangles_snapshot()
        q = obj.modularity(snap, 0, np.array([0, 0, 0, 1, 1, 1]))
        assert q == pytest.approx(0.5, abs=1e-12)

    def test_single_community_is_zero(self):
        snap = two_triangles_snapshot()
        assert obj.modularity(snap, 0, np.zeros(6, dtype=int)) == pytest.approx(0.0, abs=1e-12)

    def test_matches_double_loop_oracle(self, seed7_snapshot):
        rng = np.random.default_rng(7)
        a = collapse_adjacency(seed7_snapshot, 0)
        for _ in range(5):
            labels = rng.integers(3, size=a.shape[0])
            got = obj.modularity(seed7_snapshot, 0, labels)
            assert got == pytest.approx(modularity_oracle(a, labels), abs=1e-12)

    def test_zero_edges_raises(self):
        snap = make_snapshot(1, [(0, 0), (1, 1)], [])
        with pytest.raises(GraphInvariantError):
            obj.modularity(snap, 0, np.array([0]))

    def test_range_bounds(self):
        rng = np.random.default_rng(8)
        snap = two_triangles_snapshot()
        for _ in range(30):
            labels = rng.integers(3, size=6)
            q = obj.modularity(snap, 0, labels)
            assert -0.5 - 1e-12 <= q <= 1.0 + 1e-12

    def test_invariant_under_reordering(self, seed7_snapshot):
        rng = np.random.default_rng(9)
        a = collapse_adjacency(seed7_snapshot, 0)
        labels = rng.integers(3, size=a.shape[0])
        base = obj.modularity_from_adjacency(a, labels)
        perm = rng.permutation(a.shape[0])
        permuted = obj.modularity_from_adjacency(a[np.ix_(perm, perm)], labels[perm])
        assert permuted == pytest.approx(base, abs=1e-12)


class TestReporting:
    def test_percentages_rounded_in_order(self):
        report = {
            "Micro-F1": 0.123456,
            "ACC": 1.0,
            "NMI": 0.98765,
            "ARI": 0.5,
            "Macro-F1": 0.25,
            "Modularity": 0.375,
        }
        out = obj.to_percentages(report)
        assert list(out) == ["ACC", "NMI", "Modularity", "ARI", "Macro-F1", "Micro-F1"]
        assert out["NMI"] == 98.77 and out["Micro-F1"] == 12.35

"""Training loss and evaluation criteria for non-overlapping communities.

The loss is cross-entropy minimized over every relabeling of the
community index set (a finite group, so the infimum is a brute-force
minimum).  Evaluation covers accuracy, NMI, ARI, Newman-Girvan
modularity and macro/micro F1; accuracy and the F1 scores align
predicted labels to ground truth with the same brute-force matcher.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Value
from .errors import DomainError, GraphInvariantError, ShapeError
from .graphs import HeteroSnapshot, collapse_adjacency

MAX_BRUTE_FORCE_CLASSES = 8

CRITERIA = ("ACC", "NMI", "Modularity", "ARI", "Macro-F1", "Micro-F1")


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Plain (non-differentiable) row-stochastic softmax with max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class Prediction:
    """Row-stochastic class probabilities plus their argmax labels."""

    probabilities: np.ndarray
    hard_labels: np.ndarray

    @staticmethod
    def from_logits(logits: np.ndarray) -> "Prediction":
        probs = softmax_rows(logits)
        return Prediction(probabilities=probs, hard_labels=probs.argmax(axis=1))


def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ShapeError("labels", labels.shape)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DomainError(f"labels must lie in [0, {num_classes})")
    return labels


def _check_class_count(num_classes: int) -> None:
    if num_classes > MAX_BRUTE_FORCE_CLASSES:
        raise DomainError(
            f"brute-force permutation matching supports at most "
            f"{MAX_BRUTE_FORCE_CLASSES} communities, got {num_classes}; "
            "grouping the label set into coarser buckets is out of scope"
        )


def perm_ce_loss(
    probs: Value, labels, num_classes: int
) -> tuple[Value, tuple[int, ...]]:
    """Cross-entropy minimized over all relabelings of the communities.

    Returns the scalar loss and the minimizing permutation (mapping
    ground-truth label c to probability column perm[c]).  The gradient
    flows only through the minimizing permutation's terms.
    """
    _check_class_count(num_classes)
    labels = _check_labels(labels, num_classes)
    n = labels.size
    if probs.shape != (n, num_classes):
        raise ShapeError("perm_ce_loss", probs.shape, (n, num_classes))

    # class_sums[c_true, c_col] = sum of log prob mass class c_true would
    # claim from column c_col; -inf entries are legal while searching.
    with np.errstate(divide="ignore"):
        log_probs = np.log(probs.data)
    class_sums = np.zeros((num_classes, num_classes))
    for c in range(num_classes):
        rows = labels == c
        if rows.any():
            class_sums[c] = log_probs[rows].sum(axis=0)

    best_perm: tuple[int, ...] | None = None
    best_total = -math.inf
    for perm in itertools.permutations(range(num_classes)):
        total = sum(class_sums[c, perm[c]] for c in range(num_classes))
        if best_perm is None or total > best_total:
            best_total = total
            best_perm = perm
    if not math.isfinite(best_total):
        raise DomainError(
            "perm_ce_loss: every permutation hits a zero probability; "
            "the predictions have saturated"
        )

    perm_array = np.array(best_perm, dtype=np.int64)
    picked = ad.gather_entries(probs, np.arange(n), perm_array[labels])
    loss = ad.scale(ad.scalar_sum(ad.log(picked)), -1.0)
    return loss, best_perm


def align_labels(pred, true, num_classes: int | None = None) -> tuple[np.ndarray, tuple[int, ...]]:
    """Relabel predictions to best match ground truth.

    Brute-forces the permutation of predicted classes maximizing the
    number of matches; returns the relabeled predictions and the
    permutation (predicted class c maps to perm[c]).
    """
    pred = np.asarray(pred, dtype=np.int64)
    true = np.asarray(true, dtype=np.int64)
    if pred.shape != true.shape:
        raise ShapeError("align_labels", pred.shape, true.shape)
    if num_classes is None:
        num_classes = int(max(pred.max(initial=-1), true.max(initial=-1))) + 1
    _check_class_count(num_classes)
    pred = _check_labels(pred, num_classes)
    true = _check_labels(true, num_classes)

    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (pred, true), 1)
    best_perm = None
    best_matches = -1
    for perm in itertools.permutations(range(num_classes)):
        matches = sum(counts[c, perm[c]] for c in range(num_classes))
        if matches > best_matches:
            best_matches = matches
            best_perm = perm
    perm_array = np.array(best_perm, dtype=np.int64)
    return perm_array[pred], best_perm


def accuracy(pred, true, num_classes: int | None = None) -> float:
    """Fraction of matches after best-permutation alignment."""
    aligned, _ = align_labels(pred, true, num_classes)
    true = np.asarray(true, dtype=np.int64)
    if true.size == 0:
        raise DomainError("accuracy: empty label arrays")
    return float((aligned == true).mean())


def contingency_table(pred, true) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.int64)
    true = np.asarray(true, dtype=np.int64)
    if pred.shape != true.shape or pred.ndim != 1:
        raise ShapeError("contingency_table", pred.shape, true.shape)
    table = np.zeros((pred.max(initial=0) + 1, true.max(initial=0) + 1), dtype=np.int64)
    np.add.at(table, (pred, true), 1)
    return table


def nmi(pred, true) -> float:
    """Mutual information normalized by the arithmetic mean of entropies.

    When both partitions are single-cluster the denominator vanishes;
    the score is defined as 0 in that case.
    """
    table = contingency_table(pred, true)
    n = table.sum()
    if n == 0:
        raise DomainError("nmi: empty label arrays")
    pu = table.sum(axis=1) / n
    pv = table.sum(axis=0) / n
    h_u = -sum(p * math.log(p) for p in pu if p > 0)
    h_v = -sum(p * math.log(p) for p in pv if p > 0)
    if h_u + h_v == 0.0:
        return 0.0
    mutual = 0.0
    for i, j in zip(*np.nonzero(table)):
        pij = table[i, j] / n
        mutual += pij * math.log(pij / (pu[i] * pv[j]))
    return float(mutual / ((h_u + h_v) / 2.0))


def _comb2(x: np.ndarray) -> np.ndarray:
    return x * (x - 1) // 2


def ari(pred, true) -> float:
    """Adjusted Rand index via the standard pair-counting formula.

    A vanishing denominator (both partitions trivially identical in
    structure) is defined as 1.0.
    """
    table = contingency_table(pred, true)
    n = table.sum()
    if n == 0:
        raise DomainError("ari: empty label arrays")
    sum_ij = int(_comb2(table).sum())
    sum_a = int(_comb2(table.sum(axis=1)).sum())
    sum_b = int(_comb2(table.sum(axis=0)).sum())
    total = int(_comb2(np.array([n]))[0])
    expected = sum_a * sum_b / total if total else 0.0
    maximum = (sum_a + sum_b) / 2.0
    if maximum - expected == 0.0:
        return 1.0
    return (sum_ij - expected) / (maximum - expected)


def _f1_counts(pred, true, num_classes: int | None):
    aligned, _ = align_labels(pred, true, num_classes)
    true = np.asarray(true, dtype=np.int64)
    classes = sorted(set(aligned.tolist()) | set(true.tolist()))
    stats = []
    for c in classes:
        tp = int(((aligned == c) & (true == c)).sum())
        fp = int(((aligned == c) & (true != c)).sum())
        fn = int(((aligned != c) & (true == c)).sum())
        stats.append((tp, fp, fn))
    return stats


def macro_f1(pred, true, num_classes: int | None = None) -> float:
    """Unweighted mean per-class F1 over classes present in either side,
    after alignment; a class with no true or predicted members scores 0."""
    stats = _f1_counts(pred, true, num_classes)
    scores = []
    for tp, fp, fn in stats:
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    if not scores:
        raise DomainError("macro_f1: empty label arrays")
    return float(np.mean(scores))


def micro_f1(pred, true, num_classes: int | None = None) -> float:
    """Pooled-count F1 after alignment (equals accuracy for single-label
    multiclass predictions)."""
    stats = _f1_counts(pred, true, num_classes)
    tp = sum(s[0] for s in stats)
    fp = sum(s[1] for s in stats)
    fn = sum(s[2] for s in stats)
    denom = 2 * tp + fp + fn
    if denom == 0:
        raise DomainError("micro_f1: empty label arrays")
    return 2 * tp / denom


def modularity_from_adjacency(a: np.ndarray, pred_labels) -> float:
    """Q = (1/2m) sum_uv [A_uv - k_u k_v / 2m] [c_u = c_v] on a weighted
    symmetric adjacency."""
    a = np.asarray(a, dtype=np.float64)
    labels = np.asarray(pred_labels, dtype=np.int64)
    if labels.shape != (a.shape[0],):
        raise ShapeError("modularity", labels.shape, (a.shape[0],))
    two_m = a.sum()
    if two_m == 0:
        raise GraphInvariantError("modularity undefined: the graph has no edges")
    degrees = a.sum(axis=1)
    same = labels[:, None] == labels[None, :]
    return float(((a - np.outer(degrees, degrees) / two_m) * same).sum() / two_m)


def modularity(snapshot: HeteroSnapshot, target_type: int, pred_labels) -> float:
    """Newman-Girvan modularity of a partition of one node type.

    Computed on the collapsed same-type graph (integer edge-type counts
    act as weights).
    """
    return modularity_from_adjacency(collapse_adjacency(snapshot, target_type), pred_labels)


def classification_report(pred, true, num_classes: int | None = None) -> dict[str, float]:
    """The five label-comparison criteria as fractions in [0, 1]."""
    return {
        "ACC": accuracy(pred, true, num_classes),
        "NMI": nmi(pred, true),
        "ARI": ari(pred, true),
        "Macro-F1": macro_f1(pred, true, num_classes),
        "Micro-F1": micro_f1(pred, true, num_classes),
    }


def to_percentages(report: dict[str, float]) -> dict[str, float]:
    """Criterion values as percentages rounded to 2 decimals, in canonical order."""
    ordered = {k: report[k] for k in CRITERIA if k in report}
    ordered.update({k: v for k, v in report.items() if k not in CRITERIA})
    return {k: round(100.0 * float(v), 2) for k, v in ordered.items()}

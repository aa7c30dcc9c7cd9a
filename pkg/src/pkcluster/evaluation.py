"""Cluster-count selection and agreement with known labels."""

from __future__ import annotations

import itertools
import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from pkcluster.curves import AlignedDataset
from pkcluster.errors import (
    IdMismatch,
    InputError,
    InvalidProbability,
    KEqualsOne,
    KOutOfRange,
    TooManyClusters,
    ZeroWithinDistanceWarning,
)
from pkcluster.hierarchy import Dendrogram, Partition, cut

MAX_PERMUTATION_K = 8
UNKNOWN = "unknown"


def calinski_harabasz(
    dataset: AlignedDataset, partition: Partition, classic_squared: bool = False
) -> float:
    """Between-cluster separation over within-cluster cohesion.

    ``CH = (N - K) * sum_k n_k ||c_k - x_bar|| / ((K - 1) * sum_k sum_{x in k} ||x - c_k||)``

    Distances are plain (unsquared) Euclidean by default, so the index is
    invariant to rescaling the data. ``classic_squared=True`` uses squared
    distances, i.e. the textbook variance-ratio form.

    Returns ``inf`` (with a :class:`ZeroWithinDistanceWarning`) when every
    curve coincides with its cluster centroid.
    """
    if set(partition.ids) != set(dataset.curve_ids):
        raise IdMismatch("partition ids do not match the dataset curve ids")
    k = partition.k
    if k < 2:
        raise KEqualsOne("the index is undefined for a single cluster")
    n = len(dataset)
    if k >= n:
        raise KOutOfRange(f"need fewer clusters than curves, got k={k} for n={n}")
    x = dataset.matrix
    labels = partition.labels_for(dataset.curve_ids)
    grand = x.mean(axis=0)
    between = 0.0
    within = 0.0
    for c in range(1, k + 1):
        members = x[labels == c]
        centroid = members.mean(axis=0)
        d_between = np.sum((centroid - grand) ** 2)
        d_within = np.sum((members - centroid) ** 2, axis=1)
        if not classic_squared:
            d_between = np.sqrt(d_between)
            d_within = np.sqrt(d_within)
        between += len(members) * d_between
        within += d_within.sum()
    if within == 0:
        warnings.warn(
            "within-cluster distance is zero; Calinski-Harabasz reported as +inf",
            ZeroWithinDistanceWarning,
            stacklevel=2,
        )
        return math.inf
    return float((n - k) * between / ((k - 1) * within))


@dataclass(frozen=True)
class CviSweep:
    k_values: tuple[int, ...]
    scores: tuple[float, ...]

    @property
    def argmax_k(self) -> int:
        """Smallest k attaining the highest score."""
        best = int(np.argmax(self.scores))
        return self.k_values[best]

    def rows(self):
        return list(zip(self.k_values, self.scores))


def ch_sweep(
    dataset: AlignedDataset, tree: Dendrogram, k_max: int = 8, classic_squared: bool = False
) -> CviSweep:
    """Score ``cut(tree, k)`` for ``k = 2 .. k_max``."""
    n = tree.n
    k_max = int(k_max)
    if not 2 <= k_max <= n:
        raise KOutOfRange(f"k_max must be between 2 and {n}, got {k_max}")
    # k = n leaves every cluster a singleton, which the index cannot score
    ks = tuple(range(2, min(k_max, n - 1) + 1))
    if not ks:
        raise KOutOfRange(f"no scorable k for {n} curves")
    scores = tuple(calinski_harabasz(dataset, cut(tree, k), classic_squared) for k in ks)
    return CviSweep(ks, scores)


def _paired_labels(a: Partition, b: Partition) -> tuple[np.ndarray, np.ndarray]:
    if set(a.ids) != set(b.ids):
        raise IdMismatch("partitions are over different id sets")
    ids = a.ids
    return a.labels_for(ids), b.labels_for(ids)


def rand_index(a: Partition, b: Partition) -> float:
    """Fraction of id pairs on which the two partitions agree."""
    la, lb = _paired_labels(a, b)
    n = len(la)
    if n < 2:
        return 1.0
    # pair counts from the contingency table
    table = np.zeros((a.k, b.k), dtype=np.int64)
    np.add.at(table, (la - 1, lb - 1), 1)
    pairs = n * (n - 1) // 2
    both = int((table * (table - 1) // 2).sum())
    same_a = int((np.bincount(la) * (np.bincount(la) - 1) // 2).sum())
    same_b = int((np.bincount(lb) * (np.bincount(lb) - 1) // 2).sum())
    agree = pairs + 2 * both - same_a - same_b
    return agree / pairs


def match_accuracy(predicted: Partition, truth: Partition) -> float:
    """Best fraction of correctly labelled ids over all cluster relabelings.

    Clusters are matched one-to-one; when the counts differ, extra
    clusters stay unmatched and count as errors.
    """
    lp, lt = _paired_labels(predicted, truth)
    kp, kt = predicted.k, truth.k
    if max(kp, kt) > MAX_PERMUTATION_K:
        raise TooManyClusters(
            f"permutation search is limited to {MAX_PERMUTATION_K} clusters, got {max(kp, kt)}"
        )
    table = np.zeros((kp, kt), dtype=np.int64)
    np.add.at(table, (lp - 1, lt - 1), 1)
    best = 0
    if kp <= kt:
        for perm in itertools.permutations(range(kt), kp):
            best = max(best, int(table[np.arange(kp), list(perm)].sum()))
    else:
        for perm in itertools.permutations(range(kp), kt):
            best = max(best, int(table[list(perm), np.arange(kt)].sum()))
    return best / len(lp)


@dataclass(frozen=True)
class LabelCrossTab:
    """Counts of each label value per cluster (clusters ``1..k``)."""

    rows: Mapping[str, tuple[int, ...]]
    k: int

    def row_total(self, label) -> int:
        return sum(self.rows[label])

    def percentages(self, label) -> tuple[float, ...]:
        counts = self.rows[label]
        total = sum(counts)
        return tuple(100.0 * c / total if total else 0.0 for c in counts)

    def cluster_sizes(self) -> tuple[int, ...]:
        return tuple(sum(r[c] for r in self.rows.values()) for c in range(self.k))

    @property
    def total(self) -> int:
        return sum(self.cluster_sizes())


def crosstab(
    partition: Partition, labels: Mapping[str, str], order: Sequence[str] | None = None
) -> LabelCrossTab:
    """Tabulate label values against clusters.

    Ids without a label are counted under ``"unknown"``. Rows follow
    ``order`` when given, otherwise sorted label order with ``"unknown"``
    last.
    """
    counts: dict[str, list[int]] = {}
    for cid, c in partition.assignment.items():
        lab = labels.get(cid)
        lab = UNKNOWN if lab is None or lab == "" else str(lab)
        counts.setdefault(lab, [0] * partition.k)[c - 1] += 1
    if order is not None:
        keys = [o for o in order if o in counts] + sorted(k for k in counts if k not in order)
    else:
        keys = sorted(k for k in counts if k != UNKNOWN) + ([UNKNOWN] if UNKNOWN in counts else [])
    return LabelCrossTab({k: tuple(counts[k]) for k in keys}, partition.k)


def binomial_upper_tail(n: int, observed: int, p: float) -> float:
    """P(X >= observed) for X ~ Binomial(n, p), by exact pmf summation."""
    if not 0 < p < 1:
        raise InvalidProbability(f"probability must lie strictly between 0 and 1, got {p!r}")
    if observed <= 0:
        return 1.0
    if observed > n:
        return 0.0
    terms = [math.comb(n, j) * p**j * (1 - p) ** (n - j) for j in range(observed, n + 1)]
    return min(1.0, math.fsum(terms))


def binomial_enrichment(
    table: LabelCrossTab, label_value: str, cluster: int, null_p: float | None = None
) -> float:
    """One-sided exact test that ``label_value`` is over-represented in ``cluster``.

    Under the null each of the label's members falls in ``cluster`` with
    probability ``null_p``, by default the cluster's share of all ids.
    """
    if label_value not in table.rows:
        raise InputError(f"label value {label_value!r} not in the table")
    if not 1 <= cluster <= table.k:
        raise KOutOfRange(f"cluster must be between 1 and {table.k}, got {cluster}")
    if null_p is None:
        null_p = table.cluster_sizes()[cluster - 1] / table.total
    n_label = table.row_total(label_value)
    observed = table.rows[label_value][cluster - 1]
    return binomial_upper_tail(n_label, observed, null_p)

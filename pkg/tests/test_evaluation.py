import warnings
from decimal import Decimal
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from oracles import accuracy_bruteforce, binomial_tail_exact, ch_bruteforce, rand_bruteforce
from pkcluster.curves import AlignedDataset
from pkcluster.dissimilarity import pairwise_matrix
from pkcluster.errors import (
    IdMismatch,
    InvalidProbability,
    KEqualsOne,
    KOutOfRange,
    TooManyClusters,
    ZeroWithinDistanceWarning,
)
from pkcluster.evaluation import (
    LabelCrossTab,
    binomial_enrichment,
    binomial_upper_tail,
    calinski_harabasz,
    ch_sweep,
    crosstab,
    match_accuracy,
    rand_index,
)
from pkcluster.hierarchy import Partition, agglomerate


def dataset(rows, ids=None):
    rows = np.asarray(rows, dtype=float).reshape(len(rows), -1)
    ids = ids or tuple(f"c{i}" for i in range(len(rows)))
    times = tuple(Decimal(i) for i in range(rows.shape[1]))
    return AlignedDataset(ids, times, rows, "raw")


def part(ids, labels):
    return Partition.from_labels(ids, labels)


class TestCalinskiHarabasz:
    def test_fixture_is_twenty(self):
        ds = dataset([0, 1, 10, 11])
        assert calinski_harabasz(ds, part(ds.curve_ids, [1, 1, 2, 2])) == 20
        assert ch_bruteforce([[0], [1], [10], [11]], [1, 1, 2, 2]) == 20

    def test_worse_partition_scores_lower(self):
        ds = dataset([0, 1, 10, 11])
        other = calinski_harabasz(ds, part(ds.curve_ids, [1, 2, 1, 2]))
        assert other == pytest.approx(ch_bruteforce([[0], [1], [10], [11]], [1, 2, 1, 2]), rel=1e-12)
        assert other < 20

    def test_single_cluster(self):
        ds = dataset([0, 1, 2])
        with pytest.raises(KEqualsOne):
            calinski_harabasz(ds, part(ds.curve_ids, [1, 1, 1]))

    def test_zero_within(self):
        ds = dataset([0, 0, 5, 5])
        with pytest.warns(ZeroWithinDistanceWarning):
            assert calinski_harabasz(ds, part(ds.curve_ids, [1, 1, 2, 2])) == float("inf")

    def test_id_mismatch(self):
        ds = dataset([0, 1, 2])
        with pytest.raises(IdMismatch):
            calinski_harabasz(ds, part(("x", "y", "z"), [1, 1, 2]))

    def test_matches_bruteforce_multivariate(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            pts = rng.random((12, 4))
            labels = rng.integers(0, 3, 12)
            if len(set(labels)) < 2:
                continue
            ds = dataset(pts)
            got = calinski_harabasz(ds, part(ds.curve_ids, labels))
            assert got == pytest.approx(ch_bruteforce(pts.tolist(), labels.tolist()), rel=1e-12)

    def test_squared_variant_matches_textbook(self):
        from sklearn.metrics import calinski_harabasz_score

        rng = np.random.default_rng(1)
        pts = rng.random((20, 3))
        labels = np.repeat([0, 1, 2, 3], 5)
        ds = dataset(pts)
        got = calinski_harabasz(ds, part(ds.curve_ids, labels), classic_squared=True)
        assert got == pytest.approx(calinski_harabasz_score(pts, labels), rel=1e-12)

    def test_invariances(self):
        rng = np.random.default_rng(2)
        pts = rng.random((15, 3))
        labels = rng.integers(0, 3, 15)
        ds = dataset(pts)
        base = calinski_harabasz(ds, part(ds.curve_ids, labels))
        # scaling
        assert calinski_harabasz(dataset(7.5 * pts), part(ds.curve_ids, labels)) == pytest.approx(base, rel=1e-12)
        # relabeling
        assert calinski_harabasz(ds, part(ds.curve_ids, (labels + 1) % 3)) == pytest.approx(base, rel=1e-12)
        # row permutation
        perm = rng.permutation(15)
        ids = tuple(ds.curve_ids[i] for i in perm)
        pds = dataset(pts[perm], ids)
        assert calinski_harabasz(pds, part(ds.curve_ids, labels)) == pytest.approx(base, rel=1e-12)


class TestChSweep:
    def blobs(self, centers, n_each, scale, seed):
        rng = np.random.default_rng(seed)
        pts = np.vstack([c + scale * rng.standard_normal((n_each, len(c))) for c in centers])
        return dataset(pts)

    def test_four_blobs(self):
        ds = self.blobs([[0, 0], [10, 0], [0, 10], [10, 10]], 20, 0.5, 3)
        tree = agglomerate(pairwise_matrix(ds))
        sweep = ch_sweep(ds, tree, 8)
        assert sweep.k_values == tuple(range(2, 9))
        assert sweep.argmax_k == 4

    def test_two_blobs(self):
        ds = self.blobs([[0, 0, 0], [6, 6, 6]], 30, 0.5, 4)
        assert ch_sweep(ds, agglomerate(pairwise_matrix(ds)), 6).argmax_k == 2

    def test_length_one(self):
        ds = self.blobs([[0], [5]], 5, 0.1, 5)
        sweep = ch_sweep(ds, agglomerate(pairwise_matrix(ds)), 2)
        assert len(sweep.scores) == 1

    def test_bad_k_max(self):
        ds = self.blobs([[0], [5]], 3, 0.1, 6)
        with pytest.raises(KOutOfRange):
            ch_sweep(ds, agglomerate(pairwise_matrix(ds)), 1)


IDS4 = ("a", "b", "c", "d")


class TestRandIndex:
    def test_identical(self):
        p = part(IDS4, [1, 1, 2, 3])
        assert rand_index(p, p) == 1

    def test_one_versus_singletons(self):
        ids = ("a", "b", "c")
        assert rand_index(part(ids, [1, 1, 1]), part(ids, [1, 2, 3])) == 0

    def test_label_swap(self):
        assert rand_index(part(IDS4, [1, 1, 2, 2]), part(IDS4, [2, 2, 1, 1])) == 1

    def test_mismatch(self):
        with pytest.raises(IdMismatch):
            rand_index(part(IDS4, [1, 1, 2, 2]), part(("a", "b", "c", "e"), [1, 1, 2, 2]))

    def test_bruteforce(self):
        rng = np.random.default_rng(7)
        for n in range(2, 9):
            ids = tuple(str(i) for i in range(n))
            for _ in range(30):
                a, b = rng.integers(0, 4, n), rng.integers(0, 3, n)
                got = rand_index(part(ids, a), part(ids, b))
                assert got == pytest.approx(rand_bruteforce(a.tolist(), b.tolist()), abs=1e-15)
                assert got == rand_index(part(ids, b), part(ids, a))


class TestMatchAccuracy:
    def test_identical(self):
        p = part(IDS4, [1, 1, 2, 2])
        assert match_accuracy(p, p) == 1

    def test_swapped(self):
        assert match_accuracy(part(IDS4, [1, 1, 2, 2]), part(IDS4, [2, 2, 1, 1])) == 1

    def test_one_misplaced_of_ten(self):
        ids = tuple(str(i) for i in range(10))
        truth = [1] * 5 + [2] * 5
        pred = [1] * 6 + [2] * 4
        assert match_accuracy(part(ids, pred), part(ids, truth)) == pytest.approx(0.9)
        assert accuracy_bruteforce(pred, truth) == pytest.approx(0.9)

    def test_too_many(self):
        ids = tuple(str(i) for i in range(9))
        with pytest.raises(TooManyClusters):
            match_accuracy(part(ids, range(9)), part(ids, [0] * 9))

    def test_bruteforce_and_lower_bound(self):
        rng = np.random.default_rng(8)
        for n in range(2, 9):
            ids = tuple(str(i) for i in range(n))
            for _ in range(30):
                a, b = rng.integers(0, 4, n), rng.integers(0, 3, n)
                got = match_accuracy(part(ids, a), part(ids, b))
                assert got == pytest.approx(accuracy_bruteforce(a.tolist(), b.tolist()), abs=1e-15)


class TestBinomial:
    def test_observed_zero(self):
        assert binomial_upper_tail(6, 0, 0.3) == 1

    def test_table_shape_example(self):
        got = binomial_upper_tail(6, 5, 0.156)
        exact = binomial_tail_exact(6, 5, Fraction("0.156"))
        assert got == pytest.approx(float(exact), rel=1e-14)
        assert got == pytest.approx(binom.sf(4, 6, 0.156), rel=1e-10)

    def test_all_observed(self):
        assert binomial_upper_tail(7, 7, 0.5) == 0.5**7

    @pytest.mark.parametrize("p", [0, 1, -0.1, 1.5])
    def test_invalid_probability(self, p):
        with pytest.raises(InvalidProbability):
            binomial_upper_tail(5, 2, p)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 60), st.floats(0.01, 0.99))
    def test_monotone_in_observed(self, n, p):
        tails = [binomial_upper_tail(n, k, p) for k in range(n + 2)]
        assert all(a >= b for a, b in zip(tails, tails[1:]))

    def test_enrichment_uses_cluster_share(self):
        ids = tuple(str(i) for i in range(10))
        p = part(ids, [1] * 8 + [2] * 2)
        labels = {"8": "PM", "9": "PM", "0": "PM"}
        tab = crosstab(p, labels)
        got = binomial_enrichment(tab, "PM", 2)
        assert got == pytest.approx(float(binomial_tail_exact(3, 2, Fraction(2, 10))), rel=1e-14)
        assert binomial_enrichment(tab, "PM", 2, null_p=0.5) == pytest.approx(0.5)


class TestCrosstab:
    def test_single_label(self):
        p = part(IDS4, [1, 1, 2, 1])
        tab = crosstab(p, dict.fromkeys(IDS4, "EM"))
        assert dict(tab.rows) == {"EM": (3, 1)}

    def test_table_row_percentages(self):
        tab = LabelCrossTab({"PM": (1, 5, 0, 0)}, 4)
        pct = tab.percentages("PM")
        assert pct[0] == pytest.approx(16.67, abs=0.005)
        assert pct[1] == pytest.approx(83.33, abs=0.005)
        assert pct[2:] == (0, 0)

    def test_unknown(self):
        tab = crosstab(part(IDS4, [1, 2, 2, 1]), {})
        assert dict(tab.rows) == {"unknown": (2, 2)}

    def test_conservation(self):
        rng = np.random.default_rng(9)
        ids = tuple(str(i) for i in range(40))
        p = part(ids, rng.integers(0, 4, 40))
        labels = {i: rng.choice(["PM", "IM", "EM"]) for i in ids[:35]}
        tab = crosstab(p, labels)
        for value in tab.rows:
            expected = sum(1 for i in ids if labels.get(i, "unknown") == value)
            assert tab.row_total(value) == expected
            assert sum(tab.percentages(value)) == pytest.approx(100)
        assert tab.total == 40
        assert list(tab.cluster_sizes()) == p.sizes()

    def test_explicit_order(self):
        tab = crosstab(part(IDS4, [1, 1, 2, 2]), {"a": "PM", "b": "EM", "c": "UM", "d": "PM"}, ["PM", "UM"])
        assert list(tab.rows) == ["PM", "UM", "EM"]


def test_rejects_k_at_n():
    ds = dataset([0, 1, 2])
    with warnings.catch_warnings():
        with pytest.raises(KOutOfRange):
            calinski_harabasz(ds, part(ds.curve_ids, [1, 2, 3]))

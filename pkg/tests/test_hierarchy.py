import itertools
import re
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from oracles import average_linkage_bruteforce
from pkcluster.dissimilarity import DissimilarityMatrix
from pkcluster.errors import InputError, InvalidMatrix, KOutOfRange, ParseError
from pkcluster.hierarchy import (
    Dendrogram,
    Merge,
    Partition,
    agglomerate,
    cut,
    cut_height,
    export_dendrogram,
    from_json,
    to_json,
    to_newick,
    to_svg,
)


def points_matrix(points, ids=None):
    p = np.asarray(points, dtype=float).reshape(len(points), -1)
    d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
    return DissimilarityMatrix(ids or tuple(f"p{i}" for i in range(len(points))), d)


class TestAgglomerate:
    def test_hand_trace(self):
        tree = agglomerate(points_matrix([0, 1, 5], ("a", "b", "c")), "average")
        assert [m.height for m in tree.merges] == [1.0, 4.5]
        assert tree.merges[0] == Merge(0, 1, 1.0, 2)
        assert tree.merges[1] == Merge(3, 2, 4.5, 3)

    def test_identical_pair(self):
        tree = agglomerate(points_matrix([2, 2]))
        assert tree.merges == (Merge(0, 1, 0.0, 2),)

    def test_two_points(self):
        tree = agglomerate(DissimilarityMatrix(("x", "y"), [[0, 3.25], [3.25, 0]]))
        assert tree.merges[0].height == 3.25

    @pytest.mark.parametrize("method", ["single", "complete"])
    def test_other_linkages_hand_trace(self, method):
        tree = agglomerate(points_matrix([0, 1, 5]), method)
        assert tree.merges[1].height == {"single": 4.0, "complete": 5.0}[method]

    def test_rejects_bad_matrix(self):
        # bypass the constructor check to reach agglomerate's own validation
        bad = SimpleNamespace(ids=("a", "b"), values=np.array([[0.0, 1.0], [2.0, 0.0]]))
        with pytest.raises(InvalidMatrix):
            agglomerate(bad)

    def test_needs_two(self):
        with pytest.raises(InputError):
            agglomerate(points_matrix([1]))

    def test_unknown_linkage(self):
        with pytest.raises(InputError):
            agglomerate(points_matrix([0, 1]), "ward")

    @pytest.mark.parametrize("method", ["average", "single", "complete"])
    def test_heights_monotone(self, method):
        rng = np.random.default_rng(5)
        for _ in range(20):
            tree = agglomerate(points_matrix(rng.random((15, 3))), method)
            assert np.all(np.diff(tree.heights) >= -1e-12)

    def test_average_heights_match_bruteforce(self):
        rng = np.random.default_rng(6)
        for n in range(2, 7):
            for _ in range(20):
                m = points_matrix(rng.random((n, 2)))
                tree = agglomerate(m)
                for i, merge in enumerate(tree.merges):
                    a = tree.members(merge.left)
                    b = tree.members(merge.right)
                    assert merge.height == pytest.approx(
                        average_linkage_bruteforce(m.values, a, b), rel=1e-12
                    )

    @pytest.mark.parametrize("method", ["average", "single", "complete"])
    def test_agrees_with_scipy_on_tie_free_data(self, method):
        rng = np.random.default_rng(7)
        for _ in range(10):
            m = points_matrix(rng.random((25, 4)))
            tree = agglomerate(m, method)
            ref = linkage(squareform(m.values, checks=False), method)
            np.testing.assert_allclose(tree.heights, ref[:, 2], rtol=1e-12)
            for k in (2, 3, 5):
                mine = cut(tree, k).canonical()
                labels = fcluster(ref, k, "maxclust")
                theirs = Partition.from_labels(m.ids, labels).canonical()
                assert mine == theirs


class TestCut:
    def setup_method(self):
        self.tree = agglomerate(points_matrix([0, 1, 5], ("a", "b", "c")))

    def test_one_cluster(self):
        assert cut(self.tree, 1).assignment == {"a": 1, "b": 1, "c": 1}

    def test_singletons(self):
        assert cut(self.tree, 3).assignment == {"a": 1, "b": 2, "c": 3}

    def test_two(self):
        p = cut(self.tree, 2)
        assert p.assignment == {"a": 1, "b": 1, "c": 2}
        assert p.k == 2

    @pytest.mark.parametrize("k", [0, 4])
    def test_out_of_range(self, k):
        with pytest.raises(KOutOfRange):
            cut(self.tree, k)

    def test_nested(self):
        rng = np.random.default_rng(8)
        tree = agglomerate(points_matrix(rng.random((30, 2))))
        for k in range(1, 30):
            coarse = cut(tree, k).assignment
            fine = cut(tree, k + 1).assignment
            for a, b in itertools.combinations(coarse, 2):
                if fine[a] == fine[b]:
                    assert coarse[a] == coarse[b]

    def test_cluster_numbering_follows_input_order(self):
        tree = agglomerate(points_matrix([10, 0, 11, 1], ("w", "x", "y", "z")))
        assert cut(tree, 2).assignment == {"w": 1, "x": 2, "y": 1, "z": 2}

    def test_cut_height_separates(self):
        rng = np.random.default_rng(9)
        tree = agglomerate(points_matrix(rng.random((12, 2))))
        for k in range(2, 12):
            h = cut_height(tree, k)
            assert np.sum(tree.heights > h) == k - 1


def test_leaf_order_does_not_change_partition():
    rng = np.random.default_rng(10)
    pts = rng.random((20, 3))
    base = points_matrix(pts)
    tree = agglomerate(base)
    for _ in range(20):
        order = rng.permutation(20)
        other = agglomerate(base.permuted(order))
        for k in range(1, 21):
            assert cut(other, k).canonical() == cut(tree, k).canonical()


def test_ties_resolved_by_ids_not_positions():
    # all off-diagonal distances equal
    ids = ("d", "b", "a", "c")
    d = np.ones((4, 4)) - np.eye(4)
    tree = agglomerate(DissimilarityMatrix(ids, d))
    first = tree.merges[0]
    assert {ids[first.left], ids[first.right]} == {"a", "b"}
    perm = agglomerate(DissimilarityMatrix(ids, d).permuted([3, 2, 1, 0]))
    assert {perm.leaves[perm.merges[0].left], perm.leaves[perm.merges[0].right]} == {"a", "b"}


class TestExport:
    def test_newick_two_leaves(self):
        tree = agglomerate(DissimilarityMatrix(("A", "B"), [[0, 1], [1, 0]]))
        assert to_newick(tree) == "(A:1,B:1);"

    def test_newick_three_leaves(self):
        tree = agglomerate(points_matrix([0, 1, 5], ("a", "b", "c")))
        assert to_newick(tree) == "((a:1,b:1):3.5,c:4.5);"

    def test_newick_quotes_unsafe_labels(self):
        tree = agglomerate(DissimilarityMatrix(("A 1", "B:2"), [[0, 1], [1, 0]]))
        assert to_newick(tree) == "('A 1':1,'B:2':1);"

    def test_json_round_trip(self):
        rng = np.random.default_rng(11)
        tree = agglomerate(points_matrix(rng.random((10, 2))), "complete")
        back = from_json(to_json(tree))
        assert back == tree

    def test_json_rejects_garbage(self):
        with pytest.raises(ParseError):
            from_json('{"leaves": ["a"]}')

    def test_json_rejects_inconsistent_tree(self):
        with pytest.raises(InvalidMatrix):
            Dendrogram(("a", "b"), (Merge(0, 0, 1.0, 2),))

    def test_svg_cut_marker(self):
        tree = agglomerate(points_matrix([0, 1, 5]))
        assert "<line" not in to_svg(tree)
        assert len(re.findall(r"<line\b", to_svg(tree, cut_at=2.0))) == 1

    def test_svg_highlight(self):
        tree = agglomerate(points_matrix([0, 1, 5], ("a", "b", "PM1")))
        svg = to_svg(tree, highlight=["PM1"])
        assert re.search(r'class="highlight"[^>]*>PM1<', svg)
        assert svg.count('class="highlight"') == 1

    def test_export_writes_three_files(self, tmp_path):
        tree = agglomerate(points_matrix([0, 1, 5]))
        paths = export_dendrogram(tree, tmp_path, cut_at=2.0)
        assert sorted(p.suffix for p in paths.values()) == [".json", ".nwk", ".svg"]
        assert from_json(paths["json"].read_text()) == tree

import itertools

import numpy as np
import pytest

from rnntrack.tree import (MergeTree, _Worklist, enumerate_trees,
                           generate_tree, grid_adjacency, validate_tree)


def path_adjacency(k):
    a = np.zeros((k, k), dtype=bool)
    for i in range(k - 1):
        a[i, i + 1] = a[i + 1, i] = True
    return a


def square_adjacency():
    # 2x2 grid: 1-2, 1-3, 2-4, 3-4
    a = np.zeros((4, 4), dtype=bool)
    for i, j in ((0, 1), (0, 2), (1, 3), (2, 3)):
        a[i, j] = a[j, i] = True
    return a


def brute_force_trees(adjacency):
    """Independent enumeration via raw frozenset bookkeeping."""
    k = adjacency.shape[0]
    neigh = {i + 1: frozenset(j + 1 for j in np.flatnonzero(adjacency[i])) for i in range(k)}
    results = set()

    def adjacent(leaves_a, leaves_b):
        return any(neigh[u] & leaves_b for u in leaves_a)

    def recurse(active, merges):
        if len(active) == 1:
            results.add(tuple(merges))
            return
        ids = sorted(active)
        for a, b in itertools.combinations(ids, 2):
            if adjacent(active[a], active[b]):
                new = k + len(merges) + 1
                nxt = {n: s for n, s in active.items() if n not in (a, b)}
                nxt[new] = active[a] | active[b]
                recurse(nxt, merges + [(a, b, new)])

    recurse({i: frozenset((i,)) for i in range(1, k + 1)}, [])
    return {MergeTree(m) for m in results}


class TestGridAdjacency:
    def test_horizontally_adjacent_patches(self):
        a = grid_adjacency()
        assert a[0, 1]  # patches 1 and 2

    def test_no_diagonal_adjacency(self):
        a = grid_adjacency()
        assert not a[0, 8]  # patches 1 and 9

    def test_degrees_and_edge_count(self):
        a = grid_adjacency()
        degrees = a.sum(axis=1)
        assert degrees[[0, 2, 6, 8]].tolist() == [2, 2, 2, 2]  # corners
        assert degrees[[1, 3, 5, 7]].tolist() == [3, 3, 3, 3]  # edge middles
        assert degrees[4] == 4  # center
        assert a.sum() // 2 == 12

    def test_symmetric_zero_diagonal(self):
        a = grid_adjacency()
        assert np.array_equal(a, a.T)
        assert not a.diagonal().any()


class TestWorklistUpdate:
    def test_merging_8_9_adds_pairs_with_5_6_7(self):
        wl = _Worklist(grid_adjacency())
        assert (8, 9) in wl.pairs
        wl.merge((8, 9))
        new_pairs = [p for p in wl.pairs if 10 in p]
        assert sorted(new_pairs) == [(5, 10), (6, 10), (7, 10)]
        assert not any(8 in p or 9 in p for p in wl.pairs)

    def test_initial_pairs_are_grid_edges(self):
        wl = _Worklist(grid_adjacency())
        assert len(wl.pairs) == 12


class TestGenerateTree:
    def test_shape_counts(self):
        tree = generate_tree(grid_adjacency(), 0)
        assert len(tree.merges) == 8
        assert tree.root == 17
        assert tree.n_leaves == 9

    def test_deterministic_for_seed(self):
        a = grid_adjacency()
        assert generate_tree(a, 123).merges == generate_tree(a, 123).merges

    def test_distinct_shapes_across_seeds(self):
        a = grid_adjacency()
        shapes = {generate_tree(a, s).merges for s in range(50)}
        assert len(shapes) >= 2

    def test_valid_over_many_seeds(self):
        a = grid_adjacency()
        for seed in range(500):
            validate_tree(generate_tree(a, seed), a)

    def test_first_merge_can_be_8_9(self):
        # seeds are searched, not assumed: at least one of the first 200
        # starts by fusing patches 8 and 9
        a = grid_adjacency()
        assert any(generate_tree(a, s).merges[0] == (8, 9, 10) for s in range(200))

    def test_square_grid_trees_in_enumeration(self):
        a = square_adjacency()
        universe = enumerate_trees(a)
        for seed in range(200):
            assert generate_tree(a, seed) in universe


class TestEnumerateTrees:
    def test_two_leaf_path(self):
        trees = enumerate_trees(path_adjacency(2))
        assert trees == {MergeTree(((1, 2, 3),))}

    def test_three_leaf_path(self):
        trees = enumerate_trees(path_adjacency(3))
        assert trees == {MergeTree(((1, 2, 4), (3, 4, 5))),
                         MergeTree(((2, 3, 4), (1, 4, 5)))}

    def test_square_grid_matches_brute_force(self):
        a = square_adjacency()
        assert enumerate_trees(a) == brute_force_trees(a)
        assert len(enumerate_trees(a)) == 12

    def test_leaf_cap(self):
        with pytest.raises(ValueError):
            enumerate_trees(path_adjacency(6))


class TestValidateTree:
    def test_rejects_wrong_merge_count(self):
        with pytest.raises(ValueError):
            validate_tree(MergeTree(((1, 2, 10),)))

    def test_rejects_reused_child(self):
        tree = generate_tree(grid_adjacency(), 0)
        merges = list(tree.merges)
        a, b, new = merges[1]
        merges[1] = (merges[0][0], b, new)  # child consumed twice
        with pytest.raises(ValueError):
            validate_tree(MergeTree(tuple(merges)))

    def test_rejects_non_adjacent_merge(self):
        # 1 and 9 are opposite corners: never adjacent at the first merge
        merges = ((1, 9, 10), (2, 3, 11), (4, 5, 12), (6, 7, 13),
                  (8, 10, 14), (11, 12, 15), (13, 14, 16), (15, 16, 17))
        with pytest.raises(ValueError):
            validate_tree(MergeTree(merges), grid_adjacency())


class TestSerialization:
    def test_round_trip(self):
        tree = generate_tree(grid_adjacency(), 9)
        assert MergeTree.from_text(tree.to_text()) == tree

    def test_text_form(self):
        tree = MergeTree(((1, 2, 3),))
        assert tree.to_text() == "1 2 3\n"

    def test_bad_line_rejected(self):
        with pytest.raises(ValueError):
            MergeTree.from_text("1 2\n")

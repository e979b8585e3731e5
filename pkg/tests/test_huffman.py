# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src.core.exceptions import FormatError
from src.embedding.huffman import HuffmanTree, build_huffman


def test_hand_built_path_lengths():
    tree = build_huffman([4, 2, 1, 1])
    assert list(tree.path_lengths()) == [1, 2, 3, 3]
    assert tree.num_internal == 3
    # root is the last internal node
    assert all(p[0] == 2 for p in tree.points)


def test_small_trees():
    two = build_huffman([1.0, 5.0])
    assert list(two.path_lengths()) == [1, 1]
    one = build_huffman([3.0])
    assert list(one.path_lengths()) == [0]
    assert one.max_depth == 0


def test_codes_are_prefix_free_and_internal_ids_valid():
    rng = np.random.default_rng(5)
    for n in (2, 7, 64, 300):
        tree = build_huffman(rng.random(n) + 0.01)
        codes = ["".join(map(str, c)) for c in tree.codes]
        assert len(set(codes)) == n
        for a in codes:
            assert not any(b != a and b.startswith(a) for b in codes)
        for points in tree.points:
            assert all(0 <= p < n - 1 for p in points)
        assert tree.max_depth <= n - 1


def test_weighted_path_length_within_entropy_bound():
    rng = np.random.default_rng(6)
    freqs = rng.random(100) ** 3 + 1e-3
    tree = build_huffman(freqs)
    p = freqs / freqs.sum()
    entropy = -(p * np.log2(p)).sum()
    assert tree.expected_path_length(freqs) <= entropy + 1 + 1e-9


def test_signs_follow_codes():
    tree = build_huffman([4, 2, 1, 1])
    for code, sign in zip(tree.codes, tree.signs):
        np.testing.assert_array_equal(sign, np.where(code == 0, 1.0, -1.0))


def test_invalid_weights():
    with pytest.raises(ValueError):
        build_huffman([])
    with pytest.raises(ValueError):
        build_huffman([1.0, 0.0])
    with pytest.raises(ValueError):
        build_huffman([1.0, math.inf])


def test_line_round_trip():
    terms = ["a", "b", "c", "d", "e"]
    tree = build_huffman([5, 1, 3, 3, 2])
    loaded = HuffmanTree.from_lines(tree.to_lines(terms), terms)
    for x, y in zip(tree.points, loaded.points):
        np.testing.assert_array_equal(x, y)
    np.testing.assert_array_equal(tree.sign_matrix, loaded.sign_matrix)
    with pytest.raises(FormatError):
        HuffmanTree.from_lines(tree.to_lines(terms)[:-1], terms)
    with pytest.raises(FormatError):
        HuffmanTree.from_lines(["a\t0,1\t0"], terms)

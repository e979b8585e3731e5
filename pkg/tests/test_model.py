# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src.core.exceptions import ProjectionError, UnknownTermError
from src.embedding.huffman import build_huffman
from src.embedding.model import (
    RLM,
    RPE,
    EmbeddingModel,
    hs_log_probs,
    hs_prob,
    project_query,
    rpe_posteriors,
    softmax_log_probs,
    softmax_prob,
)
from tests.helpers import random_model


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def _walk(model, term, qvec):
    """Independent root-to-leaf product using the stored codes."""
    prob = 1.0
    for node, bit in zip(model.tree.points[term], model.tree.codes[term]):
        z = float(model.node_vectors[node] @ qvec)
        prob *= _sigmoid(z) if bit == 0 else 1.0 - _sigmoid(z)
    return prob


def test_initialization_ranges():
    rng = np.random.default_rng(0)
    tree = build_huffman([1.0, 2.0, 3.0])
    model = EmbeddingModel.initialize(RLM, ["a", "b", "c"], 300, rng, tree=tree)
    assert model.dim == 300
    assert np.all(np.abs(model.query_vectors) <= 0.5 / 300)
    assert not np.any(model.node_vectors)
    assert model.term_vectors is None
    rpe = EmbeddingModel.initialize(RPE, ["a", "b", "c"], 4, rng, bias=True)
    assert rpe.output == "logistic"
    assert not np.any(rpe.term_vectors) and not np.any(rpe.bias)


def test_project_query():
    model = random_model(RPE, 5, 3, seed=1)
    u, v = model.query_vectors[1], model.query_vectors[3]
    np.testing.assert_allclose(project_query(model, [1]), u)
    np.testing.assert_allclose(project_query(model, [1, 3]), (u + v) / 2)
    np.testing.assert_allclose(project_query(model, [1, 1]), u)
    # linearity: (a, b) is the mean of (a) and (b)
    np.testing.assert_allclose(
        project_query(model, [1, 3]), (project_query(model, [1]) + project_query(model, [3])) / 2
    )
    with pytest.raises(ProjectionError):
        project_query(model, [])
    with pytest.raises(ProjectionError):
        project_query(model, [42])
    assert model.lookup(["w1", "zzz", "w3"]) == [1, 3]


@pytest.mark.parametrize("n", [2, 7, 64, 1024])
def test_hs_normalization(n):
    rng = np.random.default_rng(n)
    for seed in range(100 if n < 1024 else 10):
        model = random_model(RLM, n, 4, seed=seed, scale=1.0)
        q = rng.normal(size=4)
        assert np.exp(hs_log_probs(model, q)).sum() == pytest.approx(1.0, abs=1e-9)


def test_hs_prob_with_zero_nodes():
    rng = np.random.default_rng(0)
    tree = build_huffman([4, 2, 1, 1])
    model = EmbeddingModel.initialize(RLM, list("abcd"), 3, rng, tree=tree)
    q = rng.normal(size=3)
    assert [hs_prob(model, t, q) for t in range(4)] == pytest.approx([0.5, 0.25, 0.125, 0.125])


def test_hs_prob_matches_path_walk():
    model = random_model(RLM, 8, 5, seed=2)
    q = np.random.default_rng(3).normal(size=5)
    dense = np.exp(hs_log_probs(model, q))
    for t in range(8):
        assert hs_prob(model, t, q) == pytest.approx(_walk(model, t, q), abs=1e-12)
        assert dense[t] == pytest.approx(_walk(model, t, q), abs=1e-12)
    with pytest.raises(UnknownTermError):
        hs_prob(model, 8, q)


def test_single_term_tree():
    rng = np.random.default_rng(0)
    model = EmbeddingModel.initialize(RLM, ["only"], 3, rng, tree=build_huffman([1.0]))
    q = model.query_vectors[0]
    assert hs_prob(model, 0, q) == 1.0
    assert hs_log_probs(model, q).tolist() == [0.0]


def test_softmax_prob():
    rng = np.random.default_rng(0)
    model = EmbeddingModel.initialize(RLM, list("abc"), 1, rng, output="softmax")
    model.term_vectors[:, 0] = [1.0, 0.0, 0.0]
    q = np.array([1.0])
    e = math.e
    assert [softmax_prob(model, t, q) for t in range(3)] == pytest.approx([e / (e + 2), 1 / (e + 2), 1 / (e + 2)])
    # equal rows give the uniform distribution
    model.term_vectors[:] = 0.7
    assert softmax_prob(model, 1, q) == pytest.approx(1 / 3)


def test_softmax_is_shift_invariant_and_stable():
    model = random_model(RLM, 6, 3, seed=4, output="softmax", bias=True)
    q = np.ones(3)
    before = softmax_log_probs(model, q)
    model.bias += 1000.0
    after = softmax_log_probs(model, q)
    np.testing.assert_allclose(before, after, atol=1e-9)
    assert np.all(np.isfinite(after))


def test_rpe_posteriors_monotone():
    model = random_model(RPE, 4, 2, seed=5)
    q = np.array([1.0, 0.0])
    model.term_vectors[:, 0] = [-1.0, 0.0, 0.5, 2.0]
    model.term_vectors[:, 1] = 0.0
    post = rpe_posteriors(model, q)
    assert post[1] == pytest.approx(0.5)
    assert np.all(np.diff(post) > 0)


def test_model_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        EmbeddingModel("word2vec", ["a"], np.zeros((1, 2)))
    with pytest.raises(ValueError):
        EmbeddingModel(RLM, ["a", "b"], np.zeros((2, 2)), output="hs")
    with pytest.raises(ValueError):
        EmbeddingModel.initialize(RLM, ["a", "b"], 2, rng, output="nce")

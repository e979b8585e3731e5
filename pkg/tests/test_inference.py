# -*- coding: utf-8 -*-
import numpy as np
import pytest

from src.core.exceptions import ProjectionError, UnknownTermError
from src.embedding.inference import (
    POSTERIOR,
    PROBABILITY,
    nearest_terms,
    query_terms,
    similarity,
    term_distribution,
    write_term_lists,
)
from src.embedding.model import RLM, RPE, EmbeddingModel, project_query, rlm_log_probs, rpe_posteriors
from tests.helpers import random_model


@pytest.mark.parametrize("output", ["hs", "softmax"])
def test_full_rlm_distribution_is_normalized(output):
    model = random_model(RLM, 40, 6, seed=11, output=output)
    scores = term_distribution(model, [2, 9], m=40)
    assert scores.semantics == PROBABILITY
    assert len(scores) == 40
    assert sorted(scores.term_ids) == list(range(40))
    assert sum(scores.as_dict().values()) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("kind", [RLM, RPE])
def test_top_m_matches_brute_force(kind):
    model = random_model(kind, 60, 5, seed=13)
    query = [4, 17, 17]
    q = project_query(model, query)
    raw = np.exp(rlm_log_probs(model, q)) if kind == RLM else rpe_posteriors(model, q)
    expected = sorted(range(60), key=lambda t: (-raw[t], t))[:7]

    scores = term_distribution(model, query, m=7, query_id="q1")
    assert scores.query_id == "q1"
    assert scores.term_ids == expected
    values = [s for _, s in scores.entries]
    assert values == sorted(values, reverse=True)
    assert sum(values) == pytest.approx(1.0)
    np.testing.assert_allclose(values, raw[expected] / raw[expected].sum(), rtol=1e-12)


def test_ties_are_broken_by_term_id():
    terms = ["a", "b", "c", "d"]
    rows = np.ones((4, 2))
    model = EmbeddingModel(RPE, terms, np.ones((4, 2)), term_vectors=rows)
    scores = term_distribution(model, [0], m=3)
    assert scores.semantics == POSTERIOR
    assert scores.term_ids == [0, 1, 2]
    assert scores.as_dict()[0] == pytest.approx(1 / 3)


def test_m_is_validated():
    model = random_model(RPE, 5, 2, seed=1)
    with pytest.raises(ValueError):
        term_distribution(model, [0], m=0)


def test_query_without_embeddings_is_rejected():
    model = random_model(RPE, 5, 2, seed=1)
    with pytest.raises(ProjectionError):
        term_distribution(model, [], m=2)


def test_similarity_examples():
    assert similarity([1, 0], [1, 0]) == pytest.approx(1.0)
    assert similarity([1, 0], [0, 1]) == pytest.approx(0.0)
    assert similarity([1, 0], [1, 1]) == pytest.approx(0.7071067811865475)
    with pytest.raises(ValueError):
        similarity([0, 0], [1, 1])


def test_nearest_terms_excludes_the_term_itself():
    terms = ["a", "b", "c", "d"]
    vectors = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [-1.0, 0.0]])
    model = EmbeddingModel(RPE, terms, vectors, term_vectors=np.zeros((4, 2)))
    neighbours = nearest_terms(model, "a", m=2)
    assert [t for t, _ in neighbours] == ["b", "c"]
    assert neighbours[1][1] == pytest.approx(0.0)
    assert len(nearest_terms(model, "a", m=10)) == 3
    with pytest.raises(UnknownTermError):
        nearest_terms(model, "zzz")


def test_query_terms_and_term_list_file(tmp_path):
    model = random_model(RLM, 8, 3, seed=5)
    ranked = query_terms(model, ["w1", "unknown", "w3"], m=3)
    assert len(ranked) == 3
    assert all(term in model.terms for term, _ in ranked)

    path = tmp_path / "terms.tsv"
    write_term_lists(str(path), [term_distribution(model, [1, 3], 3, query_id="7")], model.terms)
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert all(line.split("\t")[0] == "7" for line in lines)
    assert [line.split("\t")[1] for line in lines] == [t for t, _ in ranked]

# -*- coding: utf-8 -*-
import numpy as np
import pytest

from config import ClassificationConfig, ExpansionGridConfig, TrainConfig
from src.data.synthetic import planted_training_set
from src.embedding.model import RLM, RPE
from src.embedding.trainer import train
from src.pipeline.experiments import compare_models, training_sweeps

GRID = ExpansionGridConfig(alphas=[0.5, 0.8], num_terms=[5], folds=2)
CLASSIFICATION = ClassificationConfig(t_grid=[1, 2], folds=2)


@pytest.fixture(scope="module")
def planted(toy, toy_index):
    training, _ = planted_training_set(toy, toy_index.vocabulary, num_queries=60, seed=2)
    return training


@pytest.fixture(scope="module")
def models(toy_index, planted):
    rlm = train(toy_index, planted, TrainConfig(kind=RLM, dim=8, learning_rate=0.5, batch_size=1, epochs=5, seed=1))
    rpe = train(toy_index, planted, TrainConfig(kind=RPE, dim=8, learning_rate=0.3, batch_size=1, epochs=5,
                                                positives=5, negative_multiple=2, seed=1))
    return rlm, rpe


def test_comparison_reports_both_models(toy, toy_index, models, tmp_path):
    rlm, rpe = models
    comparison = compare_models(
        [("rlm", rlm), ("rpe", rpe)], toy_index, toy.queries, toy.qrels, labeled=toy.labeled,
        grid=GRID, classification=CLASSIFICATION, categories=toy.categories,
    )
    table = comparison.table()
    assert list(table["measure"]) == ["map", "P_20", "ndcg_cut_20", "precision", "f1"]
    assert list(table["task"]) == ["expansion"] * 3 + ["classification"] * 2
    assert table.loc[0, "rlm"] == pytest.approx(comparison.expansion["rlm"].expanded.loc["all", "map"])
    assert table.loc[0, "rpe"] == pytest.approx(comparison.expansion["rpe"].expanded.loc["all", "map"])
    assert table.loc[4, "rpe"] == pytest.approx(comparison.classification["rpe"].f1)
    np.testing.assert_allclose(table["difference"], table["rlm"] - table["rpe"])
    np.testing.assert_array_equal(table["sign"], np.sign(table["difference"]).astype(int))
    for row in table.to_dict("records"):
        expected = "rlm" if row["sign"] > 0 else "rpe" if row["sign"] < 0 else "tie"
        assert row["better"] == expected
    assert comparison.signs() == dict(zip(table["measure"], table["sign"]))

    path = tmp_path / "comparison.tsv"
    comparison.write(str(path))
    lines = path.read_text().splitlines()
    assert lines[0].split("\t") == ["task", "measure", "rlm", "rpe", "difference", "sign", "better", "p_value"]
    assert len(lines) == 6


def test_a_model_compared_with_itself_ties(toy, toy_index, models):
    rlm, _ = models
    table = compare_models([("a", rlm), ("b", rlm)], toy_index, toy.queries, toy.qrels, grid=GRID).table()
    assert list(table["measure"]) == ["map", "P_20", "ndcg_cut_20"]
    assert (table["sign"] == 0).all()
    assert (table["better"] == "tie").all()
    assert (table["p_value"] == 1.0).all()


def test_comparison_needs_two_named_models(toy, toy_index, models):
    rlm, rpe = models
    with pytest.raises(ValueError):
        compare_models([("rlm", rlm)], toy_index, toy.queries, toy.qrels, grid=GRID)
    with pytest.raises(ValueError):
        compare_models([("m", rlm), ("m", rpe)], toy_index, toy.queries, toy.qrels, grid=GRID)


def test_training_sweeps_retrain_per_setting(toy, toy_index, planted):
    base = TrainConfig(kind=RLM, dim=8, learning_rate=0.5, batch_size=4, epochs=2, seed=3)
    frame = training_sweeps(
        toy_index, planted, base, toy.queries, toy.qrels, dims=[4, 6], fractions=[0.5, 1.0],
        labeled=toy.labeled, alpha=0.5, num_terms=5, classification=CLASSIFICATION, categories=toy.categories,
    )
    assert list(frame["sweep"]) == ["dim", "dim", "fraction", "fraction"]
    assert list(frame["dim"]) == [4, 6, 8, 8]
    assert list(frame["queries"]) == [60, 60, 30, 60]
    for column in ("map", "P_20", "ndcg_cut_20", "f1"):
        assert frame[column].between(0, 1).all(), column


def test_training_sweeps_without_labels_leave_f1_empty(toy, toy_index, planted):
    base = TrainConfig(kind=RPE, dim=4, learning_rate=0.3, batch_size=4, epochs=1, positives=3, seed=3)
    frame = training_sweeps(toy_index, planted, base, toy.queries, toy.qrels, fractions=[0.25], num_terms=5)
    assert list(frame["sweep"]) == ["fraction"]
    assert list(frame["queries"]) == [15]
    assert frame["f1"].isna().all()


def test_training_set_sample_is_seeded_and_ordered(planted):
    ids = [e.query_id for e in planted.examples]
    half = [e.query_id for e in planted.sample(0.5, seed=1).examples]
    assert len(half) == 30
    assert half == [q for q in ids if q in set(half)]
    assert [e.query_id for e in planted.sample(0.5, seed=1).examples] == half
    assert [e.query_id for e in planted.sample(1.0).examples] == ids
    with pytest.raises(ValueError):
        planted.sample(0.0)

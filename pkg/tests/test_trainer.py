# -*- coding: utf-8 -*-
import numpy as np
import pytest

from config import TrainConfig
from src.core.exceptions import DivergenceError
from src.data.synthetic import planted_training_set, topic_collection
from src.embedding.model import RLM, RPE, project_query, rlm_log_probs
from src.embedding.trainer import Trainer, huffman_weights, train, tune_hyperparameters
from src.index.corpus import build_index


@pytest.fixture(scope="module")
def planted():
    collection = topic_collection(
        num_topics=2, docs_per_topic=100, words_per_topic=20, background_words=20, seed=3
    )
    index = build_index(collection.documents)
    training, distributions = planted_training_set(collection, index.vocabulary, num_queries=100, seed=4)
    return index, training, distributions


def _mean_kl(model, training, distributions):
    learned, uniform = [], []
    n = model.num_terms
    for example in training.examples:
        planted = distributions[example.query_id]
        log_q = rlm_log_probs(model, project_query(model, example.term_ids))
        ids = np.array(list(planted))
        p = np.array([planted[t] for t in ids])
        learned.append(float(np.sum(p * (np.log(p) - log_q[ids]))))
        uniform.append(float(np.sum(p * (np.log(p) + np.log(n)))))
    return np.mean(learned), np.mean(uniform)


def test_default_dimension():
    assert TrainConfig().dim == 300


def test_recovers_planted_distributions(planted):
    index, training, distributions = planted
    config = TrainConfig(kind=RLM, dim=10, learning_rate=0.5, batch_size=1, epochs=30, seed=1)
    model = train(index, training, config)
    learned, uniform = _mean_kl(model, training, distributions)
    assert learned * 2 <= uniform


def test_epoch_loss_decreases(planted):
    index, training, _ = planted
    config = TrainConfig(kind=RLM, dim=10, learning_rate=0.3, batch_size=1, epochs=10, seed=2)
    losses = train(index, training, config).metadata["epoch_losses"]
    assert len(losses) == 10
    increases = sum(1 for a, b in zip(losses, losses[1:]) if b > a)
    assert increases <= 1
    assert losses[-1] < losses[0]


@pytest.mark.parametrize("kind,output", [(RLM, "hs"), (RLM, "softmax"), (RPE, "hs")])
def test_single_worker_training_is_deterministic(planted, kind, output):
    index, training, _ = planted
    config = TrainConfig(kind=kind, output=output, dim=8, learning_rate=0.2, batch_size=8, epochs=2,
                         positives=5, negative_multiple=2, seed=9)
    first = train(index, training, config)
    second = train(index, training, config)
    for name, value in first.parameters().items():
        np.testing.assert_array_equal(value, second.parameters()[name])
    assert first.metadata["epoch_losses"] == second.metadata["epoch_losses"]


def test_rpe_first_epoch_starts_near_log_two(planted):
    index, training, _ = planted
    config = TrainConfig(kind=RPE, dim=8, learning_rate=1e-6, batch_size=10, epochs=1,
                         positives=4, negative_multiple=5, seed=1)
    model = train(index, training, config)
    # zero-initialized output weights: every sample starts at log 2
    assert model.metadata["epoch_losses"][0] == pytest.approx(24 * np.log(2), rel=1e-3)


def test_sampled_targets_train(planted):
    index, training, _ = planted
    config = TrainConfig(kind=RLM, dim=8, learning_rate=0.3, batch_size=2, epochs=3,
                         target_mode="sample", target_samples=10, lr_decay=True, seed=5)
    model = train(index, training, config)
    assert model.is_finite()
    assert len(model.metadata["epoch_losses"]) == 3


def test_linear_learning_rate_decay(planted):
    index, training, _ = planted
    config = TrainConfig(kind=RLM, dim=4, learning_rate=0.2, lr_decay=True, min_lr_fraction=0.01)
    trainer = Trainer(index, training, config)
    assert trainer._learning_rate(0, 10) == pytest.approx(0.2)
    assert trainer._learning_rate(5, 10) == pytest.approx(0.1)
    assert trainer._learning_rate(10, 10) == pytest.approx(0.002)
    constant = Trainer(index, training, config.model_copy(update={"lr_decay": False}))
    assert constant._learning_rate(9, 10) == pytest.approx(0.2)


def test_parallel_workers_produce_finite_model(planted):
    index, training, _ = planted
    config = TrainConfig(kind=RPE, dim=8, learning_rate=0.2, batch_size=5, epochs=2,
                         positives=5, negative_multiple=2, workers=3, seed=1)
    model = train(index, training, config)
    assert model.is_finite()
    assert len(model.metadata["epoch_losses"]) == 2


def test_divergence_is_detected(planted):
    index, training, _ = planted
    config = TrainConfig(kind=RLM, output="softmax", dim=4, learning_rate=1e200, batch_size=1, epochs=2, seed=1)
    with pytest.raises(DivergenceError):
        train(index, training, config)


def test_huffman_weights_cover_unseen_terms(planted):
    index, training, _ = planted
    weights = huffman_weights(index, training)
    mass = training.relevance_mass()
    assert np.all(weights > 0)
    seen = mass > 0
    np.testing.assert_allclose(weights[seen], mass[seen])
    assert weights[~seen].max() < mass[seen].min()


def test_tuning_prefers_lowest_final_loss(planted):
    index, training, _ = planted
    base = TrainConfig(kind=RLM, dim=8, epochs=3, seed=1)
    best, table = tune_hyperparameters(index, training, base, learning_rates=[1e-6, 0.5], batch_sizes=[4])
    assert best.learning_rate == 0.5
    assert len(table) == 2
    assert table["final_loss"].min() == pytest.approx(table.loc[table["learning_rate"] == 0.5, "final_loss"].iloc[0])

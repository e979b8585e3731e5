# -*- coding: utf-8 -*-
import math

import numpy as np
import pytest

from src.embedding.model import RLM, RPE, log_sigmoid, project_query, rlm_log_probs, hs_prob
from src.embedding.trainer import rlm_gradient, rlm_step, rpe_gradient, rpe_step
from src.data.sampling import AliasSampler
from src.relevance.relevance_model import RelevanceDistribution
from tests.helpers import random_model

EPS = 1e-4


def _rlm_loss(model, query, target):
    ids, weights = target.arrays()
    log_p = rlm_log_probs(model, project_query(model, query))
    return -float(np.dot(weights, log_p[ids]))


def _rpe_loss(model, query, positives, negatives):
    q = project_query(model, query)
    z = model.logits(q)
    return -float(log_sigmoid(z[positives]).sum() + log_sigmoid(-z[negatives]).sum())


def _finite_differences(model, loss_fn):
    grads = {}
    for name, param in model.parameters().items():
        grad = np.zeros_like(param)
        for idx in np.ndindex(param.shape):
            old = param[idx]
            param[idx] = old + EPS
            up = loss_fn(model)
            param[idx] = old - EPS
            down = loss_fn(model)
            param[idx] = old
            grad[idx] = (up - down) / (2 * EPS)
        grads[name] = grad
    return grads


def _relative_error(a, b):
    scale = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if scale == 0 else np.linalg.norm(a - b) / scale


def _random_target(rng, n):
    support = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
    probs = rng.random(len(support)) + 0.05
    probs /= probs.sum()
    return RelevanceDistribution("q", {int(t): float(p) for t, p in zip(support, probs)}, num_docs=1)


@pytest.mark.parametrize("output", ["hs", "softmax"])
def test_rlm_gradient_matches_finite_differences(output):
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        model = random_model(RLM, 6, 5, seed=seed, output=output, bias=output == "softmax")
        query = list(rng.integers(0, 6, size=int(rng.integers(1, 4))))
        target = _random_target(rng, 6)
        loss, grad = rlm_gradient(model, query, target)
        assert loss == pytest.approx(_rlm_loss(model, query, target), rel=1e-10)
        numeric = _finite_differences(model, lambda m: _rlm_loss(m, query, target))
        analytic = grad.dense(model)
        for name in numeric:
            # the sparse gradient is the ascent direction of the objective
            worst = max(worst, _relative_error(analytic[name], -numeric[name]))
    assert worst < 1e-4


@pytest.mark.parametrize("bias", [False, True])
def test_rpe_gradient_matches_finite_differences(bias):
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(100 + seed)
        model = random_model(RPE, 6, 5, seed=seed, bias=bias)
        query = list(rng.integers(0, 6, size=int(rng.integers(1, 4))))
        positives = rng.integers(0, 6, size=int(rng.integers(0, 4)))
        negatives = rng.integers(0, 6, size=int(rng.integers(1, 6)))
        loss, grad = rpe_gradient(model, query, positives, negatives)
        assert loss == pytest.approx(_rpe_loss(model, query, positives, negatives), rel=1e-10)
        numeric = _finite_differences(model, lambda m: _rpe_loss(m, query, positives, negatives))
        analytic = grad.dense(model)
        for name in numeric:
            worst = max(worst, _relative_error(analytic[name], -numeric[name]))
    assert worst < 1e-4


def test_rpe_loss_at_zero_output_weights():
    model = random_model(RPE, 30, 8, seed=1)
    model.term_vectors[:] = 0.0
    rng = np.random.default_rng(2)
    positives = rng.integers(0, 30, size=20)
    negatives = rng.integers(0, 30, size=100)
    loss, _ = rpe_gradient(model, [3, 4], positives, negatives)
    assert loss == pytest.approx(120 * math.log(2), rel=1e-12)


def test_rpe_needs_samples():
    model = random_model(RPE, 4, 2, seed=0)
    with pytest.raises(ValueError):
        rpe_gradient(model, [0], [], [])
    with pytest.raises(ValueError):
        rlm_gradient(model, [0], RelevanceDistribution("q", {0: 1.0}, 1))


def test_zero_learning_rate_leaves_parameters():
    model = random_model(RLM, 6, 4, seed=3)
    before = {k: v.copy() for k, v in model.parameters().items()}
    loss = rlm_step(model, [1, 2], RelevanceDistribution("q", {0: 0.7, 5: 0.3}, 1), lr=0.0)
    assert math.isfinite(loss)
    for name, value in model.parameters().items():
        np.testing.assert_array_equal(value, before[name])


def test_rlm_steps_raise_target_probability():
    model = random_model(RLM, 2, 3, seed=4, scale=0.1)
    target = RelevanceDistribution("q", {1: 1.0}, 1)
    probs = []
    for _ in range(30):
        probs.append(hs_prob(model, 1, project_query(model, [0])))
        rlm_step(model, [0], target, lr=0.05)
    assert all(b > a for a, b in zip(probs, probs[1:]))


def test_rpe_steps_raise_positive_posterior():
    model = random_model(RPE, 3, 3, seed=5, scale=0.1)
    posts = []
    for _ in range(30):
        q = project_query(model, [0])
        posts.append(1.0 / (1.0 + math.exp(-float(model.term_vectors[2] @ q))))
        rpe_step(model, [0], [2], [], lr=0.05)
    assert all(b > a for a, b in zip(posts, posts[1:]))
    assert posts[-1] > posts[0]


def test_sampled_targets_agree_in_expectation():
    model = random_model(RLM, 6, 4, seed=6)
    target = RelevanceDistribution("q", {0: 0.5, 2: 0.3, 5: 0.2}, 1)
    exact = rlm_gradient(model, [1, 3], target)[1].dense(model)
    ids, probs = target.arrays()
    sampler = AliasSampler(probs, outcomes=ids)
    rng = np.random.default_rng(7)
    reps, size = 2000, 10
    total = {k: np.zeros_like(v) for k, v in exact.items()}
    for _ in range(reps):
        draws = sampler.draw(size, rng)
        grad = rlm_gradient(model, [1, 3], (draws, np.full(size, 1.0 / size)))[1].dense(model)
        for k in total:
            total[k] += grad[k]
    for k in exact:
        np.testing.assert_allclose(total[k] / reps, exact[k], atol=0.02)

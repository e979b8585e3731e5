# -*- coding: utf-8 -*-
"""
Objectives and stochastic gradient training for the two embedding models.

RLM maximizes sum_{w in V_i} p(w|R_i) log p(w|q_i), through the hierarchical
softmax or the exact softmax. RPE maximizes
sum_pos log sigmoid(w.q) + sum_neg log(1 - sigmoid(w.q)) with positives drawn
from p(w|R_i) and negatives from the noise distribution.

Gradients are kept row-sparse. A mini-batch averages the gradients of its
queries, all evaluated at the parameters from before the batch, and applies
them once. With several workers, batches are processed concurrently and
write to the shared parameters without locking.
"""

import itertools
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import expit, log_softmax
from tqdm import tqdm

from config import TrainConfig
from src.core.exceptions import DivergenceError, EmptyFeedbackError
from src.data.dataset import TrainingSet, noise_distribution
from src.data.sampling import AliasSampler
from src.embedding.huffman import build_huffman
from src.embedding.model import RLM, RPE, EmbeddingModel, log_sigmoid, project_query
from src.index.corpus import CorpusIndex
from src.relevance.relevance_model import RelevanceDistribution
from src.utils.logging import get_logger

logger = get_logger(__name__)

# logits are clipped before the sigmoid in the update rules
MAX_LOGIT = 30.0

Target = Union[RelevanceDistribution, Tuple[np.ndarray, np.ndarray]]


class SparseGradient:
    """Ascent direction of the objective, stored as (rows, values) per parameter."""

    def __init__(self):
        self._rows: Dict[str, List[np.ndarray]] = defaultdict(list)
        self._values: Dict[str, List[np.ndarray]] = defaultdict(list)

    def add(self, name: str, rows: np.ndarray, values: np.ndarray) -> None:
        self._rows[name].append(np.asarray(rows, dtype=np.int64))
        self._values[name].append(np.asarray(values, dtype=np.float64))

    def merge(self, other: "SparseGradient", scale: float = 1.0) -> None:
        for name in other._rows:
            for rows, values in zip(other._rows[name], other._values[name]):
                self.add(name, rows, values * scale)

    def dense(self, model: EmbeddingModel) -> Dict[str, np.ndarray]:
        out = {}
        for name, param in model.parameters().items():
            grad = np.zeros_like(param)
            if name in self._rows:
                np.add.at(grad, np.concatenate(self._rows[name]), np.concatenate(self._values[name]))
            out[name] = grad
        return out

    def apply(self, model: EmbeddingModel, lr: float) -> None:
        params = model.parameters()
        for name in self._rows:
            rows = np.concatenate(self._rows[name])
            values = np.concatenate(self._values[name])
            np.add.at(params[name], rows, lr * values)


def _query_rows(model: EmbeddingModel, query: Sequence[int]) -> np.ndarray:
    return np.array([t for t in query if 0 <= t < model.num_terms], dtype=np.int64)


def _add_query_gradient(grad: SparseGradient, rows: np.ndarray, grad_q: np.ndarray) -> None:
    # each token occurrence contributes 1/|q| of the projection
    grad.add("query_vectors", rows, np.tile(grad_q / len(rows), (len(rows), 1)))


def rlm_gradient(model: EmbeddingModel, query: Sequence[int], target: Target) -> Tuple[float, SparseGradient]:
    """
    Negated RLM objective and its ascent gradient at the current parameters.

    ``target`` is a RelevanceDistribution (exact weighted sum over its
    support) or explicit ``(term ids, weights)``, e.g. sampled targets.
    """
    if model.kind != RLM:
        raise ValueError("rlm_gradient needs an RLM model")
    if isinstance(target, RelevanceDistribution):
        ids, weights = target.arrays()
    else:
        ids, weights = (np.asarray(a) for a in target)
    if len(ids) == 0:
        raise EmptyFeedbackError("empty RLM target")
    rows = _query_rows(model, query)
    q = project_query(model, rows)
    grad = SparseGradient()

    if model.uses_tree:
        tree = model.tree
        mask = tree.mask[ids]
        points = tree.point_matrix[ids][mask]
        signs = tree.sign_matrix[ids][mask]
        edge_weights = np.broadcast_to(weights[:, None], mask.shape)[mask]
        if len(points) == 0:
            # single-term vocabulary: p(w|q) = 1 and nothing to learn
            return 0.0, grad
        nodes = model.node_vectors[points]
        z = np.clip(nodes @ q, -MAX_LOGIT, MAX_LOGIT)
        loss = -float(np.dot(edge_weights, log_sigmoid(signs * z)))
        g = edge_weights * signs * expit(-signs * z)
        grad.add("node_vectors", points, np.outer(g, q))
        grad_q = g @ nodes
    else:
        logits = model.logits(q)
        log_p = log_softmax(logits)
        loss = -float(np.dot(weights, log_p[ids]))
        g = -np.exp(log_p) * weights.sum()
        np.add.at(g, ids, weights)
        all_rows = np.arange(model.num_terms)
        grad.add("term_vectors", all_rows, np.outer(g, q))
        if model.bias is not None:
            grad.add("bias", all_rows, g)
        grad_q = g @ model.term_vectors

    _add_query_gradient(grad, rows, grad_q)
    return loss, grad


def rpe_gradient(
    model: EmbeddingModel,
    query: Sequence[int],
    positives: Sequence[int],
    negatives: Sequence[int],
) -> Tuple[float, SparseGradient]:
    """Negated RPE objective and its ascent gradient at the current parameters."""
    if model.kind != RPE:
        raise ValueError("rpe_gradient needs an RPE model")
    positives = np.asarray(positives, dtype=np.int64)
    negatives = np.asarray(negatives, dtype=np.int64)
    if len(positives) == 0 and len(negatives) == 0:
        raise ValueError("RPE step needs at least one positive or negative sample")
    rows = _query_rows(model, query)
    q = project_query(model, rows)

    ids = np.concatenate([positives, negatives])
    labels = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))])
    vectors = model.term_vectors[ids]
    z = vectors @ q
    if model.bias is not None:
        z = z + model.bias[ids]
    z = np.clip(z, -MAX_LOGIT, MAX_LOGIT)
    signs = 2.0 * labels - 1.0
    loss = -float(log_sigmoid(signs * z).sum())
    g = labels - expit(z)

    grad = SparseGradient()
    grad.add("term_vectors", ids, np.outer(g, q))
    if model.bias is not None:
        grad.add("bias", ids, g)
    _add_query_gradient(grad, rows, g @ vectors)
    return loss, grad


def rlm_step(model: EmbeddingModel, query: Sequence[int], target: Target, lr: float) -> float:
    """One gradient-ascent step on a single query; returns the loss before the update."""
    loss, grad = rlm_gradient(model, query, target)
    grad.apply(model, lr)
    return loss


def rpe_step(
    model: EmbeddingModel,
    query: Sequence[int],
    positives: Sequence[int],
    negatives: Sequence[int],
    lr: float,
) -> float:
    """One gradient-ascent step on a single query; returns the loss before the update."""
    loss, grad = rpe_gradient(model, query, positives, negatives)
    grad.apply(model, lr)
    return loss


def huffman_weights(index: CorpusIndex, training: TrainingSet) -> np.ndarray:
    """
    Aggregate relevance mass per term. Terms outside every relevance support
    fall back to their collection probability scaled below the smallest
    observed mass, so they sit deepest in the tree.
    """
    mass = training.relevance_mass()
    unseen = mass <= 0
    if np.any(unseen):
        floor = mass[~unseen].min() if np.any(~unseen) else 1.0
        fallback = np.maximum(index.collection_prob, 1.0 / max(index.vocabulary.total_tokens, 1))
        mass = mass.copy()
        mass[unseen] = floor * fallback[unseen]
    return mass


class _Sampler:
    """Per-query positive samplers and the shared noise sampler."""

    def __init__(self, training: TrainingSet, noise: Optional[np.ndarray]):
        self.training = training
        self._positives: Dict[int, AliasSampler] = {}
        self.noise = None
        if noise is not None:
            support = np.nonzero(noise)[0]
            self.noise = AliasSampler(noise[support], outcomes=support)

    def relevance(self, i: int) -> AliasSampler:
        sampler = self._positives.get(i)
        if sampler is None:
            ids, probs = self.training.examples[i].relevance.arrays()
            sampler = AliasSampler(probs, outcomes=ids)
            self._positives[i] = sampler
        return sampler


class Trainer:
    """
    Stochastic gradient training of an EmbeddingModel on a TrainingSet.

    ``workers == 1`` is fully deterministic for a given seed. More workers
    trade reproducibility for throughput.
    """

    def __init__(
        self,
        index: CorpusIndex,
        training: TrainingSet,
        config: TrainConfig,
        noise: Optional[np.ndarray] = None,
        progress: bool = False,
    ):
        if len(training) == 0:
            raise EmptyFeedbackError("training set is empty")
        if training.num_terms != index.num_terms:
            raise ValueError("training set and index vocabularies differ")
        self.index = index
        self.training = training
        self.config = config
        self.progress = progress
        if config.kind == RPE and noise is None:
            noise = noise_distribution(training, config.noise_exponent)
        self.sampler = _Sampler(training, noise if config.kind == RPE else None)
        self.epoch_losses: List[float] = []

    def build_model(self, rng: np.random.Generator) -> EmbeddingModel:
        config = self.config
        tree = None
        if config.kind == RLM and config.output == "hs":
            tree = build_huffman(huffman_weights(self.index, self.training))
            logger.info(f"Huffman tree over {tree.num_leaves} terms, maximum depth {tree.max_depth}")
        return EmbeddingModel.initialize(
            config.kind,
            self.training.vocabulary.terms,
            config.dim,
            rng,
            output=config.output,
            bias=config.bias,
            tree=tree,
            metadata={"seed": config.seed},
        )

    def _query_gradient(self, i: int, rng: np.random.Generator, model: EmbeddingModel):
        config = self.config
        example = self.training.examples[i]
        if config.kind == RLM:
            if config.target_mode == "sample":
                draws = self.sampler.relevance(i).draw(config.target_samples, rng)
                target = (draws, np.full(len(draws), 1.0 / len(draws)))
            else:
                target = example.relevance
            return rlm_gradient(model, example.term_ids, target)
        positives = self.sampler.relevance(i).draw(config.positives, rng)
        negatives = self.sampler.noise.draw(config.negatives, rng)
        return rpe_gradient(model, example.term_ids, positives, negatives)

    def _run_batch(self, model: EmbeddingModel, batch: np.ndarray, lr: float, rng: np.random.Generator) -> float:
        total = SparseGradient()
        loss_sum = 0.0
        for i in batch:
            loss, grad = self._query_gradient(int(i), rng, model)
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss on query '{self.training.examples[int(i)].query_id}'"
                )
            loss_sum += loss
            total.merge(grad)
        # batch-mean gradient
        total.apply(model, lr / len(batch))
        return loss_sum

    def _learning_rate(self, done: int, total: int) -> float:
        config = self.config
        if not config.lr_decay:
            return config.learning_rate
        return config.learning_rate * max(config.min_lr_fraction, 1.0 - done / total)

    def train(self) -> EmbeddingModel:
        config = self.config
        rng = np.random.default_rng(config.seed)
        model = self.build_model(rng)
        m = len(self.training)
        total_batches = config.epochs * math.ceil(m / config.batch_size)
        done = 0
        logger.info(
            f"Training {config.kind.upper()} (d={config.dim}, lr={config.learning_rate}, "
            f"batch={config.batch_size}, epochs={config.epochs}, workers={config.workers}) on {m} queries"
        )

        for epoch in tqdm(range(config.epochs), desc="epochs", disable=not self.progress):
            order = rng.permutation(m)
            batches = [order[i:i + config.batch_size] for i in range(0, m, config.batch_size)]
            if config.workers == 1:
                loss_sum = 0.0
                for batch in batches:
                    loss_sum += self._run_batch(model, batch, self._learning_rate(done, total_batches), rng)
                    done += 1
            else:
                loss_sum = self._run_parallel(model, batches, epoch, done, total_batches)
                done += len(batches)

            mean_loss = float(loss_sum / m)
            if not math.isfinite(mean_loss) or not model.is_finite():
                raise DivergenceError(f"training diverged in epoch {epoch + 1} (mean loss {mean_loss})")
            self.epoch_losses.append(mean_loss)
            logger.info(f"Epoch {epoch + 1}/{config.epochs}: mean loss {mean_loss:.6f}")

        model.metadata.update({"epoch_losses": list(self.epoch_losses), "config": config.model_dump()})
        return model

    def _run_parallel(self, model, batches, epoch: int, done: int, total_batches: int) -> float:
        workers = self.config.workers
        shards = [batches[w::workers] for w in range(workers)]

        def _work(w: int) -> float:
            rng = np.random.default_rng([self.config.seed, epoch, w])
            loss = 0.0
            for j, batch in enumerate(shards[w]):
                lr = self._learning_rate(done + j * workers + w, total_batches)
                loss += self._run_batch(model, batch, lr, rng)
            return loss

        with ThreadPoolExecutor(max_workers=workers) as executor:
            return sum(executor.map(_work, range(workers)))


def train(
    index: CorpusIndex,
    training: TrainingSet,
    config: TrainConfig,
    noise: Optional[np.ndarray] = None,
    progress: bool = False,
) -> EmbeddingModel:
    """Train a model from scratch; per-epoch mean losses end up in ``model.metadata``."""
    return Trainer(index, training, config, noise=noise, progress=progress).train()


def tune_hyperparameters(
    index: CorpusIndex,
    training: TrainingSet,
    base: TrainConfig,
    learning_rates: Sequence[float] = (0.001, 0.01, 0.1, 1.0),
    batch_sizes: Sequence[int] = (64, 128, 256),
    positives: Optional[Sequence[int]] = None,
    negative_multiples: Optional[Sequence[int]] = None,
    noise: Optional[np.ndarray] = None,
) -> Tuple[TrainConfig, pd.DataFrame]:
    """
    Grid search keeping the setting with the smallest final training loss.
    The eta grids only apply to RPE. Diverging settings score +inf.
    """
    if base.kind == RPE:
        positives = positives or (base.positives,)
        negative_multiples = negative_multiples or (base.negative_multiple,)
    else:
        positives, negative_multiples = (base.positives,), (base.negative_multiple,)

    rows = []
    best, best_loss = None, math.inf
    for lr, batch, pos, neg in itertools.product(learning_rates, batch_sizes, positives, negative_multiples):
        config = base.model_copy(
            update={"learning_rate": lr, "batch_size": batch, "positives": pos, "negative_multiple": neg}
        )
        try:
            model = train(index, training, config, noise=noise)
            loss = model.metadata["epoch_losses"][-1]
        except DivergenceError as e:
            logger.warning(f"lr={lr} batch={batch} diverged: {e}")
            loss = math.inf
        rows.append({"learning_rate": lr, "batch_size": batch, "positives": pos,
                     "negative_multiple": neg, "final_loss": loss})
        if loss < best_loss:
            best, best_loss = config, loss
    if best is None:
        raise DivergenceError("every hyper-parameter setting diverged")
    logger.info(f"Selected lr={best.learning_rate}, batch={best.batch_size} (loss {best_loss:.6f})")
    return best, pd.DataFrame(rows)

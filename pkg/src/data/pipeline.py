# -*- coding: utf-8 -*-
import os
from concurrent.futures import ThreadPoolExecutor
from typing import AbstractSet, Iterable, List, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from config import RunConfig
from src.core.exceptions import EmptyQueryError, NoUsableQueriesError
from src.data.dataset import TrainingExample, TrainingSet, noise_distribution, write_training_set
from src.index.corpus import CorpusIndex
from src.index.tokenizer import load_stopwords, tokenize
from src.relevance.relevance_model import estimate_rm
from src.retrieval.language_model import DEFAULT_MU, ql_retrieve
from src.retrieval.trec import read_queries
from src.utils.logging import get_logger

logger = get_logger(__name__)

QueryItem = Union[str, Tuple[str, str]]


def _as_pairs(queries: Iterable[QueryItem]) -> List[Tuple[str, str]]:
    pairs = []
    for n, item in enumerate(queries, start=1):
        pairs.append((f"q{n}", item) if isinstance(item, str) else (item[0], item[1]))
    return pairs


def generate_training_set(
    index: CorpusIndex,
    queries: Iterable[QueryItem],
    k: int = 10,
    mu: float = DEFAULT_MU,
    stopwords: AbstractSet[str] = frozenset(),
    max_terms: Optional[int] = None,
    workers: int = 1,
    progress: bool = False,
) -> TrainingSet:
    """
    Retrieve the top-k documents for every query and estimate its relevance
    model. Queries without in-vocabulary terms are skipped and counted.

    Queries are processed concurrently; results are merged in input order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pairs = _as_pairs(queries)

    def _process(pair):
        qid, text = pair
        tokens = tokenize(text, stopwords)
        try:
            topk = ql_retrieve(index, tokens, k, mu, query_id=qid)
            relevance = estimate_rm(index, tokens, topk, mu, max_terms=max_terms, query_id=qid)
        except EmptyQueryError:
            return qid, None, None
        example = TrainingExample(qid, " ".join(tokens), index.vocabulary.lookup(tokens), relevance)
        return qid, example, topk.doc_ids

    examples: List[TrainingExample] = []
    skipped: List[str] = []
    unigram = np.zeros(index.num_terms, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = executor.map(_process, pairs)
        for qid, example, doc_ids in tqdm(results, total=len(pairs), desc="training pairs", disable=not progress):
            if example is None:
                skipped.append(qid)
                continue
            examples.append(example)
            for doc_id in doc_ids:
                terms, counts = index.doc_terms(doc_id)
                unigram[terms] += counts

    if skipped:
        logger.warning(f"Skipped {len(skipped)} queries without in-vocabulary terms")
    if not examples:
        raise NoUsableQueriesError("no query produced a training pair")
    logger.info(f"Generated {len(examples)} training pairs from {len(pairs)} queries")
    return TrainingSet(index.vocabulary, examples, unigram, skipped)


class ConcurrentTrainingPipeline:
    """
    Builds the offline training directory for a run config: index + cleaned
    queries in, training pairs, noise table, unigram table and manifest out.
    """

    def __init__(self, config: RunConfig, index: Optional[CorpusIndex] = None):
        self.config = config
        self.index = index
        self.output_dir = config.paths.training

    def run(self) -> TrainingSet:
        logger.info("Starting training-set generation...")
        paths = self.config.require("train_queries")
        if self.index is None:
            self.index = CorpusIndex.load(self.config.require("index")["index"])
        stopwords = load_stopwords(self.config.paths.stopwords)
        retrieval = self.config.retrieval

        training = generate_training_set(
            self.index,
            read_queries(paths["train_queries"]),
            k=retrieval.k,
            mu=retrieval.mu,
            stopwords=stopwords,
            max_terms=retrieval.max_terms,
            workers=self.config.workers,
            progress=self.config.progress,
        )
        noise = noise_distribution(training, self.config.training.noise_exponent)
        os.makedirs(self.output_dir, exist_ok=True)
        write_training_set(
            training,
            self.output_dir,
            noise,
            manifest={"config": self.config.echo()},
            noise_exponent=self.config.training.noise_exponent,
        )
        logger.info("Training-set generation completed successfully.")
        return training

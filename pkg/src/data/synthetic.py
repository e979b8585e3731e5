# -*- coding: utf-8 -*-
"""
Deterministic topic-clustered toy collections.

Every topic owns a block of words with Zipf-shaped frequencies; documents mix
their topic's words with shared background words. Queries are short draws
from one topic, judged relevant to every document of that topic and labeled
with the topic's category.
"""

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.classification.query_classification import LabelSet, write_labeled_queries
from src.data.dataset import TrainingExample, TrainingSet
from src.evaluation.metrics import Qrels
from src.index.corpus import Vocabulary
from src.relevance.relevance_model import RelevanceDistribution
from src.retrieval.trec import write_qrels, write_queries
from src.utils.logging import get_logger

logger = get_logger(__name__)

TOY_FILES = {
    "corpus": "corpus.tsv",
    "query_log": "query_log.txt",
    "queries": "queries.tsv",
    "qrels": "qrels.txt",
    "labels": "labels.tsv",
    "categories": "categories.txt",
}


def _zipf(n: int) -> np.ndarray:
    weights = 1.0 / np.arange(1, n + 1)
    return weights / weights.sum()


@dataclass
class SyntheticCollection:
    documents: List[Tuple[str, str]]
    doc_topics: Dict[str, int]
    topic_words: List[List[str]]
    background: List[str]
    query_log: List[str]
    queries: List[Tuple[str, str]]
    query_topics: Dict[str, int]
    qrels: Qrels
    labeled: List[LabelSet]
    categories: List[str]
    topic_share: float = 0.8
    paths: Dict[str, str] = field(default_factory=dict)

    @property
    def num_topics(self) -> int:
        return len(self.topic_words)

    def topic_distribution(self, topic: int) -> Dict[str, float]:
        """Word distribution of one topic, background words excluded."""
        return dict(zip(self.topic_words[topic], _zipf(len(self.topic_words[topic]))))

    def write(self, directory: str) -> Dict[str, str]:
        os.makedirs(directory, exist_ok=True)
        paths = {name: os.path.join(directory, filename) for name, filename in TOY_FILES.items()}
        with open(paths["corpus"], "w", encoding="utf-8") as f:
            for doc_id, text in self.documents:
                f.write(f"{doc_id}\t{text}\n")
        with open(paths["query_log"], "w", encoding="utf-8") as f:
            f.writelines(q + "\n" for q in self.query_log)
        write_queries(self.queries, paths["queries"])
        write_qrels(self.qrels, paths["qrels"])
        write_labeled_queries(self.labeled, paths["labels"])
        with open(paths["categories"], "w", encoding="utf-8") as f:
            f.writelines(c + "\n" for c in self.categories)
        self.paths = paths
        logger.info(f"Wrote toy collection ({len(self.documents)} documents) to {directory}")
        return paths


def topic_collection(
    num_topics: int = 2,
    docs_per_topic: int = 100,
    words_per_topic: int = 30,
    background_words: int = 20,
    doc_length: Tuple[int, int] = (40, 80),
    topic_share: float = 0.8,
    log_queries: int = 200,
    navigational: int = 10,
    test_queries: int = 40,
    labeled_per_topic: int = 10,
    query_length: int = 2,
    seed: int = 1,
) -> SyntheticCollection:
    rng = np.random.default_rng(seed)
    topic_words = [[f"t{k}w{j:02d}" for j in range(words_per_topic)] for k in range(num_topics)]
    background = [f"bg{j:02d}" for j in range(background_words)]
    word_probs = _zipf(words_per_topic)

    documents, doc_topics = [], {}
    for k in range(num_topics):
        for i in range(docs_per_topic):
            length = int(rng.integers(doc_length[0], doc_length[1] + 1))
            from_topic = rng.random(length) < topic_share
            topical = rng.choice(words_per_topic, size=length, p=word_probs)
            shared = rng.integers(0, background_words, size=length)
            tokens = [topic_words[k][t] if use else background[b] for use, t, b in zip(from_topic, topical, shared)]
            doc_id = f"d{k}_{i:03d}"
            documents.append((doc_id, " ".join(tokens)))
            doc_topics[doc_id] = k

    def _query(k: int) -> str:
        words = rng.choice(words_per_topic, size=query_length, replace=False, p=word_probs)
        return " ".join(topic_words[k][w] for w in words)

    query_log = [_query(int(rng.integers(num_topics))) for _ in range(log_queries)]
    for n in range(navigational):
        query_log.insert(int(rng.integers(len(query_log) + 1)), f"www.site{n}.com")

    queries, query_topics, qrels = [], {}, Qrels()
    for n in range(test_queries):
        k = n % num_topics
        qid = f"{n + 1:03d}"
        queries.append((qid, _query(k)))
        query_topics[qid] = k
        for doc_id, topic in doc_topics.items():
            if topic == k:
                qrels.add(qid, doc_id, 1)

    categories = [f"topic{k}" for k in range(num_topics)]
    labeled = []
    for n in range(labeled_per_topic * num_topics):
        k = n % num_topics
        labeled.append(LabelSet(f"c{n + 1:03d}", _query(k), [[categories[k]], [categories[k]]]))

    return SyntheticCollection(
        documents=documents,
        doc_topics=doc_topics,
        topic_words=topic_words,
        background=background,
        query_log=query_log,
        queries=queries,
        query_topics=query_topics,
        qrels=qrels,
        labeled=labeled,
        categories=categories,
        topic_share=topic_share,
    )


def planted_training_set(
    collection: SyntheticCollection,
    vocabulary: Vocabulary,
    num_queries: int = 100,
    query_length: int = 2,
    seed: int = 1,
    unigram: Optional[np.ndarray] = None,
) -> Tuple[TrainingSet, Dict[str, Dict[int, float]]]:
    """
    Training pairs whose relevance distribution is the planted word
    distribution of the query's topic. Returns the set and the planted
    distributions by query id (as vocabulary ids).
    """
    rng = np.random.default_rng(seed)
    planted_by_topic = []
    for k in range(collection.num_topics):
        dist = {vocabulary.id(w): p for w, p in collection.topic_distribution(k).items() if w in vocabulary}
        total = sum(dist.values())
        planted_by_topic.append({t: p / total for t, p in dist.items()})

    examples, planted = [], {}
    for n in range(num_queries):
        k = n % collection.num_topics
        ids, probs = zip(*sorted(planted_by_topic[k].items()))
        draw = rng.choice(len(ids), size=min(query_length, len(ids)), replace=False, p=np.array(probs))
        term_ids = [int(ids[i]) for i in draw]
        qid = f"p{n + 1:03d}"
        text = " ".join(vocabulary.terms[t] for t in term_ids)
        examples.append(TrainingExample(qid, text, term_ids, RelevanceDistribution(qid, planted_by_topic[k], num_docs=0)))
        planted[qid] = planted_by_topic[k]

    if unigram is None:
        unigram = np.asarray(vocabulary.coll_freq, dtype=np.int64)
    return TrainingSet(vocabulary, examples, unigram), planted

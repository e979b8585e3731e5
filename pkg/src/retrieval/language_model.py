# -*- coding: utf-8 -*-
"""
Language-model retrieval over a CorpusIndex: query likelihood and
KL-divergence ranking, both with Dirichlet-smoothed document models.

Only documents containing at least one query term are scored. Equal scores
are ordered by ascending document id.
"""

import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.core.exceptions import EmptyQueryError
from src.index.corpus import CorpusIndex
from src.utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_MU = 1500.0


@dataclass
class QueryLanguageModel:
    """Sparse p(w|theta_q) keyed by index term id."""

    probs: Dict[int, float]
    fallback: bool = False

    def __post_init__(self):
        if not self.probs:
            raise EmptyQueryError("query language model is empty")
        if any(p <= 0 for p in self.probs.values()):
            raise ValueError("query language model probabilities must be positive")
        total = math.fsum(self.probs.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"query language model sums to {total}, not 1")

    @classmethod
    def from_term_ids(cls, term_ids: Sequence[int]) -> "QueryLanguageModel":
        """Maximum-likelihood model of a keyword query."""
        if not term_ids:
            raise EmptyQueryError("query has no in-vocabulary terms")
        counts = Counter(term_ids)
        n = len(term_ids)
        return cls({t: c / n for t, c in counts.items()})

    def __len__(self) -> int:
        return len(self.probs)

    def top(self, n: Optional[int] = None) -> List[Tuple[int, float]]:
        items = sorted(self.probs.items(), key=lambda kv: (-kv[1], kv[0]))
        return items if n is None else items[:n]


@dataclass
class RankedList:
    query_id: str
    entries: List[Tuple[str, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[str, float]]:
        return iter(self.entries)

    @property
    def doc_ids(self) -> List[str]:
        return [d for d, _ in self.entries]


def dirichlet_prob(index: CorpusIndex, term_id: int, doc_id: str, mu: float = DEFAULT_MU) -> float:
    """(c(w,d) + mu * p(w|C)) / (|d| + mu)."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    length = index.doc_length(doc_id)
    count = index.term_count(term_id, doc_id)
    return (count + mu * index.collection_prob[term_id]) / (length + mu)


def _score(
    index: CorpusIndex, weights: Mapping[int, float], mu: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Sum_w weight(w) * log p_mu(w|d) for every document sharing a term with ``weights``."""
    candidates = np.unique(np.concatenate([index.postings(t)[0] for t in weights]))
    denom = index.doc_lengths[candidates] + mu
    scores = np.zeros(len(candidates), dtype=np.float64)
    tf = np.zeros(len(candidates), dtype=np.float64)
    for term_id, weight in weights.items():
        docs, counts = index.postings(term_id)
        tf[:] = 0.0
        tf[np.searchsorted(candidates, docs)] = counts
        scores += weight * np.log((tf + mu * index.collection_prob[term_id]) / denom)
    return candidates, scores


def _rank(index: CorpusIndex, query_id: str, candidates, scores, k: int) -> RankedList:
    if len(candidates) > k:
        # keep every candidate tied with the k-th score so the id tie-break is exact
        threshold = np.partition(scores, len(scores) - k)[len(scores) - k]
        keep = np.nonzero(scores >= threshold)[0]
    else:
        keep = np.arange(len(candidates))
    doc_ids = index.doc_ids
    order = sorted(keep, key=lambda i: (-scores[i], doc_ids[candidates[i]]))[:k]
    return RankedList(query_id, [(doc_ids[candidates[i]], float(scores[i])) for i in order])


def ql_retrieve(
    index: CorpusIndex,
    query: Sequence[str],
    k: int,
    mu: float = DEFAULT_MU,
    query_id: str = "",
) -> RankedList:
    """
    Rank by sum_{w in q} c(w,q) * log p_mu(w|d).

    Raises EmptyQueryError when no query token is in the vocabulary, which is
    distinct from an empty ranking.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    term_ids = index.vocabulary.lookup(query)
    if not term_ids:
        raise EmptyQueryError(f"query '{query_id}' has no in-vocabulary terms")
    weights = dict(Counter(term_ids))
    candidates, scores = _score(index, weights, mu)
    return _rank(index, query_id, candidates, scores, k)


def kl_retrieve(
    index: CorpusIndex,
    qlm: QueryLanguageModel,
    k: int,
    mu: float = DEFAULT_MU,
    query_id: str = "",
) -> RankedList:
    """Rank by sum_w p(w|theta_q) * log p_mu(w|d) over the model's support."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n_terms = index.num_terms
    weights = {t: p for t, p in qlm.probs.items() if 0 <= t < n_terms}
    if not weights:
        raise EmptyQueryError(f"query model '{query_id}' has no in-vocabulary terms")
    candidates, scores = _score(index, weights, mu)
    return _rank(index, query_id, candidates, scores, k)


def batch_retrieve(
    index: CorpusIndex,
    queries: Sequence[Tuple[str, Sequence[str]]],
    k: int,
    mu: float = DEFAULT_MU,
    workers: int = 1,
) -> Dict[str, RankedList]:
    """Query-likelihood runs for ``(qid, tokens)`` pairs; queries without vocabulary terms are skipped."""

    def _one(item):
        qid, tokens = item
        try:
            return qid, ql_retrieve(index, tokens, k, mu, query_id=qid)
        except EmptyQueryError:
            logger.warning(f"Query '{qid}' has no in-vocabulary terms; skipped")
            return qid, None

    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(_one, queries))
    return {qid: run for qid, run in results if run is not None}

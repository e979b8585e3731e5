# -*- coding: utf-8 -*-
"""
Relevance model (RM1) estimated from pseudo-relevant documents:

    p(w|R) ∝ sum_{d in F} p_ml(w|d) * prod_{w' in q} p_mu(w'|d)

The generation factor is the unsmoothed document model, the query
likelihood factor is Dirichlet smoothed. Terms outside the feedback
documents get exactly zero mass.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.exceptions import EmptyFeedbackError, EmptyQueryError, FormatError
from src.index.corpus import CorpusIndex, Vocabulary
from src.retrieval.language_model import DEFAULT_MU, RankedList


@dataclass
class RelevanceDistribution:
    query_id: str
    probs: Dict[int, float]
    num_docs: int
    _arrays: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.probs:
            raise EmptyFeedbackError(f"relevance distribution for '{self.query_id}' is empty")
        total = math.fsum(self.probs.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"relevance distribution for '{self.query_id}' sums to {total}")

    def __len__(self) -> int:
        return len(self.probs)

    def get(self, term_id: int) -> float:
        return self.probs.get(term_id, 0.0)

    @property
    def support(self) -> List[int]:
        return list(self.probs)

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """(term ids, probabilities) in descending-probability order."""
        if self._arrays is None:
            items = sorted(self.probs.items(), key=lambda kv: (-kv[1], kv[0]))
            ids = np.array([t for t, _ in items], dtype=np.int64)
            probs = np.array([p for _, p in items], dtype=np.float64)
            self._arrays = (ids, probs)
        return self._arrays


def _query_log_likelihood(index: CorpusIndex, doc_number: int, query_ids: np.ndarray, mu: float) -> float:
    # only called for non-empty documents
    terms, counts = index.doc_terms_at(doc_number)
    pos = np.minimum(np.searchsorted(terms, query_ids), len(terms) - 1)
    tf = np.where(terms[pos] == query_ids, counts[pos], 0).astype(np.float64)
    probs = (tf + mu * index.collection_prob[query_ids]) / (index.doc_lengths[doc_number] + mu)
    return float(np.log(probs).sum())


def estimate_rm(
    index: CorpusIndex,
    query: Sequence[str],
    topk: RankedList,
    mu: float = DEFAULT_MU,
    max_terms: Optional[int] = None,
    query_id: Optional[str] = None,
) -> RelevanceDistribution:
    """
    Estimate p(w|R) from the feedback documents in ``topk``.

    Out-of-vocabulary query tokens are dropped. ``max_terms`` keeps only the
    most probable terms and renormalizes.
    """
    qid = topk.query_id if query_id is None else query_id
    query_ids = np.array(index.vocabulary.lookup(query), dtype=np.int64)
    if len(query_ids) == 0:
        raise EmptyQueryError(f"query '{qid}' has no in-vocabulary terms")
    docs = [index.doc_index(doc_id) for doc_id in topk.doc_ids]
    docs = [d for d in docs if index.doc_lengths[d] > 0]
    if not docs:
        raise EmptyFeedbackError(f"query '{qid}' has no feedback documents")

    log_ql = np.array([_query_log_likelihood(index, d, query_ids, mu) for d in docs])
    # max-shifted; the final normalization cancels the shift
    weights = np.exp(log_ql - log_ql.max())

    all_terms, all_mass = [], []
    for d, weight in zip(docs, weights):
        terms, counts = index.doc_terms_at(d)
        all_terms.append(terms)
        all_mass.append(weight * counts / float(index.doc_lengths[d]))
    terms, inverse = np.unique(np.concatenate(all_terms), return_inverse=True)
    mass = np.bincount(inverse, weights=np.concatenate(all_mass), minlength=len(terms))

    order = np.lexsort((terms, -mass))
    if max_terms is not None:
        order = order[:max_terms]
    terms, mass = terms[order], mass[order]
    keep = mass > 0
    terms, mass = terms[keep], mass[keep]
    mass = mass / mass.sum()
    return RelevanceDistribution(qid, {int(t): float(p) for t, p in zip(terms, mass)}, num_docs=len(docs))


def format_distribution(dist: RelevanceDistribution, vocabulary: Vocabulary) -> str:
    """``term:prob term:prob ...`` in descending probability, 12 significant digits."""
    ids, probs = dist.arrays()
    return " ".join(f"{vocabulary.terms[t]}:{p:.12g}" for t, p in zip(ids, probs))


def parse_distribution(
    text: str, vocabulary: Vocabulary, query_id: str, num_docs: int = 0
) -> RelevanceDistribution:
    probs: Dict[int, float] = {}
    for item in text.split():
        term, sep, value = item.rpartition(":")
        if not sep:
            raise FormatError(f"malformed term:prob item '{item}' for query '{query_id}'")
        term_id = vocabulary.get(term)
        if term_id is None:
            raise FormatError(f"term '{term}' of query '{query_id}' is not in the index vocabulary")
        probs[term_id] = float(value)
    return RelevanceDistribution(query_id, probs, num_docs=num_docs)

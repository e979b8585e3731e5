# -*- coding: utf-8 -*-
"""
Read-only scoring over a trained model. Nothing here mutates the model, so a
loaded model can be shared between threads.
"""

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from sklearn.metrics.pairwise import cosine_similarity

from src.core.exceptions import UnknownTermError
from src.embedding.checkpoint import load_model  # noqa: F401
from src.embedding.model import RLM, EmbeddingModel, project_query, rlm_log_probs, rpe_posteriors

PROBABILITY = "probability"
POSTERIOR = "posterior"


@dataclass
class TermScoreList:
    query_id: str
    entries: List[Tuple[int, float]]
    semantics: str = PROBABILITY

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def term_ids(self) -> List[int]:
        return [t for t, _ in self.entries]

    def as_dict(self) -> dict:
        return dict(self.entries)


def _top(scores: np.ndarray, m: int) -> np.ndarray:
    """Indices of the m highest scores, ties broken by ascending term id."""
    order = np.lexsort((np.arange(len(scores)), -scores))
    return order[:m]


def term_distribution(
    model: EmbeddingModel, query: Sequence[int], m: int, query_id: str = ""
) -> TermScoreList:
    """
    Top-m terms for a query, renormalized over the returned terms.

    RLM ranks by p(w|q); RPE ranks by the posterior sigmoid(w.q), which with
    a uniform prior over terms orders terms the same way p(w|q, R=1) would.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    q = project_query(model, query)
    if model.kind == RLM:
        scores, semantics = np.exp(rlm_log_probs(model, q)), PROBABILITY
    else:
        scores, semantics = rpe_posteriors(model, q), POSTERIOR
    top = _top(scores, m)
    kept = scores[top]
    kept = kept / kept.sum()
    return TermScoreList(query_id, [(int(t), float(s)) for t, s in zip(top, kept)], semantics)


def similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two non-zero vectors."""
    a = np.asarray(a, dtype=np.float64).reshape(1, -1)
    b = np.asarray(b, dtype=np.float64).reshape(1, -1)
    if not np.any(a) or not np.any(b):
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(cosine_similarity(a, b)[0, 0])


def nearest_terms(model: EmbeddingModel, term: str, m: int = 10) -> List[Tuple[str, float]]:
    """The m terms whose query embeddings are closest in cosine to ``term``'s."""
    if term not in model.term_to_id:
        raise UnknownTermError(term)
    t = model.term_to_id[term]
    sims = cosine_similarity(model.query_vectors[t:t + 1], model.query_vectors)[0]
    sims[t] = -np.inf
    top = _top(sims, min(m, model.num_terms - 1))
    return [(model.terms[i], float(sims[i])) for i in top]


def query_terms(model: EmbeddingModel, text: Iterable[str], m: int, query_id: str = "") -> List[Tuple[str, float]]:
    """term_distribution for raw tokens, with term strings instead of ids."""
    scores = term_distribution(model, model.lookup(text), m, query_id=query_id)
    return [(model.terms[t], s) for t, s in scores.entries]


def write_term_lists(path: str, lists: Iterable[TermScoreList], terms: Sequence[str]) -> None:
    """``qid<TAB>term<TAB>score`` lines."""
    with open(path, "w", encoding="utf-8") as f:
        for scores in lists:
            for t, s in scores.entries:
                f.write(f"{scores.query_id}\t{terms[t]}\t{s:.10g}\n")

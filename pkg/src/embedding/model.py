# -*- coding: utf-8 -*-
"""
Relevance-based embedding model.

Parameters
----------
query_vectors : (N, d)
    W_Q; a query is projected to the mean of its terms' rows.
term_vectors : (N, d), optional
    W_w output embeddings. Trained by RPE and by RLM with the exact softmax
    output; absent for RLM with the hierarchical softmax.
node_vectors : (N-1, d), optional
    Internal-node vectors of the Huffman tree (RLM, hierarchical softmax).
bias : (N,), optional
    Output bias b_w; off unless requested.
"""

from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.special import expit, log_softmax

from src.core.exceptions import ProjectionError, UnknownTermError
from src.embedding.huffman import HuffmanTree

RLM = "rlm"
RPE = "rpe"
KINDS = (RLM, RPE)
OUTPUTS = ("hs", "softmax")


def log_sigmoid(x):
    """log(sigmoid(x)) without overflow for large |x|."""
    return -np.logaddexp(0.0, -x)


class EmbeddingModel:
    def __init__(
        self,
        kind: str,
        terms: Sequence[str],
        query_vectors: np.ndarray,
        term_vectors: Optional[np.ndarray] = None,
        node_vectors: Optional[np.ndarray] = None,
        bias: Optional[np.ndarray] = None,
        tree: Optional[HuffmanTree] = None,
        output: str = "hs",
        metadata: Optional[Dict[str, Any]] = None,
    ):
        if kind not in KINDS:
            raise ValueError(f"unknown model kind '{kind}'")
        if kind == RLM and output not in OUTPUTS:
            raise ValueError(f"unknown output layer '{output}'")
        self.kind = kind
        # RPE always scores terms with independent logistic outputs
        self.output = output if kind == RLM else "logistic"
        self.terms = tuple(terms)
        self.term_to_id = {t: i for i, t in enumerate(self.terms)}
        self.query_vectors = np.asarray(query_vectors, dtype=np.float64)
        self.term_vectors = None if term_vectors is None else np.asarray(term_vectors, dtype=np.float64)
        self.node_vectors = None if node_vectors is None else np.asarray(node_vectors, dtype=np.float64)
        self.bias = None if bias is None else np.asarray(bias, dtype=np.float64)
        self.tree = tree
        self.metadata = dict(metadata or {})
        self._validate()

    def _validate(self) -> None:
        n, d = self.query_vectors.shape
        if n != len(self.terms):
            raise ValueError(f"query vectors have {n} rows for {len(self.terms)} terms")
        if self.uses_tree:
            if self.tree is None or self.node_vectors is None:
                raise ValueError("hierarchical softmax model needs a tree and node vectors")
            if self.tree.num_leaves != n or self.node_vectors.shape != (max(n - 1, 0), d):
                raise ValueError("tree and node vectors do not match the vocabulary")
        else:
            if self.term_vectors is None or self.term_vectors.shape != (n, d):
                raise ValueError("term vectors must be present with shape (N, d)")
        if self.bias is not None and self.bias.shape != (n,):
            raise ValueError("bias must have one entry per term")

    @classmethod
    def initialize(
        cls,
        kind: str,
        terms: Sequence[str],
        dim: int,
        rng: np.random.Generator,
        output: str = "hs",
        bias: bool = False,
        tree: Optional[HuffmanTree] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> "EmbeddingModel":
        """W_Q ~ U(-0.5/d, 0.5/d); every output-side parameter starts at zero."""
        n = len(terms)
        query_vectors = (rng.random((n, dim)) - 0.5) / dim
        uses_tree = kind == RLM and output == "hs"
        return cls(
            kind,
            terms,
            query_vectors,
            term_vectors=None if uses_tree else np.zeros((n, dim)),
            node_vectors=np.zeros((max(n - 1, 0), dim)) if uses_tree else None,
            bias=np.zeros(n) if bias and not uses_tree else None,
            tree=tree if uses_tree else None,
            output=output,
            metadata=metadata,
        )

    # --- shape ---
    @property
    def uses_tree(self) -> bool:
        return self.kind == RLM and self.output == "hs"

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    @property
    def dim(self) -> int:
        return self.query_vectors.shape[1]

    def parameters(self) -> Dict[str, np.ndarray]:
        params = {"query_vectors": self.query_vectors}
        for name in ("term_vectors", "node_vectors", "bias"):
            value = getattr(self, name)
            if value is not None:
                params[name] = value
        return params

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters().values())

    def copy(self) -> "EmbeddingModel":
        params = {k: v.copy() for k, v in self.parameters().items()}
        return EmbeddingModel(
            self.kind, self.terms, tree=self.tree, output=self.output, metadata=self.metadata, **params
        )

    # --- vocabulary ---
    def lookup(self, tokens: Iterable[str]) -> List[int]:
        """Ids of tokens that have embeddings; others are ignored."""
        ids = self.term_to_id
        return [ids[t] for t in tokens if t in ids]

    def project_text(self, tokens: Iterable[str]) -> np.ndarray:
        return project_query(self, self.lookup(tokens))

    def logits(self, qvec: np.ndarray) -> np.ndarray:
        """w^T q (+ b_w) for every term."""
        z = self.term_vectors @ qvec
        if self.bias is not None:
            z = z + self.bias
        return z

    def _check_term(self, term_id: int) -> None:
        if not 0 <= term_id < self.num_terms:
            raise UnknownTermError(term_id)


def project_query(model: EmbeddingModel, query: Sequence[int]) -> np.ndarray:
    """Mean of the W_Q rows of the query's tokens; out-of-range ids are ignored."""
    ids = [int(t) for t in query if 0 <= int(t) < model.num_terms]
    if not ids:
        raise ProjectionError("no query term has an embedding")
    return model.query_vectors[ids].mean(axis=0)


def hs_log_probs(model: EmbeddingModel, qvec: np.ndarray) -> np.ndarray:
    """log p(w|q) under the hierarchical softmax, for every term."""
    if not model.uses_tree:
        raise ValueError("model has no hierarchical softmax output")
    tree = model.tree
    if tree.max_depth == 0:
        return np.zeros(model.num_terms)
    z = model.node_vectors @ qvec
    edge = log_sigmoid(tree.sign_matrix * z[tree.point_matrix])
    return np.where(tree.mask, edge, 0.0).sum(axis=1)


def hs_prob(model: EmbeddingModel, term: int, qvec: np.ndarray) -> float:
    """Product of sigmoid(sign * node . q) along the term's root-to-leaf path."""
    if not model.uses_tree:
        raise ValueError("model has no hierarchical softmax output")
    model._check_term(term)
    points = model.tree.points[term]
    if len(points) == 0:
        return 1.0
    z = model.node_vectors[points] @ qvec
    return float(np.prod(expit(model.tree.signs[term] * z)))


def softmax_log_probs(model: EmbeddingModel, qvec: np.ndarray) -> np.ndarray:
    return log_softmax(model.logits(qvec))


def softmax_prob(model: EmbeddingModel, term: int, qvec: np.ndarray) -> float:
    """exp(w^T q + b_w) / sum_w' exp(w'^T q + b_w'), stabilized with log-sum-exp."""
    if model.term_vectors is None:
        raise ValueError("model has no output term vectors")
    model._check_term(term)
    return float(np.exp(softmax_log_probs(model, qvec)[term]))


def rlm_log_probs(model: EmbeddingModel, qvec: np.ndarray) -> np.ndarray:
    """log p(w|q) for every term with whichever output layer the model has."""
    if model.kind != RLM:
        raise ValueError("relevance likelihood is only defined for RLM models")
    return hs_log_probs(model, qvec) if model.uses_tree else softmax_log_probs(model, qvec)


def rpe_posteriors(model: EmbeddingModel, qvec: np.ndarray) -> np.ndarray:
    """p(R=1 | w, q) = sigmoid(w^T q + b_w) for every term."""
    return expit(model.logits(qvec))

# -*- coding: utf-8 -*-
"""
Vocabulary, inverted index and collection statistics.

Term ids are assigned in sorted term order, so the index built from a
collection does not depend on how documents were partitioned across workers.
Document lengths count in-vocabulary tokens only, which keeps
``sum(postings of d) == len(d)`` true under a ``min_cf`` threshold.
"""

import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import AbstractSet, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import joblib
import numpy as np
from tqdm import tqdm

from src.core.exceptions import (
    DataError,
    DuplicateDocumentError,
    IndexFormatError,
    UnknownDocumentError,
    UnknownTermError,
)
from src.index.tokenizer import tokenize
from src.utils.logging import get_logger

logger = get_logger(__name__)

INDEX_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Vocabulary:
    terms: Tuple[str, ...]
    doc_freq: np.ndarray
    coll_freq: np.ndarray
    total_tokens: int
    term_to_id: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "term_to_id", {t: i for i, t in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.term_to_id

    def id(self, term: str) -> int:
        try:
            return self.term_to_id[term]
        except KeyError:
            raise UnknownTermError(term) from None

    def get(self, term: str, default: Optional[int] = None) -> Optional[int]:
        return self.term_to_id.get(term, default)

    def term(self, term_id: int) -> str:
        if not 0 <= term_id < len(self.terms):
            raise UnknownTermError(term_id)
        return self.terms[term_id]

    def lookup(self, tokens: Iterable[str]) -> List[int]:
        """Ids of the in-vocabulary tokens, in order, duplicates kept."""
        ids = self.term_to_id
        return [ids[t] for t in tokens if t in ids]


class CorpusIndex:
    """
    Immutable inverted index. Documents are addressed by their external id;
    internally they are numbered in ingestion order.
    """

    def __init__(
        self,
        vocabulary: Vocabulary,
        doc_ids: Sequence[str],
        doc_term_ids: Sequence[np.ndarray],
        doc_term_counts: Sequence[np.ndarray],
    ):
        self.vocabulary = vocabulary
        self.doc_ids: Tuple[str, ...] = tuple(doc_ids)
        self._doc_index = {d: i for i, d in enumerate(self.doc_ids)}
        self._doc_term_ids = [np.asarray(a, dtype=np.int64) for a in doc_term_ids]
        self._doc_term_counts = [np.asarray(a, dtype=np.int64) for a in doc_term_counts]
        self.doc_lengths = np.array([int(c.sum()) for c in self._doc_term_counts], dtype=np.int64)

        total = vocabulary.total_tokens
        if total > 0:
            self.collection_prob = vocabulary.coll_freq.astype(np.float64) / float(total)
        else:
            self.collection_prob = np.zeros(len(vocabulary), dtype=np.float64)

        self._build_postings()
        for arr in (self.doc_lengths, self.collection_prob):
            arr.setflags(write=False)

    def _build_postings(self) -> None:
        n_terms = len(self.vocabulary)
        if self._doc_term_ids:
            terms = np.concatenate(self._doc_term_ids)
            counts = np.concatenate(self._doc_term_counts)
            docs = np.concatenate(
                [np.full(len(a), i, dtype=np.int64) for i, a in enumerate(self._doc_term_ids)]
            )
        else:
            terms = counts = docs = np.zeros(0, dtype=np.int64)
        # stable sort keeps documents ascending within each term
        order = np.argsort(terms, kind="stable")
        terms, counts, docs = terms[order], counts[order], docs[order]
        bounds = np.searchsorted(terms, np.arange(n_terms + 1))
        self._post_docs = [docs[bounds[t]:bounds[t + 1]] for t in range(n_terms)]
        self._post_counts = [counts[bounds[t]:bounds[t + 1]] for t in range(n_terms)]

    # --- lookups ---
    @property
    def num_docs(self) -> int:
        return len(self.doc_ids)

    @property
    def num_terms(self) -> int:
        return len(self.vocabulary)

    def doc_index(self, doc_id: str) -> int:
        try:
            return self._doc_index[doc_id]
        except KeyError:
            raise UnknownDocumentError(doc_id) from None

    def doc_length(self, doc_id: str) -> int:
        return int(self.doc_lengths[self.doc_index(doc_id)])

    def postings(self, term_id: int) -> Tuple[np.ndarray, np.ndarray]:
        """(internal doc numbers ascending, in-document frequencies) for a term."""
        self._check_term(term_id)
        return self._post_docs[term_id], self._post_counts[term_id]

    def doc_terms(self, doc_id: str) -> Tuple[np.ndarray, np.ndarray]:
        """(term ids ascending, counts) of one document."""
        i = self.doc_index(doc_id)
        return self._doc_term_ids[i], self._doc_term_counts[i]

    def doc_terms_at(self, doc_number: int) -> Tuple[np.ndarray, np.ndarray]:
        return self._doc_term_ids[doc_number], self._doc_term_counts[doc_number]

    def term_count(self, term_id: int, doc_id: str) -> int:
        """c(w, d)."""
        self._check_term(term_id)
        ids, counts = self.doc_terms(doc_id)
        pos = np.searchsorted(ids, term_id)
        if pos < len(ids) and ids[pos] == term_id:
            return int(counts[pos])
        return 0

    def mle_prob(self, term_id: int, doc_id: str) -> float:
        """Maximum-likelihood p(w|d) = c(w,d) / |d|."""
        length = self.doc_length(doc_id)
        if length == 0:
            raise DataError(f"document '{doc_id}' is empty")
        return self.term_count(term_id, doc_id) / length

    def _check_term(self, term_id: int) -> None:
        if not 0 <= term_id < self.num_terms:
            raise UnknownTermError(term_id)

    # --- persistence ---
    def save(self, path: str) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        payload = {
            "format_version": INDEX_FORMAT_VERSION,
            "terms": list(self.vocabulary.terms),
            "doc_freq": self.vocabulary.doc_freq,
            "coll_freq": self.vocabulary.coll_freq,
            "total_tokens": self.vocabulary.total_tokens,
            "doc_ids": list(self.doc_ids),
            "doc_term_ids": self._doc_term_ids,
            "doc_term_counts": self._doc_term_counts,
        }
        joblib.dump(payload, path)
        logger.info(f"Saved index ({self.num_docs} docs, {self.num_terms} terms) to {path}")

    @classmethod
    def load(cls, path: str) -> "CorpusIndex":
        try:
            payload = joblib.load(path)
        except FileNotFoundError:
            raise
        except Exception as e:
            raise IndexFormatError(f"cannot read index: {e}", path=path) from e
        if not isinstance(payload, dict) or "format_version" not in payload:
            raise IndexFormatError("not an index file", path=path)
        if payload["format_version"] != INDEX_FORMAT_VERSION:
            raise IndexFormatError(
                f"unsupported index format version {payload['format_version']}", path=path
            )
        vocabulary = Vocabulary(
            terms=tuple(payload["terms"]),
            doc_freq=np.asarray(payload["doc_freq"], dtype=np.int64),
            coll_freq=np.asarray(payload["coll_freq"], dtype=np.int64),
            total_tokens=int(payload["total_tokens"]),
        )
        return cls(vocabulary, payload["doc_ids"], payload["doc_term_ids"], payload["doc_term_counts"])

    def write_vocabulary(self, path: str) -> None:
        """Human-readable dump: term<TAB>id<TAB>df<TAB>cf."""
        vocab = self.vocabulary
        with open(path, "w", encoding="utf-8") as f:
            for i, term in enumerate(vocab.terms):
                f.write(f"{term}\t{i}\t{int(vocab.doc_freq[i])}\t{int(vocab.coll_freq[i])}\n")

    def __eq__(self, other) -> bool:
        if not isinstance(other, CorpusIndex):
            return NotImplemented
        if self.doc_ids != other.doc_ids or self.vocabulary.terms != other.vocabulary.terms:
            return False
        if self.vocabulary.total_tokens != other.vocabulary.total_tokens:
            return False
        same = np.array_equal(self.vocabulary.doc_freq, other.vocabulary.doc_freq) and np.array_equal(
            self.vocabulary.coll_freq, other.vocabulary.coll_freq
        )
        return same and all(
            np.array_equal(a, b) and np.array_equal(c, d)
            for a, b, c, d in zip(
                self._doc_term_ids, other._doc_term_ids, self._doc_term_counts, other._doc_term_counts
            )
        )

    __hash__ = None


def read_corpus(path: str) -> Iterator[Tuple[str, str]]:
    """Stream ``docid<TAB>text`` lines; blank lines are skipped."""
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            doc_id, sep, text = line.partition("\t")
            if not sep or not doc_id:
                raise IndexFormatError("expected 'docid<TAB>text'", path=path, line=line_no)
            yield doc_id, text


def _count_partition(
    docs: Sequence[Tuple[str, str]], stopwords: AbstractSet[str]
) -> List[Counter]:
    return [Counter(tokenize(text, stopwords)) for _, text in docs]


def build_index(
    documents: Iterable[Tuple[str, str]],
    stopwords: AbstractSet[str] = frozenset(),
    min_cf: int = 1,
    workers: int = 1,
    progress: bool = False,
) -> CorpusIndex:
    """
    Tokenize ``(doc id, text)`` pairs and build the index.

    Documents are split into ``workers`` contiguous partitions that are
    counted concurrently and merged in input order.
    """
    docs: List[Tuple[str, str]] = []
    seen = set()
    for doc_id, text in documents:
        if doc_id in seen:
            raise DuplicateDocumentError(doc_id)
        seen.add(doc_id)
        docs.append((doc_id, text))

    logger.info(f"Indexing {len(docs)} documents with {workers} worker(s)")
    workers = max(1, min(workers, len(docs) or 1))
    size = -(-len(docs) // workers) if docs else 0
    partitions = [docs[i:i + size] for i in range(0, len(docs), size)] if docs else []

    doc_counts: List[Counter] = []
    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = executor.map(lambda part: _count_partition(part, stopwords), partitions)
        for part in tqdm(results, total=len(partitions), desc="index", disable=not progress):
            doc_counts.extend(part)

    coll_freq: Counter = Counter()
    doc_freq: Counter = Counter()
    for counts in doc_counts:
        coll_freq.update(counts)
        doc_freq.update(counts.keys())

    terms = tuple(sorted(t for t, cf in coll_freq.items() if cf >= min_cf))
    term_to_id = {t: i for i, t in enumerate(terms)}
    cf = np.array([coll_freq[t] for t in terms], dtype=np.int64)
    vocabulary = Vocabulary(
        terms=terms,
        doc_freq=np.array([doc_freq[t] for t in terms], dtype=np.int64),
        coll_freq=cf,
        total_tokens=int(cf.sum()),
    )

    doc_term_ids, doc_term_counts = [], []
    for counts in doc_counts:
        pairs = sorted((term_to_id[t], c) for t, c in counts.items() if t in term_to_id)
        doc_term_ids.append(np.array([p[0] for p in pairs], dtype=np.int64))
        doc_term_counts.append(np.array([p[1] for p in pairs], dtype=np.int64))

    dropped = len(coll_freq) - len(terms)
    if dropped:
        logger.info(f"Dropped {dropped} terms below min_cf={min_cf}")
    logger.info(f"Built vocabulary of {len(terms)} terms, {vocabulary.total_tokens} tokens")
    return CorpusIndex(vocabulary, [d for d, _ in docs], doc_term_ids, doc_term_counts)

# -*- coding: utf-8 -*-
"""
Offline training set: (query, relevance distribution) pairs plus the unigram
table U(w) over the feedback documents, and their on-disk layout.

A training directory holds::

    pairs.tsv      qid<TAB>query text<TAB>term:prob term:prob ...
    noise.tsv      term<TAB>p_n(w)
    unigram.tsv    term<TAB>U(w)
    manifest.yaml  counts, skipped query ids, config echo
"""

import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from src.core.exceptions import DataError, FormatError, MissingInputError, NoUsableQueriesError
from src.index.corpus import Vocabulary
from src.relevance.relevance_model import RelevanceDistribution, format_distribution, parse_distribution
from src.utils.logging import get_logger

logger = get_logger(__name__)

PAIRS_FILE = "pairs.tsv"
NOISE_FILE = "noise.tsv"
UNIGRAM_FILE = "unigram.tsv"
MANIFEST_FILE = "manifest.yaml"
NOISE_HEADER = "#noise_exponent"


@dataclass
class TrainingExample:
    query_id: str
    text: str
    term_ids: List[int]
    relevance: RelevanceDistribution


@dataclass
class TrainingSet:
    vocabulary: Vocabulary
    examples: List[TrainingExample]
    unigram: np.ndarray
    skipped: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def num_terms(self) -> int:
        return len(self.vocabulary)

    def sample(self, fraction: float, seed: int = 1) -> "TrainingSet":
        """Seeded subset of ``ceil(fraction * n)`` examples in their original order; U(w) is kept whole."""
        if not 0.0 < fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        size = int(np.ceil(fraction * len(self.examples)))
        keep = np.sort(np.random.default_rng(seed).permutation(len(self.examples))[:size])
        return TrainingSet(self.vocabulary, [self.examples[i] for i in keep], self.unigram, list(self.skipped))

    def relevance_mass(self) -> np.ndarray:
        """sum_i p(w|R_i) per term."""
        mass = np.zeros(self.num_terms, dtype=np.float64)
        for example in self.examples:
            ids, probs = example.relevance.arrays()
            np.add.at(mass, ids, probs)
        return mass


def noise_distribution(training: TrainingSet, exponent: float = 0.75) -> np.ndarray:
    """p_n(w) = U(w)^e / sum_v U(v)^e over the whole vocabulary."""
    if exponent <= 0:
        raise ValueError("noise exponent must be positive")
    unigram = np.asarray(training.unigram, dtype=np.float64)
    if unigram.sum() <= 0:
        raise DataError("unigram table is all zero")
    powered = np.power(unigram, exponent)
    return powered / powered.sum()


def write_training_set(
    training: TrainingSet,
    directory: str,
    noise: np.ndarray,
    manifest: Optional[Dict[str, Any]] = None,
    noise_exponent: Optional[float] = None,
) -> None:
    os.makedirs(directory, exist_ok=True)
    vocab = training.vocabulary
    with open(os.path.join(directory, PAIRS_FILE), "w", encoding="utf-8") as f:
        for example in training.examples:
            f.write(f"{example.query_id}\t{example.text}\t{format_distribution(example.relevance, vocab)}\n")
    with open(os.path.join(directory, NOISE_FILE), "w", encoding="utf-8") as f:
        if noise_exponent is not None:
            f.write(f"{NOISE_HEADER}\t{noise_exponent!r}\n")
        for term_id in np.nonzero(noise)[0]:
            f.write(f"{vocab.terms[term_id]}\t{noise[term_id]:.12g}\n")
    with open(os.path.join(directory, UNIGRAM_FILE), "w", encoding="utf-8") as f:
        for term_id in np.nonzero(training.unigram)[0]:
            f.write(f"{vocab.terms[term_id]}\t{int(training.unigram[term_id])}\n")

    document = {
        "queries": len(training),
        "skipped": len(training.skipped),
        "skipped_ids": list(training.skipped),
        "vocabulary_size": len(vocab),
    }
    document.update(manifest or {})
    with open(os.path.join(directory, MANIFEST_FILE), "w", encoding="utf-8") as f:
        yaml.safe_dump(document, f, sort_keys=True, allow_unicode=True)
    logger.info(f"Wrote {len(training)} training pairs to {directory}")


def read_training_set(directory: str, vocabulary: Vocabulary) -> TrainingSet:
    pairs_path = os.path.join(directory, PAIRS_FILE)
    if not os.path.exists(pairs_path):
        raise MissingInputError(pairs_path, role="training pairs")

    examples = []
    with open(pairs_path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError("expected 'qid<TAB>query<TAB>distribution'", path=pairs_path, line=line_no)
            qid, text, dist_text = parts
            try:
                relevance = parse_distribution(dist_text, vocabulary, qid)
            except (FormatError, ValueError) as e:
                raise FormatError(str(e), path=pairs_path, line=line_no) from e
            term_ids = vocabulary.lookup(text.split())
            if not term_ids:
                raise FormatError(f"query '{qid}' has no in-vocabulary terms", path=pairs_path, line=line_no)
            examples.append(TrainingExample(qid, text, term_ids, relevance))
    if not examples:
        raise NoUsableQueriesError(f"{pairs_path} holds no training pairs")

    unigram = np.zeros(len(vocabulary), dtype=np.int64)
    unigram_path = os.path.join(directory, UNIGRAM_FILE)
    if os.path.exists(unigram_path):
        for term, value in _read_term_table(unigram_path, vocabulary):
            unigram[term] = int(value)
    else:
        logger.warning(f"{unigram_path} not found; U(w) left empty")

    skipped = []
    manifest_path = os.path.join(directory, MANIFEST_FILE)
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as f:
            skipped = list((yaml.safe_load(f) or {}).get("skipped_ids", []))
    return TrainingSet(vocabulary, examples, unigram, skipped)


def read_noise_table(path: str, vocabulary: Vocabulary) -> np.ndarray:
    noise = np.zeros(len(vocabulary), dtype=np.float64)
    for term, value in _read_term_table(path, vocabulary):
        noise[term] = float(value)
    total = noise.sum()
    if total <= 0:
        raise FormatError("noise table is empty", path=path)
    return noise / total


def read_noise_exponent(path: str) -> Optional[float]:
    """Exponent recorded in a noise table's header; None for tables without one."""
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().rstrip("\r\n")
    name, sep, value = first.partition("\t")
    if name != NOISE_HEADER or not sep:
        return None
    try:
        return float(value)
    except ValueError:
        raise FormatError(f"bad noise exponent '{value}'", path=path, line=1) from None


def _read_term_table(path: str, vocabulary: Vocabulary):
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            term, sep, value = line.partition("\t")
            if not sep:
                raise FormatError("expected 'term<TAB>value'", path=path, line=line_no)
            term_id = vocabulary.get(term)
            if term_id is None:
                raise FormatError(f"unknown term '{term}'", path=path, line=line_no)
            yield term_id, value

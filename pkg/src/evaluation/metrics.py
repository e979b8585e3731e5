# -*- coding: utf-8 -*-
"""
Ranked-retrieval measures (AP, P@k, nDCG@k) and the paired t-test.

Unjudged documents count as non-relevant. nDCG uses gain 2^grade - 1 and a
log2(rank + 1) discount.
"""

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from src.core.exceptions import EvaluationError
from src.retrieval.language_model import RankedList
from src.utils.logging import get_logger

logger = get_logger(__name__)

MAP_CUTOFF = 1000
RANK_CUTOFF = 20
METRIC_COLUMNS = ("map", "P_20", "ndcg_cut_20")


class Qrels:
    """Relevance grades keyed by (query id, doc id)."""

    def __init__(self, judgments: Mapping[str, Mapping[str, int]] = None):
        self._judgments: Dict[str, Dict[str, int]] = {}
        for qid, docs in (judgments or {}).items():
            for doc_id, grade in docs.items():
                self.add(qid, doc_id, grade)

    def add(self, query_id: str, doc_id: str, grade: int) -> None:
        grade = int(grade)
        if grade < 0:
            raise EvaluationError(f"negative grade for ({query_id}, {doc_id})")
        self._judgments.setdefault(query_id, {})[doc_id] = grade

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._judgments

    def __len__(self) -> int:
        return len(self._judgments)

    @property
    def query_ids(self) -> List[str]:
        return sorted(self._judgments)

    def for_query(self, query_id: str) -> Dict[str, int]:
        return self._judgments.get(query_id, {})

    def num_relevant(self, query_id: str) -> int:
        return sum(1 for g in self.for_query(query_id).values() if g > 0)

    def has_relevant(self, query_id: str) -> bool:
        return self.num_relevant(query_id) > 0


def average_precision(run: RankedList, qrels: Qrels, cutoff: int = MAP_CUTOFF) -> float:
    judged = qrels.for_query(run.query_id)
    total_relevant = qrels.num_relevant(run.query_id)
    if total_relevant == 0:
        raise EvaluationError(f"no relevant documents judged for query '{run.query_id}'")
    hits = 0
    precision_sum = 0.0
    for rank, doc_id in enumerate(run.doc_ids[:cutoff], start=1):
        if judged.get(doc_id, 0) > 0:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / total_relevant


def precision_at_k(run: RankedList, qrels: Qrels, k: int = RANK_CUTOFF) -> float:
    """Relevant documents in the top k over k, also when fewer than k were returned."""
    judged = qrels.for_query(run.query_id)
    hits = sum(1 for doc_id in run.doc_ids[:k] if judged.get(doc_id, 0) > 0)
    return hits / k


def _dcg(grades: Iterable[int]) -> float:
    return sum((2.0 ** g - 1.0) / math.log2(rank + 1) for rank, g in enumerate(grades, start=1))


def ndcg_at_k(run: RankedList, qrels: Qrels, k: int = RANK_CUTOFF) -> float:
    judged = qrels.for_query(run.query_id)
    ideal = sorted((g for g in judged.values() if g > 0), reverse=True)[:k]
    if not ideal:
        raise EvaluationError(f"no positive grades for query '{run.query_id}'")
    dcg = _dcg(judged.get(doc_id, 0) for doc_id in run.doc_ids[:k])
    return dcg / _dcg(ideal)


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    p_value: float
    significant: bool
    degenerate: bool = False


def paired_ttest(a: Sequence[float], b: Sequence[float], level: float = 0.05) -> TTestResult:
    """
    Two-tailed paired t-test of ``a`` against ``b``.

    All-zero differences give p = 1. Constant non-zero differences have no
    variance; the result is flagged ``degenerate`` with p = 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise EvaluationError("paired samples differ in length")
    if len(a) < 2:
        raise EvaluationError("paired t-test needs at least two pairs")
    diff = a - b
    if np.all(diff == 0):
        return TTestResult(statistic=0.0, p_value=1.0, significant=False)
    if np.all(diff == diff[0]):
        return TTestResult(
            statistic=math.copysign(math.inf, diff[0]), p_value=0.0, significant=True, degenerate=True
        )
    result = stats.ttest_rel(a, b)
    p_value = float(result.pvalue)
    return TTestResult(statistic=float(result.statistic), p_value=p_value, significant=p_value < level)


def evaluate_run(
    runs: Mapping[str, RankedList],
    qrels: Qrels,
    k: int = RANK_CUTOFF,
    cutoff: int = MAP_CUTOFF,
    query_ids: Optional[Sequence[str]] = None,
) -> pd.DataFrame:
    """
    Per-query MAP, P@k and nDCG@k plus an ``all`` row of means.

    Queries without positive judgments are excluded; queries that were judged
    but have no run score zero.
    """
    qids = sorted(query_ids) if query_ids is not None else sorted(set(runs) | set(qrels.query_ids))
    rows = {}
    for qid in qids:
        if not qrels.has_relevant(qid):
            logger.warning(f"Query '{qid}' has no relevant judgments; excluded from evaluation")
            continue
        run = runs.get(qid) or RankedList(qid, [])
        rows[qid] = {
            "map": average_precision(run, qrels, cutoff),
            f"P_{k}": precision_at_k(run, qrels, k),
            f"ndcg_cut_{k}": ndcg_at_k(run, qrels, k),
        }
    if not rows:
        raise EvaluationError("no evaluable queries")
    frame = pd.DataFrame.from_dict(rows, orient="index")
    frame.index.name = "qid"
    frame.loc["all"] = frame.mean(axis=0)
    return frame


def write_metric_file(frame: pd.DataFrame, path: str) -> None:
    """Lines ``metric<TAB>qid<TAB>value``, per query then the ``all`` row."""
    with open(path, "w", encoding="utf-8") as f:
        for metric in frame.columns:
            for qid, value in frame[metric].items():
                f.write(f"{metric}\t{qid}\t{value:.6f}\n")

# -*- coding: utf-8 -*-
"""
Embedding-based query expansion:

    p(w|theta*_q) = alpha * p_ml(w|q) + (1 - alpha) * p(w|q_emb)

where p(w|q_emb) is the model's top-m term distribution renormalized over
those m terms. Expanded models are scored with KL-divergence retrieval; the
cross-validated experiment tunes (alpha, m) per fold by training-fold MAP.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import AbstractSet, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from config import ExpansionGridConfig
from src.core.exceptions import EmptyQueryError, EvaluationError, ProjectionError
from src.embedding.inference import TermScoreList, term_distribution
from src.embedding.model import EmbeddingModel
from src.evaluation.metrics import METRIC_COLUMNS, Qrels, TTestResult, evaluate_run, paired_ttest, write_metric_file
from src.index.corpus import CorpusIndex
from src.index.tokenizer import tokenize
from src.retrieval.language_model import DEFAULT_MU, QueryLanguageModel, RankedList, kl_retrieve
from src.retrieval.trec import write_run
from src.utils.logging import get_logger

logger = get_logger(__name__)

GridPoint = Tuple[float, int]


class ExpansionConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(0.5, ge=0, le=1)
    num_terms: int = Field(10, ge=1)
    mu: float = Field(DEFAULT_MU, gt=0)


def mle_model(index: CorpusIndex, tokens: Sequence[str]) -> QueryLanguageModel:
    return QueryLanguageModel.from_term_ids(index.vocabulary.lookup(tokens))


def _top_terms(entries: Sequence[Tuple[int, float]], m: int) -> Dict[int, float]:
    head = entries[:m]
    total = sum(s for _, s in head)
    if total <= 0:
        return {t: 1.0 / len(head) for t, _ in head}
    return {t: s / total for t, s in head}


def interpolate(
    mle: QueryLanguageModel,
    embedding: Union[TermScoreList, Mapping[int, float]],
    alpha: float,
) -> QueryLanguageModel:
    """alpha * mle + (1 - alpha) * embedding; masses of shared terms add up."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    emb = embedding.as_dict() if isinstance(embedding, TermScoreList) else dict(embedding)
    probs: Dict[int, float] = {}
    for t, p in mle.probs.items():
        probs[t] = alpha * p
    for t, p in emb.items():
        probs[t] = probs.get(t, 0.0) + (1.0 - alpha) * p
    return QueryLanguageModel({t: p for t, p in probs.items() if p > 0})


class _TermMapper:
    """Maps model term ids onto index term ids (identity when the vocabularies match)."""

    def __init__(self, model: EmbeddingModel, index: CorpusIndex):
        self.identity = tuple(model.terms) == tuple(index.vocabulary.terms)
        if not self.identity:
            get = index.vocabulary.get
            self.ids = np.array([get(t, -1) for t in model.terms], dtype=np.int64)

    def __call__(self, scores: TermScoreList) -> List[Tuple[int, float]]:
        if self.identity:
            return list(scores.entries)
        return [(int(self.ids[t]), s) for t, s in scores.entries if self.ids[t] >= 0]


def embedding_terms(
    model: EmbeddingModel, index: CorpusIndex, tokens: Sequence[str], m: int, query_id: str = ""
) -> List[Tuple[int, float]]:
    """Top-m embedding terms of a query as (index term id, score), unnormalized."""
    scores = term_distribution(model, model.lookup(tokens), m, query_id=query_id)
    return _TermMapper(model, index)(scores)


def expand_query(
    model: EmbeddingModel,
    index: CorpusIndex,
    query: Sequence[str],
    cfg: ExpansionConfig,
    query_id: str = "",
) -> QueryLanguageModel:
    """
    Expanded query language model. When the query has no embedded term the
    plain MLE model is returned with ``fallback`` set.
    """
    mle = mle_model(index, query)
    try:
        entries = embedding_terms(model, index, query, cfg.num_terms, query_id=query_id)
    except ProjectionError:
        logger.warning(f"Query '{query_id}' has no embedded terms; using the unexpanded model")
        return QueryLanguageModel(dict(mle.probs), fallback=True)
    if not entries:
        return QueryLanguageModel(dict(mle.probs), fallback=True)
    return interpolate(mle, _top_terms(entries, cfg.num_terms), cfg.alpha)


@dataclass
class _PreparedQuery:
    query_id: str
    mle: QueryLanguageModel
    candidates: Optional[List[Tuple[int, float]]]


@dataclass
class ExpansionReport:
    """Pooled test-fold results of the cross-validated expansion experiment."""

    baseline: pd.DataFrame
    expanded: pd.DataFrame
    folds: List[dict]
    ttests: Dict[str, TTestResult]
    grid: pd.DataFrame
    fallbacks: List[str] = field(default_factory=list)

    def summary(self) -> pd.DataFrame:
        rows = {
            "baseline": self.baseline.loc["all", list(METRIC_COLUMNS)],
            "expanded": self.expanded.loc["all", list(METRIC_COLUMNS)],
        }
        frame = pd.DataFrame(rows).T
        frame.index.name = "system"
        return frame

    def table(self) -> str:
        summary = self.summary()
        lines = [summary.to_string(float_format=lambda v: f"{v:.4f}"), ""]
        lines.append("paired t-test, expanded vs baseline:")
        for metric, result in self.ttests.items():
            flag = " *" if result.significant else ""
            lines.append(f"  {metric:<12} t={result.statistic:.4f} p={result.p_value:.4g}{flag}")
        lines.append("")
        lines.append(pd.DataFrame(self.folds).to_string(index=False))
        return "\n".join(lines)

    def lines(self) -> List[str]:
        """``metric<TAB>system<TAB>value`` lines."""
        out = []
        summary = self.summary()
        for metric in METRIC_COLUMNS:
            for system in summary.index:
                out.append(f"{metric}\t{system}\t{summary.loc[system, metric]:.6f}")
            out.append(f"{metric}\tp_value\t{self.ttests[metric].p_value:.6g}")
        for fold in self.folds:
            out.append(f"alpha\tfold{fold['fold']}\t{fold['alpha']:g}")
            out.append(f"num_terms\tfold{fold['fold']}\t{fold['num_terms']}")
        return out

    def write(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "expansion_report.txt"), "w", encoding="utf-8") as f:
            f.write(self.table() + "\n")
        with open(os.path.join(directory, "expansion_report.tsv"), "w", encoding="utf-8") as f:
            f.writelines(line + "\n" for line in self.lines())
        write_metric_file(self.baseline, os.path.join(directory, "baseline.metrics"))
        write_metric_file(self.expanded, os.path.join(directory, "expanded.metrics"))
        self.grid.to_csv(os.path.join(directory, "grid.tsv"), sep="\t", index=False, float_format="%.6f")


class ExpansionExperiment:
    """
    Shared state of the expansion experiments: tokenized queries, their MLE
    models and their embedding candidates at the largest m needed.
    """

    def __init__(
        self,
        model: EmbeddingModel,
        index: CorpusIndex,
        queries: Iterable[Tuple[str, str]],
        qrels: Qrels,
        max_terms: int,
        mu: float = DEFAULT_MU,
        depth: int = 1000,
        stopwords: AbstractSet[str] = frozenset(),
        workers: int = 1,
        progress: bool = False,
    ):
        self.index = index
        self.qrels = qrels
        self.mu = mu
        self.depth = depth
        self.workers = workers
        self.progress = progress
        self.fallbacks: List[str] = []
        self.queries: List[_PreparedQuery] = []

        mapper = _TermMapper(model, index)
        for qid, text in sorted(queries):
            if not qrels.has_relevant(qid):
                logger.warning(f"Query '{qid}' has no relevance judgments; excluded")
                continue
            tokens = tokenize(text, stopwords)
            try:
                mle = mle_model(index, tokens)
            except EmptyQueryError:
                logger.warning(f"Query '{qid}' has no in-vocabulary terms; excluded")
                continue
            try:
                candidates = mapper(term_distribution(model, model.lookup(tokens), max_terms, query_id=qid))
            except ProjectionError:
                self.fallbacks.append(qid)
                candidates = None
            self.queries.append(_PreparedQuery(qid, mle, candidates or None))
        if self.fallbacks:
            logger.warning(f"{len(self.fallbacks)} queries have no embedded terms and stay unexpanded")
        if not self.queries:
            raise EvaluationError("no query is both judged and in the vocabulary")

    @property
    def query_ids(self) -> List[str]:
        return [q.query_id for q in self.queries]

    def query_model(self, query: _PreparedQuery, alpha: float, num_terms: int) -> QueryLanguageModel:
        if query.candidates is None or alpha == 1.0:
            return interpolate(query.mle, {}, 1.0)
        return interpolate(query.mle, _top_terms(query.candidates, num_terms), alpha)

    def runs(self, alpha: float, num_terms: int) -> Dict[str, RankedList]:
        return {
            q.query_id: kl_retrieve(self.index, self.query_model(q, alpha, num_terms), self.depth, self.mu, q.query_id)
            for q in self.queries
        }

    def evaluate(self, alpha: float, num_terms: int, run_dir: Optional[str] = None) -> pd.DataFrame:
        """Per-query metrics at one grid point (no ``all`` row)."""
        runs = self.runs(alpha, num_terms)
        if run_dir is not None:
            write_run(runs, os.path.join(run_dir, f"alpha{alpha:g}_m{num_terms}.run"), tag=f"a{alpha:g}m{num_terms}")
        frame = evaluate_run(runs, self.qrels, query_ids=self.query_ids)
        return frame.drop(index="all")

    def evaluate_grid(self, points: Sequence[GridPoint], run_dir: Optional[str] = None) -> Dict[GridPoint, pd.DataFrame]:
        if run_dir is not None:
            os.makedirs(run_dir, exist_ok=True)
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            frames = executor.map(lambda p: self.evaluate(p[0], p[1], run_dir), points)
            results = list(tqdm(frames, total=len(points), desc="grid points", disable=not self.progress))
        return dict(zip(points, results))

    def baseline(self) -> pd.DataFrame:
        return self.evaluate(1.0, 1)

    def cross_validate(self, grid: ExpansionGridConfig, run_dir: Optional[str] = None) -> ExpansionReport:
        qids = self.query_ids
        folds = grid.folds
        assignment = {qid: i % folds for i, qid in enumerate(qids)}
        for f in range(folds):
            if sum(1 for v in assignment.values() if v == f) < 2:
                raise EvaluationError(f"fold {f + 1} holds fewer than two queries")

        points = [(float(a), int(m)) for a in grid.alphas for m in grid.num_terms]
        results = self.evaluate_grid(points, run_dir=run_dir)
        baseline = self.baseline()

        chosen_frames = []
        fold_rows = []
        for f in range(folds):
            train_ids = [q for q in qids if assignment[q] != f]
            test_ids = [q for q in qids if assignment[q] == f]
            # best training MAP; ties go to the larger alpha, then the smaller m
            best = max(points, key=lambda p: (results[p].loc[train_ids, "map"].mean(), p[0], -p[1]))
            fold_rows.append({
                "fold": f + 1,
                "alpha": best[0],
                "num_terms": best[1],
                "train_map": float(results[best].loc[train_ids, "map"].mean()),
                "test_map": float(results[best].loc[test_ids, "map"].mean()),
            })
            chosen_frames.append(results[best].loc[test_ids])
            logger.info(f"Fold {f + 1}: alpha={best[0]:g}, m={best[1]}")

        expanded = pd.concat(chosen_frames).loc[qids]
        expanded.loc["all"] = expanded.mean(axis=0)
        baseline.loc["all"] = baseline.mean(axis=0)
        ttests = {
            metric: paired_ttest(expanded.loc[qids, metric].values, baseline.loc[qids, metric].values)
            for metric in METRIC_COLUMNS
        }
        grid_frame = pd.DataFrame(
            [{"alpha": a, "num_terms": m, "map": results[(a, m)]["map"].mean()} for a, m in points]
        )
        logger.info(
            f"Expanded MAP {expanded.loc['all', 'map']:.4f} vs baseline {baseline.loc['all', 'map']:.4f} "
            f"(p={ttests['map'].p_value:.4g})"
        )
        return ExpansionReport(baseline, expanded, fold_rows, ttests, grid_frame, list(self.fallbacks))

    def sensitivity(
        self,
        alphas: Sequence[float],
        num_terms: Sequence[int],
        fixed_alpha: float = 0.5,
        fixed_terms: int = 10,
    ) -> pd.DataFrame:
        """MAP over every query while varying m at a fixed alpha, then alpha at a fixed m."""
        rows = []
        m_points = [(float(fixed_alpha), int(m)) for m in num_terms]
        a_points = [(float(a), int(fixed_terms)) for a in alphas]
        results = self.evaluate_grid(list(dict.fromkeys(m_points + a_points)))
        for sweep, points in (("num_terms", m_points), ("alpha", a_points)):
            for a, m in points:
                frame = results[(a, m)]
                rows.append({"sweep": sweep, "alpha": a, "num_terms": m,
                             **{metric: frame[metric].mean() for metric in METRIC_COLUMNS}})
        return pd.DataFrame(rows)


def run_expansion_experiment(
    model: EmbeddingModel,
    index: CorpusIndex,
    queries: Iterable[Tuple[str, str]],
    qrels: Qrels,
    grid: Optional[ExpansionGridConfig] = None,
    folds: Optional[int] = None,
    mu: float = DEFAULT_MU,
    depth: int = 1000,
    stopwords: AbstractSet[str] = frozenset(),
    workers: int = 1,
    run_dir: Optional[str] = None,
    progress: bool = False,
) -> ExpansionReport:
    """Cross-validated (alpha, m) tuning; folds split the sorted query ids round-robin."""
    grid = grid or ExpansionGridConfig()
    if folds is not None:
        grid = grid.model_copy(update={"folds": folds})
    experiment = ExpansionExperiment(
        model, index, queries, qrels, max(grid.num_terms), mu, depth, stopwords, workers, progress
    )
    return experiment.cross_validate(grid, run_dir=run_dir)


def parameter_sensitivity(
    model: EmbeddingModel,
    index: CorpusIndex,
    queries: Iterable[Tuple[str, str]],
    qrels: Qrels,
    grid: Optional[ExpansionGridConfig] = None,
    mu: float = DEFAULT_MU,
    depth: int = 1000,
    stopwords: AbstractSet[str] = frozenset(),
    workers: int = 1,
    progress: bool = False,
) -> pd.DataFrame:
    grid = grid or ExpansionGridConfig()
    max_terms = max(max(grid.num_terms), grid.terms)
    experiment = ExpansionExperiment(
        model, index, queries, qrels, max_terms, mu, depth, stopwords, workers, progress
    )
    return experiment.sensitivity(grid.alphas, grid.num_terms, fixed_alpha=grid.alpha, fixed_terms=grid.terms)


def expansion_terms(
    model: EmbeddingModel,
    index: CorpusIndex,
    queries: Iterable[Tuple[str, str]],
    m: int = 10,
    stopwords: AbstractSet[str] = frozenset(),
) -> List[TermScoreList]:
    """Top-m expansion terms per query, renormalized, as index term ids."""
    lists = []
    for qid, text in queries:
        tokens = tokenize(text, stopwords)
        try:
            entries = embedding_terms(model, index, tokens, m, query_id=qid)
        except ProjectionError:
            logger.warning(f"Query '{qid}' has no embedded terms; no expansion terms")
            continue
        if entries:
            lists.append(TermScoreList(qid, list(_top_terms(entries, m).items())))
    return lists

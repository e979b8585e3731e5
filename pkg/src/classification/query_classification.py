# -*- coding: utf-8 -*-
"""
Multi-label query classification by cosine similarity to category centroids
in query-embedding space, with the per-editor precision / F1 protocol.

Files::

    labeled queries   qid<TAB>query<TAB>editor:lbl,lbl;editor:lbl,...
    categories        one label per line, ids by line order
    predictions       qid<TAB>lbl,lbl,...
"""

from dataclasses import dataclass, field
from typing import AbstractSet, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics.pairwise import cosine_similarity
from sklearn.model_selection import KFold

from src.core.exceptions import EvaluationError, FormatError, ProjectionError
from src.embedding.model import EmbeddingModel
from src.evaluation.metrics import TTestResult, paired_ttest
from src.index.tokenizer import tokenize
from src.utils.logging import get_logger

logger = get_logger(__name__)

MAX_LABELS_PER_EDITOR = 5
MAX_EDITORS = 3
AVERAGING = ("micro", "macro")


@dataclass
class LabelSet:
    """
    One labeled query. ``editors`` holds each editor's labels and
    ``editor_names`` their names (``editor1``, ``editor2``, ... when not given).
    """

    query_id: str
    text: str
    editors: List[List[str]]
    editor_names: Optional[List[str]] = None

    def __post_init__(self):
        if len(self.editors) > MAX_EDITORS:
            raise ValueError(f"query '{self.query_id}' has {len(self.editors)} editors (at most {MAX_EDITORS})")
        for labels in self.editors:
            if len(labels) > MAX_LABELS_PER_EDITOR:
                raise ValueError(
                    f"query '{self.query_id}' has {len(labels)} labels from one editor (at most {MAX_LABELS_PER_EDITOR})"
                )
        if self.editor_names is None:
            self.editor_names = [f"editor{e}" for e in range(1, len(self.editors) + 1)]
        if len(self.editor_names) != len(self.editors):
            raise ValueError(
                f"query '{self.query_id}' names {len(self.editor_names)} editors for {len(self.editors)} label lists"
            )
        if len(set(self.editor_names)) != len(self.editor_names):
            raise ValueError(f"query '{self.query_id}' lists an editor twice")

    @property
    def labels(self) -> List[str]:
        """Union of every editor's labels, first-seen order."""
        return list(dict.fromkeys(label for labels in self.editors for label in labels))

    def by_editor(self) -> Dict[str, List[str]]:
        return dict(zip(self.editor_names, self.editors))


@dataclass
class CategoryCentroid:
    label: str
    centroid: np.ndarray
    count: int


class CentroidTable:
    """Immutable centroid matrix; row order is category id order."""

    def __init__(self, centroids: Sequence[CategoryCentroid]):
        if not centroids:
            raise EvaluationError("no category has a projectable training query")
        self.centroids = list(centroids)
        self.labels = [c.label for c in self.centroids]
        self.matrix = np.vstack([c.centroid for c in self.centroids])

    def __len__(self) -> int:
        return len(self.centroids)

    def __getitem__(self, label: str) -> CategoryCentroid:
        return self.centroids[self.labels.index(label)]

    def similarities(self, qvec: np.ndarray) -> np.ndarray:
        return cosine_similarity(qvec.reshape(1, -1), self.matrix)[0]


def project_labeled(
    model: EmbeddingModel, labeled: Sequence[LabelSet], stopwords: AbstractSet[str] = frozenset()
) -> Dict[str, Optional[np.ndarray]]:
    """Query vector per query id; None where no query term has an embedding."""
    vectors = {}
    for item in labeled:
        try:
            vectors[item.query_id] = model.project_text(tokenize(item.text, stopwords))
        except ProjectionError:
            vectors[item.query_id] = None
    return vectors


def _centroids_from_vectors(
    labeled: Sequence[LabelSet],
    vectors: Mapping[str, Optional[np.ndarray]],
    categories: Optional[Sequence[str]] = None,
) -> CentroidTable:
    members: Dict[str, List[np.ndarray]] = {}
    for item in labeled:
        vec = vectors.get(item.query_id)
        if vec is None:
            continue
        for label in item.labels:
            members.setdefault(label, []).append(vec)

    order = list(categories) if categories is not None else sorted({l for item in labeled for l in item.labels})
    table = []
    for label in order:
        rows = members.get(label)
        if not rows:
            logger.warning(f"Category '{label}' has no projectable training query; excluded")
            continue
        table.append(CategoryCentroid(label, np.mean(rows, axis=0), len(rows)))
    return CentroidTable(table)


def compute_centroids(
    model: EmbeddingModel,
    labeled: Sequence[LabelSet],
    categories: Optional[Sequence[str]] = None,
    stopwords: AbstractSet[str] = frozenset(),
) -> CentroidTable:
    """
    Mean query vector per category over the training queries carrying its
    label (from any editor). Queries without embedded terms are skipped.
    """
    return _centroids_from_vectors(labeled, project_labeled(model, labeled, stopwords), categories)


def rank_categories(centroids: CentroidTable, qvec: np.ndarray, t: int) -> List[str]:
    """Top-t labels by cosine, ties broken by category id."""
    if not 1 <= t <= MAX_LABELS_PER_EDITOR:
        raise ValueError(f"t must lie in 1..{MAX_LABELS_PER_EDITOR}")
    sims = centroids.similarities(qvec)
    order = np.lexsort((np.arange(len(sims)), -sims))[:t]
    return [centroids.labels[i] for i in order]


def classify(model: EmbeddingModel, centroids: CentroidTable, query: Sequence[str], t: int) -> List[str]:
    """
    Ordered top-t labels for a tokenized query. A query with no embedded term
    gets an empty prediction; ``classify_queries`` reports such queries.
    """
    try:
        qvec = model.project_text(query)
    except ProjectionError:
        return []
    return rank_categories(centroids, qvec, t)


def classify_queries(
    model: EmbeddingModel,
    centroids: CentroidTable,
    queries: Sequence[Tuple[str, str]],
    t: int,
    stopwords: AbstractSet[str] = frozenset(),
) -> Tuple[Dict[str, List[str]], List[str]]:
    """Predictions for (qid, text) pairs plus the ids that could not be projected."""
    predictions, unprojected = {}, []
    for qid, text in queries:
        tokens = tokenize(text, stopwords)
        if not model.lookup(tokens):
            unprojected.append(qid)
        predictions[qid] = classify(model, centroids, tokens, t)
    if unprojected:
        logger.warning(f"{len(unprojected)} queries have no embedded terms; predicted no category")
    return predictions, unprojected


@dataclass
class ClassificationScores:
    precision: float
    recall: float
    f1: float
    per_editor: pd.DataFrame
    per_query_f1: pd.Series = field(repr=False)


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def evaluate_classification(
    predictions: Mapping[str, Sequence[str]],
    gold: Sequence[LabelSet],
    averaging: str = "micro",
) -> ClassificationScores:
    """
    Precision, recall and F1 per editor, averaged over editors.

    ``micro`` pools overlap counts over the queries before dividing, F1 from
    the pooled P and R. ``macro`` averages per-query P, R and F1. Per-query F1
    (mean over that query's editors) is kept for paired tests.
    """
    if averaging not in AVERAGING:
        raise ValueError(f"averaging must be one of {AVERAGING}")
    gold_by_id = {g.query_id: g for g in gold}
    missing = [qid for qid in predictions if qid not in gold_by_id]
    if missing:
        raise EvaluationError(f"no gold labels for predicted query '{missing[0]}'")
    if not any(predictions.values()):
        raise EvaluationError("every prediction is empty")

    # editors are matched by name; row order is first appearance in ``gold``
    editors = list(dict.fromkeys(name for g in gold if g.query_id in predictions for name in g.editor_names))
    hits = dict.fromkeys(editors, 0)
    predicted = dict.fromkeys(editors, 0)
    relevant = dict.fromkeys(editors, 0)
    per_query: Dict[str, List[Tuple[float, float, float]]] = {name: [] for name in editors}
    query_f1 = {}

    for qid, pred in predictions.items():
        pred = set(pred)
        f1s = []
        for name, labels in gold_by_id[qid].by_editor().items():
            overlap = len(pred & set(labels))
            hits[name] += overlap
            predicted[name] += len(pred)
            relevant[name] += len(labels)
            p = overlap / len(pred) if pred else 0.0
            r = overlap / len(labels) if labels else 0.0
            per_query[name].append((p, r, _f1(p, r)))
            f1s.append(_f1(p, r))
        query_f1[qid] = float(np.mean(f1s)) if f1s else 0.0

    rows = []
    for name in editors:
        if averaging == "micro":
            p = hits[name] / predicted[name] if predicted[name] else 0.0
            r = hits[name] / relevant[name] if relevant[name] else 0.0
            f = _f1(p, r)
        else:
            p, r, f = np.mean(per_query[name], axis=0) if per_query[name] else (0.0, 0.0, 0.0)
        rows.append({"editor": name, "precision": float(p), "recall": float(r), "f1": float(f)})
    per_editor = pd.DataFrame(rows)
    return ClassificationScores(
        precision=float(per_editor["precision"].mean()),
        recall=float(per_editor["recall"].mean()),
        f1=float(per_editor["f1"].mean()),
        per_editor=per_editor,
        per_query_f1=pd.Series(query_f1, name="f1").sort_index(),
    )


@dataclass
class CrossValidationResult:
    precision: float
    f1: float
    folds: pd.DataFrame
    per_query_f1: pd.Series = field(repr=False)
    unprojected: List[str] = field(default_factory=list)

    def compare(self, other: "CrossValidationResult") -> TTestResult:
        """Paired t-test of per-query F1 against another model's result on the same queries."""
        common = self.per_query_f1.index.intersection(other.per_query_f1.index)
        return paired_ttest(self.per_query_f1[common].values, other.per_query_f1[common].values)


def _predict(centroids, vectors, items, t) -> Dict[str, List[str]]:
    return {
        item.query_id: [] if vectors[item.query_id] is None else rank_categories(centroids, vectors[item.query_id], t)
        for item in items
    }


def cross_validate_classification(
    model: EmbeddingModel,
    labeled: Sequence[LabelSet],
    t_grid: Sequence[int] = (1, 2, 3, 4, 5),
    folds: int = 5,
    seed: int = 1,
    averaging: str = "micro",
    categories: Optional[Sequence[str]] = None,
    stopwords: AbstractSet[str] = frozenset(),
) -> CrossValidationResult:
    """
    k-fold protocol: per fold, centroids from the training queries, t tuned
    by training F1 (ties to the smaller t), scored on the held-out queries.
    Reported precision and F1 are means over the test folds.
    """
    labeled = sorted(labeled, key=lambda item: item.query_id)
    if len(labeled) < folds:
        raise EvaluationError(f"{len(labeled)} labeled queries cannot fill {folds} folds")
    vectors = project_labeled(model, labeled, stopwords)
    unprojected = [qid for qid, vec in vectors.items() if vec is None]
    if unprojected:
        logger.warning(f"{len(unprojected)} labeled queries have no embedded terms")

    splitter = KFold(n_splits=folds, shuffle=True, random_state=seed)
    rows, per_query = [], []
    for f, (train_idx, test_idx) in enumerate(splitter.split(labeled), start=1):
        train = [labeled[i] for i in train_idx]
        test = [labeled[i] for i in test_idx]
        centroids = _centroids_from_vectors(train, vectors, categories)

        best_t, best_f1 = None, -1.0
        for t in sorted(t_grid):
            score = evaluate_classification(_predict(centroids, vectors, train, t), train, averaging).f1
            if score > best_f1:
                best_t, best_f1 = t, score

        predictions = _predict(centroids, vectors, test, best_t)
        projected = sum(1 for labels in predictions.values() if labels)
        if projected:
            scores = evaluate_classification(predictions, test, averaging)
            precision, recall, f1 = scores.precision, scores.recall, scores.f1
            fold_f1 = scores.per_query_f1
        else:
            logger.warning(f"Fold {f}: no test query has embedded terms; fold scored zero")
            precision = recall = f1 = 0.0
            fold_f1 = pd.Series(0.0, index=[item.query_id for item in test], name="f1")
        rows.append({
            "fold": f,
            "t": best_t,
            "train_f1": best_f1,
            "projected": projected,
            "precision": precision,
            "recall": recall,
            "f1": f1,
        })
        per_query.append(fold_f1)
        logger.info(f"Fold {f}: t={best_t}, precision={precision:.4f}, F1={f1:.4f}")

    frame = pd.DataFrame(rows)
    return CrossValidationResult(
        precision=float(frame["precision"].mean()),
        f1=float(frame["f1"].mean()),
        folds=frame,
        per_query_f1=pd.concat(per_query).sort_index(),
        unprojected=unprojected,
    )


def read_categories(path: str) -> List[str]:
    with open(path, "r", encoding="utf-8") as f:
        labels = [line.strip() for line in f if line.strip()]
    if len(set(labels)) != len(labels):
        raise FormatError("duplicate category label", path=path)
    return labels


def read_labeled_queries(path: str, categories: Optional[Sequence[str]] = None) -> List[LabelSet]:
    known = set(categories) if categories is not None else None
    items, seen = [], set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError("expected 'qid<TAB>query<TAB>editor:labels;...'", path=path, line=line_no)
            qid, text, editors_text = parts
            if qid in seen:
                raise FormatError(f"duplicate query id '{qid}'", path=path, line=line_no)
            seen.add(qid)
            editors, names = [], []
            for chunk in filter(None, editors_text.split(";")):
                name, sep, labels_text = chunk.partition(":")
                if not sep:
                    raise FormatError(f"editor entry '{chunk}' lacks ':'", path=path, line=line_no)
                names.append(name.strip())
                labels = [label.strip() for label in labels_text.split(",") if label.strip()]
                unknown = [label for label in labels if known is not None and label not in known]
                if unknown:
                    raise FormatError(f"unknown category '{unknown[0]}'", path=path, line=line_no)
                editors.append(labels)
            if not editors:
                raise FormatError(f"query '{qid}' has no editor labels", path=path, line=line_no)
            try:
                items.append(LabelSet(qid, text, editors, names))
            except ValueError as e:
                raise FormatError(str(e), path=path, line=line_no) from e
    return items


def write_labeled_queries(items: Sequence[LabelSet], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for item in items:
            editors = ";".join(f"{name}:{','.join(labels)}" for name, labels in item.by_editor().items())
            f.write(f"{item.query_id}\t{item.text}\t{editors}\n")


def write_predictions(predictions: Mapping[str, Sequence[str]], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(predictions):
            f.write(f"{qid}\t{','.join(predictions[qid])}\n")


def read_predictions(path: str) -> Dict[str, List[str]]:
    predictions = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            qid, sep, labels = line.partition("\t")
            if not sep:
                raise FormatError("expected 'qid<TAB>labels'", path=path, line=line_no)
            predictions[qid] = [label for label in labels.split(",") if label]
    return predictions

# -*- coding: utf-8 -*-
"""
Experiments spanning both applications: the side-by-side contrast of two
embedding models, and sweeps that retrain a model over embedding sizes and
over fractions of the training queries.
"""

import math
from dataclasses import dataclass
from typing import AbstractSet, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config import ClassificationConfig, ExpansionGridConfig, TrainConfig
from src.classification.query_classification import (
    CrossValidationResult,
    LabelSet,
    cross_validate_classification,
)
from src.data.dataset import TrainingSet
from src.embedding.model import EmbeddingModel
from src.embedding.trainer import train
from src.evaluation.metrics import METRIC_COLUMNS, Qrels, paired_ttest
from src.expansion.query_expansion import ExpansionExperiment, ExpansionReport, run_expansion_experiment
from src.index.corpus import CorpusIndex
from src.retrieval.language_model import DEFAULT_MU
from src.utils.logging import get_logger

logger = get_logger(__name__)


@dataclass
class ModelComparison:
    """Cross-validated expansion and classification results of two models."""

    names: Tuple[str, str]
    expansion: Dict[str, ExpansionReport]
    classification: Dict[str, CrossValidationResult]

    def _row(self, task: str, measure: str, first: float, second: float, p_value: float) -> dict:
        diff = float(first) - float(second)
        if diff > 0:
            better = self.names[0]
        elif diff < 0:
            better = self.names[1]
        else:
            better = "tie"
        return {
            "task": task,
            "measure": measure,
            self.names[0]: float(first),
            self.names[1]: float(second),
            "difference": diff,
            "sign": int(np.sign(diff)),
            "better": better,
            "p_value": p_value,
        }

    def table(self) -> pd.DataFrame:
        """One row per measure; ``difference`` and ``sign`` are first minus second."""
        first, second = self.names
        a, b = self.expansion[first].expanded, self.expansion[second].expanded
        qids = a.index.drop("all").intersection(b.index.drop("all"))
        rows = []
        for metric in METRIC_COLUMNS:
            test = paired_ttest(a.loc[qids, metric].values, b.loc[qids, metric].values)
            rows.append(self._row("expansion", metric, a.loc["all", metric], b.loc["all", metric], test.p_value))
        if self.classification:
            x, y = self.classification[first], self.classification[second]
            # per-query precision is not kept by the CV harness
            rows.append(self._row("classification", "precision", x.precision, y.precision, math.nan))
            rows.append(self._row("classification", "f1", x.f1, y.f1, x.compare(y).p_value))
        return pd.DataFrame(rows)

    def signs(self) -> Dict[str, int]:
        return {row["measure"]: int(row["sign"]) for row in self.table().to_dict("records")}

    def write(self, path: str) -> None:
        self.table().to_csv(path, sep="\t", index=False, float_format="%.6f")


def compare_models(
    models: Sequence[Tuple[str, EmbeddingModel]],
    index: CorpusIndex,
    queries: Iterable[Tuple[str, str]],
    qrels: Qrels,
    labeled: Optional[Sequence[LabelSet]] = None,
    grid: Optional[ExpansionGridConfig] = None,
    classification: Optional[ClassificationConfig] = None,
    categories: Optional[Sequence[str]] = None,
    mu: float = DEFAULT_MU,
    depth: int = 1000,
    stopwords: AbstractSet[str] = frozenset(),
    seed: int = 1,
    workers: int = 1,
    progress: bool = False,
) -> ModelComparison:
    """
    Run the cross-validated expansion experiment (and, given labeled queries,
    the classification CV) for two named models and log which one wins on
    every measure.
    """
    if len(models) != 2:
        raise ValueError("a comparison takes exactly two models")
    names = (models[0][0], models[1][0])
    if names[0] == names[1]:
        raise ValueError(f"compared models share the name '{names[0]}'")
    queries = list(queries)
    cls = classification or ClassificationConfig()

    expansion, classified = {}, {}
    for name, model in models:
        logger.info(f"Evaluating '{name}'")
        expansion[name] = run_expansion_experiment(
            model, index, queries, qrels, grid=grid, mu=mu, depth=depth,
            stopwords=stopwords, workers=workers, progress=progress,
        )
        if labeled:
            classified[name] = cross_validate_classification(
                model, labeled, cls.t_grid, cls.folds, seed, cls.averaging, categories, stopwords
            )

    comparison = ModelComparison(names, expansion, classified)
    for row in comparison.table().to_dict("records"):
        logger.info(
            f"{row['task']} {row['measure']}: {names[0]} {row[names[0]]:.4f} vs "
            f"{names[1]} {row[names[1]]:.4f} ({row['better']})"
        )
    return comparison


def training_sweeps(
    index: CorpusIndex,
    training: TrainingSet,
    base: TrainConfig,
    queries: Iterable[Tuple[str, str]],
    qrels: Qrels,
    dims: Sequence[int] = (),
    fractions: Sequence[float] = (),
    labeled: Optional[Sequence[LabelSet]] = None,
    alpha: float = 0.5,
    num_terms: int = 10,
    classification: Optional[ClassificationConfig] = None,
    categories: Optional[Sequence[str]] = None,
    mu: float = DEFAULT_MU,
    depth: int = 1000,
    stopwords: AbstractSet[str] = frozenset(),
    noise: Optional[np.ndarray] = None,
    workers: int = 1,
) -> pd.DataFrame:
    """
    Retrain at every size in ``dims`` on the whole training set, then at
    ``base.dim`` on every fraction of the training queries. Each model is
    scored by expansion at fixed (alpha, m) over every judged query and, given
    labeled queries, by cross-validated classification F1.
    """
    queries = list(queries)
    cls = classification or ClassificationConfig()
    settings: List[Tuple[str, TrainConfig, float]] = [
        ("dim", base.model_copy(update={"dim": int(d)}), 1.0) for d in dims
    ]
    settings += [("fraction", base, float(f)) for f in fractions]

    rows = []
    for sweep, config, fraction in settings:
        subset = training if fraction == 1.0 else training.sample(fraction, seed=base.seed)
        model = train(index, subset, config, noise=noise)
        experiment = ExpansionExperiment(model, index, queries, qrels, num_terms, mu, depth, stopwords, workers)
        frame = experiment.evaluate(alpha, num_terms)
        row = {
            "sweep": sweep,
            "alpha": alpha,
            "num_terms": num_terms,
            "dim": config.dim,
            "fraction": fraction,
            "queries": len(subset),
            **{metric: float(frame[metric].mean()) for metric in METRIC_COLUMNS},
            "f1": math.nan,
        }
        if labeled:
            row["f1"] = cross_validate_classification(
                model, labeled, cls.t_grid, cls.folds, base.seed, cls.averaging, categories, stopwords
            ).f1
        logger.info(f"{sweep}: d={config.dim}, {len(subset)} queries -> MAP {row['map']:.4f}, F1 {row['f1']:.4f}")
        rows.append(row)
    return pd.DataFrame(rows)

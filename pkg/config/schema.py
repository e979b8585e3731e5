# -*- coding: utf-8 -*-
"""
Validated run configuration.

Every section mirrors a top-level key of ``relemb_config.yaml``. Defaults are the
full-scale experiment settings (mu=1500, 10 feedback documents, 300
dimensions, the alpha / m / t grids).
"""

from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class PathsConfig(_Section):
    corpus: Optional[str] = None
    stopwords: Optional[str] = None
    query_log: Optional[str] = None
    train_queries: str = "output/train_queries.tsv"
    queries: Optional[str] = None
    qrels: Optional[str] = None
    labels: Optional[str] = None
    test_labels: Optional[str] = None
    categories: Optional[str] = None
    run: Optional[str] = None
    index: str = "output/index.bin"
    training: str = "output/training"
    model: str = "output/model/relemb"
    output: str = "output"


class IndexConfig(_Section):
    min_cf: int = Field(1, ge=1)


class RetrievalConfig(_Section):
    mu: float = Field(1500.0, gt=0)
    k: int = Field(10, ge=1)
    depth: int = Field(1000, ge=1)
    max_terms: Optional[int] = Field(None, ge=1)
    tag: str = "relemb"


class TrainConfig(_Section):
    kind: Literal["rlm", "rpe"] = "rlm"
    output: Literal["hs", "softmax"] = "hs"
    dim: int = Field(300, ge=1)
    learning_rate: float = Field(0.1, gt=0)
    batch_size: int = Field(64, ge=1)
    epochs: int = Field(5, ge=1)
    positives: int = Field(20, ge=1)
    negative_multiple: int = Field(5, ge=1)
    noise_exponent: float = Field(0.75, gt=0)
    target_mode: Literal["exact", "sample"] = "exact"
    target_samples: int = Field(20, ge=1)
    bias: bool = False
    lr_decay: bool = False
    min_lr_fraction: float = Field(1e-4, gt=0, le=1)
    seed: int = 1
    workers: int = Field(1, ge=1)

    @property
    def negatives(self) -> int:
        return self.positives * self.negative_multiple

    @property
    def deterministic(self) -> bool:
        return self.workers == 1


class ExpansionGridConfig(_Section):
    alphas: List[float] = Field(default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 10)])
    num_terms: List[int] = Field(default_factory=lambda: list(range(10, 101, 10)))
    folds: int = Field(2, ge=2)
    alpha: float = Field(0.5, ge=0, le=1)
    terms: int = Field(10, ge=1)

    @field_validator("alphas")
    @classmethod
    def _alphas_in_range(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("alpha grid is empty")
        if any(a < 0 or a > 1 for a in value):
            raise ValueError("alpha values must lie in [0, 1]")
        return value

    @field_validator("num_terms")
    @classmethod
    def _terms_positive(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("expansion term grid is empty")
        if any(m < 1 for m in value):
            raise ValueError("expansion term counts must be >= 1")
        return value


class ClassificationConfig(_Section):
    t_grid: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    folds: int = Field(5, ge=2)
    averaging: Literal["micro", "macro"] = "micro"
    t: int = Field(3, ge=1, le=5)

    @field_validator("t_grid")
    @classmethod
    def _t_grid(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("t grid is empty")
        if any(t < 1 or t > 5 for t in value):
            raise ValueError("t values must lie in 1..5")
        return sorted(set(value))


class SensitivityConfig(_Section):
    dims: List[int] = Field(default_factory=lambda: [100, 200, 300, 400, 500])
    fractions: List[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])

    @field_validator("dims")
    @classmethod
    def _dims_positive(cls, value: List[int]) -> List[int]:
        if any(d < 1 for d in value):
            raise ValueError("embedding sizes must be >= 1")
        return value

    @field_validator("fractions")
    @classmethod
    def _fractions_in_range(cls, value: List[float]) -> List[float]:
        if any(f <= 0 or f > 1 for f in value):
            raise ValueError("training fractions must lie in (0, 1]")
        return value


class RunConfig(_Section):
    paths: PathsConfig = Field(default_factory=PathsConfig)
    index: IndexConfig = Field(default_factory=IndexConfig)
    retrieval: RetrievalConfig = Field(default_factory=RetrievalConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    expansion: ExpansionGridConfig = Field(default_factory=ExpansionGridConfig)
    classification: ClassificationConfig = Field(default_factory=ClassificationConfig)
    sensitivity: SensitivityConfig = Field(default_factory=SensitivityConfig)
    seed: int = 1
    workers: int = Field(1, ge=1)
    progress: bool = True

    @model_validator(mode="after")
    def _propagate_run_settings(self):
        # the top-level seed/workers govern the trainer unless it sets its own
        fields = self.training.model_fields_set
        if "seed" not in fields:
            self.training.seed = self.seed
        if "workers" not in fields:
            self.training.workers = self.workers
        return self

    def require(self, *names: str) -> Dict[str, str]:
        """Return the named input paths, checking that each is set and exists."""
        from src.core.exceptions import ConfigError, MissingInputError

        resolved = {}
        for name in names:
            value = getattr(self.paths, name)
            if not value:
                raise ConfigError(f"paths.{name} is not set")
            if not Path(value).exists():
                raise MissingInputError(value, role=f"paths.{name}")
            resolved[name] = value
        return resolved

    def echo(self) -> dict:
        return self.model_dump(mode="json")

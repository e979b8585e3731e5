# -*- coding: utf-8 -*-

import os
from typing import Optional

import numpy as np

from config import RunConfig
from src.data.dataset import (
    NOISE_FILE,
    TrainingSet,
    noise_distribution,
    read_noise_exponent,
    read_noise_table,
    read_training_set,
)
from src.embedding.checkpoint import save_model
from src.embedding.model import RPE, EmbeddingModel
from src.embedding.trainer import Trainer
from src.index.corpus import CorpusIndex
from src.utils.logging import get_logger

logger = get_logger(__name__)


def load_noise(training_dir: str, training: TrainingSet, exponent: float) -> np.ndarray:
    """
    The noise table written with the training set, or a fresh U^exponent
    table when that file is missing or was written with another exponent.
    """
    path = os.path.join(training_dir, NOISE_FILE)
    if os.path.exists(path):
        stored = read_noise_exponent(path)
        if stored == exponent:
            return read_noise_table(path, training.vocabulary)
        logger.info(f"{path} was written with exponent {stored}; regenerating with {exponent}")
    return noise_distribution(training, exponent)


class TrainingPipeline:
    """
    TrainingPipeline handles the complete workflow of loading the index and
    the offline training set, training an embedding model and writing the
    checkpoint.
    """

    def __init__(self, config: RunConfig, index: Optional[CorpusIndex] = None):
        self.config = config
        self.index = index
        self.prefix = config.paths.model

    def run(self) -> EmbeddingModel:
        # 1. Load the index and training set
        if self.index is None:
            self.index = CorpusIndex.load(self.config.require("index")["index"])
        training_dir = self.config.require("training")["training"]
        training = read_training_set(training_dir, self.index.vocabulary)
        logger.info(f"Training set loaded: {len(training)} queries over {training.num_terms} terms")

        # 2. Noise table for RPE
        noise = None
        if self.config.training.kind == RPE:
            noise = load_noise(training_dir, training, self.config.training.noise_exponent)

        # 3. Train and save
        trainer = Trainer(self.index, training, self.config.training, noise=noise, progress=self.config.progress)
        model = trainer.train()
        model.metadata["run_config"] = self.config.echo()
        save_model(model, self.prefix, losses=trainer.epoch_losses)
        logger.info(f"Training pipeline completed. Model saved at {self.prefix}")
        return model

# -*- coding: utf-8 -*-
import numpy as np

from src.embedding.huffman import build_huffman
from src.embedding.model import RLM, EmbeddingModel


def random_model(kind, n, d, seed, output="hs", bias=False, scale=0.5):
    """Model with every parameter random, for gradient and scoring checks."""
    rng = np.random.default_rng(seed)
    terms = [f"w{i}" for i in range(n)]
    tree = build_huffman(rng.random(n) + 0.1) if kind == RLM and output == "hs" else None
    model = EmbeddingModel.initialize(kind, terms, d, rng, output=output, bias=bias, tree=tree)
    for param in model.parameters().values():
        param[...] = rng.normal(scale=scale, size=param.shape)
    return model

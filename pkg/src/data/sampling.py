# -*- coding: utf-8 -*-

from typing import Optional, Sequence

import numpy as np


class AliasSampler:
    """
    Constant-time categorical sampling with Vose's alias tables.

    ``outcomes`` maps table slots to returned values, so a sparse distribution
    over term ids can be sampled without materializing the full vocabulary.
    """

    def __init__(self, probs: Sequence[float], outcomes: Optional[Sequence[int]] = None):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 1 or len(probs) == 0:
            raise ValueError("alias sampler needs a non-empty 1-d probability vector")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite and non-negative")
        total = probs.sum()
        if total <= 0:
            raise ValueError("probabilities sum to zero")

        k = len(probs)
        scaled = probs * (k / total)
        self.prob = np.ones(k, dtype=np.float64)
        self.alias = np.arange(k, dtype=np.int64)

        # Sort the outcomes into those with mass smaller and larger than 1/K
        small = [i for i in range(k) if scaled[i] < 1.0]
        large = [i for i in range(k) if scaled[i] >= 1.0]
        while small and large:
            s = small.pop()
            l = large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = l
            scaled[l] = (scaled[l] + scaled[s]) - 1.0
            if scaled[l] < 1.0:
                small.append(l)
            else:
                large.append(l)
        # leftovers are 1 up to rounding

        if outcomes is None:
            self.outcomes = np.arange(k, dtype=np.int64)
        else:
            self.outcomes = np.asarray(outcomes, dtype=np.int64)
            if self.outcomes.shape != probs.shape:
                raise ValueError("outcomes and probabilities differ in length")

    def __len__(self) -> int:
        return len(self.prob)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` outcomes."""
        slots = rng.integers(0, len(self.prob), size=n)
        keep = rng.random(n) < self.prob[slots]
        return self.outcomes[np.where(keep, slots, self.alias[slots])]

"""Shared training-loop machinery: minibatch iteration, the validation
metric used for early stopping, and best-state snapshotting."""
from __future__ import annotations

import numpy as np


def iterate_minibatches(n: int, batch_size: int, rng: np.random.Generator):
    """Yield shuffled index batches covering all n records once."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def validation_metric(t: np.ndarray, l: np.ndarray, t_hat: np.ndarray, t_max: float) -> float:
    """Early-stopping score: median non-censored RAE plus median censored RAE
    (each term dropped when its group is empty). Lower is better."""
    nc = l == 1
    score = 0.0
    if nc.any():
        score += float(np.median(np.abs(t_hat[nc] - t[nc]))) / t_max
    if (~nc).any():
        score += float(np.median(np.maximum(0.0, t[~nc] - t_hat[~nc]))) / t_max
    return score


class EarlyStopper:
    """Track the best validation score and the model state that produced it."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_score = np.inf
        self.best_state: dict | None = None
        self.best_epoch = -1
        self.stale = 0

    def update(self, score: float, epoch: int, state: dict) -> bool:
        """Record a new score; returns True when patience is exhausted."""
        if score < self.best_score:
            self.best_score = score
            self.best_state = {k: v.copy() for k, v in state.items()}
            self.best_epoch = epoch
            self.stale = 0
        else:
            self.stale += 1
        return self.patience > 0 and self.stale >= self.patience

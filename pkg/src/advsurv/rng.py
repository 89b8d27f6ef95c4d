"""Seeded random-stream management.

All randomness in a run flows from one integer seed, fanned out into named
sub-streams (data shuffling, weight init, generator noise, dropout masks,
evaluation sampling). Changing how one component consumes randomness does not
perturb the draws seen by the others.
"""
from __future__ import annotations

import numpy as np

STREAM_NAMES = ("data", "init", "noise", "dropout", "eval")


class RngStreams:
    """One `numpy.random.Generator` per named sub-stream, derived from a seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        root = np.random.SeedSequence(self.seed)
        children = root.spawn(len(STREAM_NAMES))
        self._streams = {
            name: np.random.default_rng(child)
            for name, child in zip(STREAM_NAMES, children)
        }

    def __getattr__(self, name: str) -> np.random.Generator:
        try:
            return self._streams[name]
        except KeyError:
            raise AttributeError(name) from None

    def child(self, name: str, index: int) -> np.random.Generator:
        """Independent per-record generator, stable under reordering."""
        seq = np.random.SeedSequence(
            self.seed, spawn_key=(len(STREAM_NAMES), STREAM_NAMES.index(name), index)
        )
        return np.random.default_rng(seq)

"""Measurement records and the seeded stand-in for the photon source."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import prob0


@dataclass(frozen=True)
class BatchRecord:
    """Z-basis counts of one batch: n0 outcomes |0>, n1 outcomes |1>."""

    n0: int
    n1: int

    def __post_init__(self):
        if self.n0 < 0 or self.n1 < 0:
            raise ValueError(f"counts must be non-negative, got n0={self.n0}, n1={self.n1}")

    @property
    def n(self) -> int:
        return self.n0 + self.n1


def sample_batch(truth, n: int, rng: np.random.Generator) -> BatchRecord:
    """Draw n0 ~ Binomial(n, p0(truth)) from ``rng``."""
    if n <= 0:
        raise ValueError(f"batch size must be positive, got {n}")
    theta, gamma = (truth.theta, truth.gamma) if hasattr(truth, "theta") else truth
    n0 = int(rng.binomial(n, float(prob0(theta, gamma))))
    return BatchRecord(n0, n - n0)

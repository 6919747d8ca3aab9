"""Ensemble summaries and the clock inversion used by the time change."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class EnsembleStats:
    n: int
    mean: float
    se: float
    extra: dict = field(default_factory=dict)

    @property
    def sd(self) -> float:
        return self.se * math.sqrt(self.n) if self.n > 0 else float("nan")

    @classmethod
    def from_samples(cls, x, **extra) -> "EnsembleStats":
        x = np.asarray(x, dtype=float)
        n = x.size
        if n == 0:
            return cls(0, float("nan"), float("nan"), dict(extra))
        mean = float(x.mean())
        se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return cls(n, mean, se, dict(extra))

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        """Statistics of the union of both samples (Chan et al. pairwise update)."""
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        m2a = (self.sd ** 2) * (self.n - 1) if self.n > 1 else 0.0
        m2b = (other.sd ** 2) * (other.n - 1) if other.n > 1 else 0.0
        mean = self.mean + delta * other.n / n
        m2 = m2a + m2b + delta * delta * self.n * other.n / n
        se = math.sqrt(m2 / (n - 1) / n)
        return EnsembleStats(n, mean, se, {**self.extra, **other.extra})

    def within(self, target: float, k: float) -> bool:
        return abs(self.mean - target) <= k * self.se


@dataclass(frozen=True, eq=False)
class TimeChange:
    """Clock ``a = A_t`` on a grid and its inverse ``tau(a)``."""

    t: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.A) <= 0):
            raise ValueError("clock must be strictly increasing")

    def tau(self, a):
        a = np.asarray(a, dtype=float)
        if np.any(a < self.A[0]) or np.any(a > self.A[-1]):
            raise ValueError("clock value outside the recorded range")
        return np.interp(a, self.A, self.t)

    def __call__(self, t):
        return np.interp(t, self.t, self.A)


def two_sample_z(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    se = math.sqrt(x.var(ddof=1) / x.size + y.var(ddof=1) / y.size)
    return (x.mean() - y.mean()) / se

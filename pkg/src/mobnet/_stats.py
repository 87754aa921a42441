"""Streaming mean/variance and confidence intervals for replica estimates."""

from __future__ import annotations

import math

from scipy import stats as _st

__all__ = ["RunningStats", "t_halfwidth"]


class RunningStats:
    """Welford accumulator: numerically stable mean and variance updates."""

    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def push(self, x):
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def merge(self, other):
        """Combine two accumulators as if their samples were interleaved."""
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta * delta * self.n * other.n / n
        self.n = n
        return self

    @property
    def variance(self):
        """Unbiased sample variance; 0 until two samples exist."""
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def stderr(self):
        return math.sqrt(self.variance / self.n) if self.n > 1 else 0.0


def t_halfwidth(stats, level=0.95):
    """Two-sided Student-t confidence halfwidth for the mean."""
    if stats.n < 2:
        return math.inf
    q = _st.t.ppf(0.5 + level / 2.0, stats.n - 1)
    return q * stats.stderr

"""Free random walk on the unbounded lattice (1/k)Z^2.

A walker takes steps at total rate r (r/4 per direction) and is never
absorbed. Its mean squared displacement after time t is exactly r*t/k^2,
which is the scale-invariance argument behind speeding walks up as K^2:
the walk on a finer lattice covers the same ground when its rate grows
with the square of the refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _engine
from ._stats import RunningStats, t_halfwidth

__all__ = ["FreeWalkConfig", "walk_samples", "msd", "msd_theory"]


@dataclass(frozen=True)
class FreeWalkConfig:
    """k: lattice refinement (spacing 1/k); r: total jump rate; t: horizon."""

    k: int
    r: float
    t: float
    replicas: int = 10000

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.r <= 0:
            raise ValueError("jump rate must be positive")
        if self.t < 0:
            raise ValueError("horizon must be nonnegative")
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")


def _seed_word(seed):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(0,))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def walk_samples(config, seed=0):
    """Per-replica samples, columns (squared distance, x, y).

    The number of steps in [0, t] is Poisson(r*t); steps split between
    axes and signs by fair binomials, which has the same law as drawing
    each step's direction uniformly.
    """
    return _engine.free_walk_samples(config.k, config.r, config.t,
                                     config.replicas, _seed_word(seed))


def msd(config, seed=0):
    """Monte Carlo mean squared displacement with 95% CI halfwidth."""
    samples = walk_samples(config, seed)
    stats = RunningStats()
    n = samples.shape[0]
    stats.n = n
    stats.mean = float(samples[:, 0].mean())
    stats.m2 = float(((samples[:, 0] - stats.mean) ** 2).sum())
    half = t_halfwidth(stats)
    if math.isinf(half):
        half = 0.0
    return stats.mean, half


def msd_theory(config):
    """Exact mean squared displacement r*t/k^2."""
    return config.r * config.t / (config.k * config.k)

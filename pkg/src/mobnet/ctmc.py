"""Exact stochastic simulation of the mobile reaction network.

The population process is a CTMC over per-region, per-state counts.
Reaction channels fire region-locally at rate N*f_j(counts/N, b); each
node of state l additionally walks to one of its 4 neighbour regions at
rate muK[l] = mu_l*K^2 per neighbour, and walking onto the border removes
it. Two execution paths share these semantics: a jitted event loop for
replica estimation and a plain-Python reference used by step().
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _engine, ratelaws
from ._stats import RunningStats, t_halfwidth

__all__ = [
    "PopulationState",
    "TransitionTable",
    "Trajectory",
    "ReplicaEstimate",
    "build_initial_state",
    "step",
    "simulate",
    "off_fraction",
    "run_replicas",
]


@dataclass
class PopulationState:
    """Counts indexed (x region, y region, state); border rows stay zero."""

    counts: np.ndarray
    time: float = 0.0

    def total(self):
        return int(self.counts.sum())


@dataclass(frozen=True)
class Trajectory:
    """States sampled at fixed times, plus the initial state for ratios."""

    times: np.ndarray
    counts: np.ndarray
    initial: np.ndarray
    N: int

    def at(self, t):
        """Counts at sample time t; t must be one of the sampled times."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[idx], t, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"time {t} was not sampled")
        return self.counts[idx]


class TransitionTable:
    """Per-region channel rates for a model on a given grid at scale N.

    Reaction channels: one per reaction, rate N*f_j(counts/N, b(region)),
    clipped at zero and disabled when a consumed count is short. Movement
    channels: per state and interior neighbour, rate muK_l*A_l; border
    neighbours lump into one exit channel of rate (number of border
    neighbours)*muK_l*A_l.
    """

    def __init__(self, spec, grid, N):
        self.spec = spec
        self.grid = grid
        self.N = int(N)
        self.muK = spec.scaled_migration(grid.K)
        self.bgrids = spec.param_grids(grid)
        self.interior = [(i, j) for i in range(1, grid.K)
                         for j in range(1, grid.K)]

    def reaction_rate(self, counts, i, j, r):
        dens = counts[i, j] / self.N
        rate = self.N * ratelaws.eval_scalar(r.rate, dens, self.bgrids[:, i, j])
        if rate < 0.0:
            return 0.0
        for l, c in enumerate(r.consumed):
            if counts[i, j, l] < c:
                return 0.0
        return rate

    def channels(self, counts, i, j):
        """All (rate, effect) pairs for one interior region.

        effect is (di, dj, delta) with delta applied at (i, j) and, for a
        movement, a paired (+1) at the neighbour; exits carry di=dj=None.
        """
        out = []
        L = self.spec.n_states
        for r in self.spec.reactions:
            out.append((self.reaction_rate(counts, i, j, r),
                        ("react", np.asarray(r.net, dtype=np.int64))))
        K = self.grid.K
        for l in range(L):
            per = self.muK[l] * counts[i, j, l]
            exits = 0
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                ni, nj = i + di, j + dj
                if 0 < ni < K and 0 < nj < K:
                    out.append((per, ("move", l, ni, nj)))
                else:
                    exits += 1
            if exits:
                out.append((exits * per, ("exit", l)))
        return out


def build_initial_state(spec, grid, N):
    """Floor-quantized counts floor(N*a0) on the interior, zero elsewhere."""
    if N < 1:
        raise ValueError("N must be at least 1")
    density = spec.initial_density(grid)
    counts = np.floor(N * density).astype(np.int64)
    counts[:, grid.is_border()] = 0
    return PopulationState(counts=np.moveaxis(counts, 0, -1), time=0.0)


def step(state, table, rng):
    """One exact transition via the direct method.

    Returns (new state, elapsed). On absorption (total rate zero) the
    state is returned unchanged with elapsed = inf; numeric failures
    raise instead, so the two cases are distinguishable.
    """
    counts = state.counts
    rates = []
    effects = []
    for i, j in table.interior:
        for rate, effect in table.channels(counts, i, j):
            if rate > 0.0:
                rates.append(rate)
                effects.append((i, j, effect))
    lam = math.fsum(rates)
    if not math.isfinite(lam):
        raise FloatingPointError("total transition rate is not finite")
    if lam <= 0.0:
        return state, math.inf
    elapsed = rng.exponential(1.0 / lam)
    u = rng.random() * lam
    acc = 0.0
    chosen = len(rates) - 1
    for idx, rate in enumerate(rates):
        acc += rate
        if u < acc:
            chosen = idx
            break
    i, j, effect = effects[chosen]
    new = counts.copy()
    if effect[0] == "react":
        new[i, j] += effect[1]
    elif effect[0] == "move":
        _, l, ni, nj = effect
        new[i, j, l] -= 1
        new[ni, nj, l] += 1
    else:
        new[i, j, effect[1]] -= 1
    if (new < 0).any():
        raise FloatingPointError("transition produced a negative count")
    return PopulationState(counts=new, time=state.time + elapsed), elapsed


def _engine_inputs(spec, grid, N):
    nbr = grid.neighbor_table()
    ops, args, consts, offsets, depth = spec.rate_programs()
    L = spec.n_states
    J = len(spec.reactions)
    consumed = np.asarray([r.consumed for r in spec.reactions],
                          dtype=np.int64).reshape(J, L)
    net = np.asarray([r.net for r in spec.reactions],
                     dtype=np.int64).reshape(J, L)
    bgrids = spec.param_grids(grid)
    bvals = np.ascontiguousarray(
        bgrids[:, 1:-1, 1:-1].reshape(spec.n_params, grid.n_interior).T)
    return nbr, ops, args, consts, offsets, depth, consumed, net, bvals


def _interior_counts(state, grid):
    inner = state.counts[1:-1, 1:-1, :]
    return np.ascontiguousarray(
        inner.reshape(grid.n_interior, state.counts.shape[-1]))


def _expand(flat, grid, L):
    counts = np.zeros((grid.K + 1, grid.K + 1, L), dtype=np.int64)
    counts[1:-1, 1:-1, :] = flat.reshape(grid.K - 1, grid.K - 1, L)
    return counts


def _seed_word(seed, i):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(i,))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def simulate(spec, grid, N, T, seed, sample_times=None, method="fast"):
    """One trajectory, sampled at the requested times (default just T).

    method "fast" runs the jitted event loop; "reference" runs the
    plain-Python step() loop. The two draw different random numbers for
    the same seed but realize the same process.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    times = np.asarray(sample_times if sample_times is not None else [T],
                       dtype=np.float64)
    if times.ndim != 1 or len(times) == 0 or (np.diff(times) <= 0).any():
        raise ValueError("sample times must be strictly increasing")
    if times[0] < 0 or times[-1] > T:
        raise ValueError("sample times must lie in [0, T]")
    state0 = build_initial_state(spec, grid, N)
    L = spec.n_states
    if method == "reference":
        table = TransitionTable(spec, grid, N)
        rng = np.random.Generator(np.random.Philox(
            np.random.SeedSequence(entropy=seed, spawn_key=(0,))))
        out = np.zeros((len(times), grid.K + 1, grid.K + 1, L), dtype=np.int64)
        state = state0
        s = 0
        while s < len(times):
            nxt, elapsed = step(state, table, rng)
            while s < len(times) and times[s] < nxt.time:
                out[s] = state.counts
                s += 1
            if math.isinf(elapsed):
                for rest in range(s, len(times)):
                    out[rest] = state.counts
                break
            state = nxt
        return Trajectory(times=times, counts=out, initial=state0.counts, N=N)

    (nbr, ops, args, consts, offsets, depth,
     consumed, net, bvals) = _engine_inputs(spec, grid, N)
    flat0 = _interior_counts(state0, grid)
    raw = _engine.run_core(flat0, nbr, grid.K - 1, bvals, ops, args, consts,
                           offsets, consumed, net, spec.scaled_migration(grid.K),
                           int(N), times, _seed_word(seed, 0), depth)
    counts = np.stack([_expand(raw[s], grid, L) for s in range(len(times))])
    return Trajectory(times=times, counts=counts, initial=state0.counts, N=N)


def off_fraction(trajectory, spec, state, T):
    """Count in one state at time T over the total initial count."""
    if isinstance(state, str):
        state = spec.states.index(state)
    denom = trajectory.initial.sum()
    if denom == 0:
        raise ValueError("initial population is zero")
    return float(trajectory.at(T)[:, :, state].sum()) / float(denom)


@dataclass(frozen=True)
class ReplicaEstimate:
    """Replica-mean metric with a 95% Student-t confidence interval."""

    metric: str
    n: int
    mean: float
    variance: float
    ci_halfwidth: float
    capped: bool

    @property
    def ci_low(self):
        return self.mean - self.ci_halfwidth

    @property
    def ci_high(self):
        return self.mean + self.ci_halfwidth


def _replica_metric(payload, i):
    (spec_N, n_side, flat0, nbr, bvals, ops, args, consts, offsets,
     consumed, net, muK, T, seed, depth, col, denom) = payload
    raw = _engine.run_core(flat0, nbr, n_side, bvals, ops, args, consts,
                           offsets, consumed, net, muK,
                           spec_N, np.asarray([T]), _seed_word(seed, i), depth)
    return float(raw[-1, :, col].sum()) / denom


def run_replicas(spec, grid, N, T, metric=0, seed=0, min_replicas=10,
                 rel_ci_target=0.05, replica_cap=10000, jobs=1):
    """Replicate until the 95% CI halfwidth is within rel_ci_target*|mean|.

    Replica i draws its stream from (seed, i), so results do not depend
    on scheduling; the stopping rule consumes replicas in index order.
    Returns a ReplicaEstimate; capped=True flags a stop forced by
    replica_cap before the target was met.
    """
    if min_replicas < 2:
        raise ValueError("min_replicas must be at least 2")
    if isinstance(metric, str):
        metric = spec.states.index(metric)
    state0 = build_initial_state(spec, grid, N)
    denom = float(state0.counts.sum())
    if denom == 0:
        raise ValueError("initial population is zero")
    (nbr, ops, args, consts, offsets, depth,
     consumed, net, bvals) = _engine_inputs(spec, grid, N)
    payload = (int(N), grid.K - 1, _interior_counts(state0, grid), nbr, bvals,
               ops, args, consts, offsets, consumed, net,
               spec.scaled_migration(grid.K), float(T), seed, depth,
               int(metric), denom)

    stats = RunningStats()
    capped = False

    def done():
        if stats.n < min_replicas:
            return False
        return t_halfwidth(stats) <= rel_ci_target * abs(stats.mean)

    if jobs <= 1:
        i = 0
        while not done():
            if i >= replica_cap:
                capped = True
                break
            stats.push(_replica_metric(payload, i))
            i += 1
    else:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=jobs) as pool:
            i = 0
            while not done():
                if i >= replica_cap:
                    capped = True
                    break
                batch = min(max(min_replicas, stats.n // 2, jobs), replica_cap - i)
                futures = [pool.submit(_replica_metric, payload, i + k)
                           for k in range(batch)]
                # consume in index order so stopping is schedule-independent
                for fut in futures:
                    if done():
                        fut.cancel()
                        continue
                    stats.push(fut.result())
                i += batch

    return ReplicaEstimate(metric=f"fraction_{spec.states[metric]}",
                           n=stats.n, mean=stats.mean, variance=stats.variance,
                           ci_halfwidth=t_halfwidth(stats), capped=capped)

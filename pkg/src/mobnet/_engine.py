"""Jitted simulation cores.

The event loop interprets the postfix rate programs produced by
ratelaws.compile_program, so arbitrary models run at compiled speed
without per-model code generation. Kernels stay free of Python objects
so numba can cache the compiled code across processes.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# opcode values mirror ratelaws.compile_program
_NUM, _A, _B, _ADD, _SUB, _MUL, _DIV, _MIN, _MAX = range(9)

RECALC_EVERY = 65536  # full cache rebuild cadence, bounds float drift


@njit(cache=True)
def _rate_at(ops, args, consts, lo, hi, dens, bvals, stack):
    # ternary min/max mirror Python's min()/max() operand order exactly
    sp = 0
    for k in range(lo, hi):
        op = ops[k]
        if op == _NUM:
            stack[sp] = consts[args[k]]
            sp += 1
        elif op == _A:
            stack[sp] = dens[args[k]]
            sp += 1
        elif op == _B:
            stack[sp] = bvals[args[k]]
            sp += 1
        else:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == _ADD:
                stack[sp - 1] = a + b
            elif op == _SUB:
                stack[sp - 1] = a - b
            elif op == _MUL:
                stack[sp - 1] = a * b
            elif op == _DIV:
                stack[sp - 1] = a / b
            elif op == _MIN:
                stack[sp - 1] = b if b < a else a
            else:
                stack[sp - 1] = b if b > a else a
    return stack[0]


@njit(cache=True)
def _region_total(v, counts, bvals, ops, args, consts, offsets, consumed,
                  muK, N, prop, dens, stack):
    L = counts.shape[1]
    J = offsets.shape[0] - 1
    for l in range(L):
        dens[l] = counts[v, l] / N
    total = 0.0
    for j in range(J):
        r = N * _rate_at(ops, args, consts, offsets[j], offsets[j + 1],
                         dens, bvals[v], stack)
        if r < 0.0:
            r = 0.0
        for l in range(L):
            if counts[v, l] < consumed[j, l]:
                r = 0.0
        prop[v, j] = r
        total += r
    for l in range(L):
        total += 4.0 * muK[l] * counts[v, l]
    return total


@njit(cache=True)
def _recalc_all(counts, bvals, ops, args, consts, offsets, consumed, muK, N,
                prop, region, rows, n_side, dens, stack):
    lam = 0.0
    for i in range(n_side):
        acc = 0.0
        for c in range(n_side):
            v = i * n_side + c
            region[v] = _region_total(v, counts, bvals, ops, args, consts,
                                      offsets, consumed, muK, N, prop, dens, stack)
            acc += region[v]
        rows[i] = acc
        lam += acc
    return lam


@njit(cache=True)
def run_core(counts0, nbr, n_side, bvals, ops, args, consts, offsets,
             consumed, net, muK, N, sample_times, seed, stack_depth):
    """Exact event-by-event simulation of one replica.

    counts0: int64 (n_interior, L) initial counts, row-major over the
    interior grid. nbr: int32 (n_interior, 4) interior neighbour indices,
    -1 meaning the absorbing border. Reaction propensity in a region is
    N * f_j(counts/N, b(region)), clipped at zero; a reaction is disabled
    while any consumed count is short. Each node of state l walks at rate
    4*muK[l], direction uniform; walking onto the border removes it.

    Returns int64 (len(sample_times), n_interior, L): the state at each
    sample time. Region and channel selection scans rows, then columns,
    then channels, against cached partial sums that are rebuilt in full
    every RECALC_EVERY events.
    """
    np.random.seed(seed)
    n_int, L = counts0.shape
    J = offsets.shape[0] - 1
    S = sample_times.shape[0]
    counts = counts0.copy()
    out = np.zeros((S, n_int, L), dtype=np.int64)
    prop = np.zeros((n_int, J), dtype=np.float64)
    region = np.zeros(n_int, dtype=np.float64)
    rows = np.zeros(n_side, dtype=np.float64)
    dens = np.zeros(L, dtype=np.float64)
    stack = np.zeros(stack_depth, dtype=np.float64)

    lam = _recalc_all(counts, bvals, ops, args, consts, offsets, consumed,
                      muK, N, prop, region, rows, n_side, dens, stack)
    t = 0.0
    s = 0
    events = 0
    while True:
        if lam <= 0.0:
            for rest in range(s, S):
                out[rest, :, :] = counts
            return out
        tnew = t + np.random.exponential(1.0 / lam)
        while s < S and sample_times[s] < tnew:
            out[s, :, :] = counts
            s += 1
        if s == S:
            return out
        t = tnew

        u = np.random.random() * lam
        acc = 0.0
        ri = -1
        for i in range(n_side):
            if acc + rows[i] > u:
                ri = i
                break
            acc += rows[i]
        v = -1
        if ri >= 0:
            for c in range(n_side):
                w = ri * n_side + c
                if acc + region[w] > u:
                    v = w
                    break
                acc += region[w]
        if v < 0:
            # accumulated drift let the scan fall off the end; rebuild
            lam = _recalc_all(counts, bvals, ops, args, consts, offsets,
                              consumed, muK, N, prop, region, rows, n_side,
                              dens, stack)
            continue
        resid = u - acc

        moved_to = -1
        picked = -1
        for j in range(J):
            if resid < prop[v, j]:
                picked = j
                break
            resid -= prop[v, j]
        if picked >= 0:
            for l in range(L):
                counts[v, l] += net[picked, l]
        else:
            lsel = -1
            for l in range(L):
                wrate = 4.0 * muK[l] * counts[v, l]
                if resid < wrate:
                    lsel = l
                    break
                resid -= wrate
            if lsel < 0 or counts[v, lsel] <= 0:
                lam = _recalc_all(counts, bvals, ops, args, consts, offsets,
                                  consumed, muK, N, prop, region, rows,
                                  n_side, dens, stack)
                continue
            counts[v, lsel] -= 1
            d = np.random.randint(0, 4)
            dest = nbr[v, d]
            if dest >= 0:
                counts[dest, lsel] += 1
                moved_to = dest

        events += 1
        if events % RECALC_EVERY == 0:
            lam = _recalc_all(counts, bvals, ops, args, consts, offsets,
                              consumed, muK, N, prop, region, rows, n_side,
                              dens, stack)
        else:
            old = region[v]
            new = _region_total(v, counts, bvals, ops, args, consts, offsets,
                                consumed, muK, N, prop, dens, stack)
            region[v] = new
            rows[v // n_side] += new - old
            lam += new - old
            if moved_to >= 0:
                old = region[moved_to]
                new = _region_total(moved_to, counts, bvals, ops, args,
                                    consts, offsets, consumed, muK, N, prop,
                                    dens, stack)
                region[moved_to] = new
                rows[moved_to // n_side] += new - old
                lam += new - old


@njit(cache=True)
def free_walk_samples(k, rate, t, replicas, seed):
    """Squared displacement samples of a free lattice walk.

    Each replica takes Poisson(rate*t) unit steps on (1/k)Z^2, direction
    uniform over the 4 axes. Step counts split into axes and signs by
    binomials, which matches the step-by-step walk in distribution.
    Returns (replicas, 3): squared distance, x displacement, y displacement.
    """
    np.random.seed(seed)
    out = np.empty((replicas, 3), dtype=np.float64)
    for r in range(replicas):
        n = np.random.poisson(rate * t)
        nx = np.random.binomial(n, 0.5)
        i = 2 * np.random.binomial(nx, 0.5) - nx
        j = 2 * np.random.binomial(n - nx, 0.5) - (n - nx)
        out[r, 0] = (i * i + j * j) / (k * k)
        out[r, 1] = i / k
        out[r, 2] = j / k
    return out

"""Reaction-diffusion PDE solver: explicit Euler finite differences.

The PDE is discretized on the same lattice family as the stochastic
model, and one finite-difference update IS the spatial-ODE Euler step
(fluid.euler_step), so solving at grid spacing 1/K reproduces the ODE
sequence bit for bit. Stability requires r_l = mu_l*dt/ds^2 <= 1/4 for
every state; an optional Lipschitz clamp projects the rate arguments
onto a ball before evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import fluid
from .fluid import DensityField
from .model import LatticeGrid

__all__ = [
    "FDConfig",
    "PDESolution",
    "fd_step",
    "solve_pde",
    "lipschitz_clamp",
    "step_size_for",
    "field_fraction",
    "refine_and_compare",
]


@dataclass(frozen=True)
class FDConfig:
    """Finite-difference run parameters.

    delta_s must be 1/K for an integer K >= 2. clamp_radius None with
    clamp_enabled means the radius follows the running max of the field
    and parameter magnitudes, sqrt(L+P)*(c+1).
    """

    delta_s: float
    delta_t: float
    T: float
    clamp_radius: float = None
    clamp_enabled: bool = False

    def __post_init__(self):
        K = round(1.0 / self.delta_s)
        if K < 2 or not math.isclose(self.delta_s, 1.0 / K, rel_tol=1e-9):
            raise ValueError("delta_s must be 1/K for an integer K >= 2")
        if self.delta_t <= 0:
            raise ValueError("delta_t must be positive")
        if self.T <= 0:
            raise ValueError("T must be positive")
        M = round(self.T / self.delta_t)
        if M < 1 or not math.isclose(M * self.delta_t, self.T,
                                     rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("T must be an integer multiple of delta_t")
        if self.clamp_radius is not None and self.clamp_radius <= 0:
            raise ValueError("clamp_radius must be positive")

    @property
    def K(self):
        return round(1.0 / self.delta_s)

    @property
    def steps(self):
        return round(self.T / self.delta_t)


def _check_stability(spec, config):
    k2 = config.K * config.K
    for s, mu in zip(spec.states, spec.mu):
        r = mu * config.delta_t * k2
        if r > 0.25 + 1e-12:
            raise ValueError(
                f"unstable step: r = {r:.6g} > 1/4 for state {s}; "
                f"reduce delta_t below {0.25 / (mu * k2):.6g}")


def _auto_radius(spec, values, bgrids, running_c):
    c = max(running_c, float(np.abs(values).max()))
    if bgrids.size:
        c = max(c, float(np.abs(bgrids).max()))
    n = spec.n_states + spec.n_params
    return math.sqrt(n) * (c + 1.0), c


def fd_step(spec, grid, field, config):
    """One finite-difference update of the whole field."""
    if not math.isclose(grid.ds, config.delta_s, rel_tol=1e-9):
        raise ValueError("grid spacing does not match config.delta_s")
    _check_stability(spec, config)
    bgrids = spec.param_grids(grid)
    binner = bgrids[:, 1:-1, 1:-1]
    radius = None
    if config.clamp_enabled:
        radius = config.clamp_radius
        if radius is None:
            radius, _ = _auto_radius(spec, field.values, bgrids, 0.0)
    values = fluid.euler_step(spec, field.values, spec.scaled_migration(grid.K),
                              binner, config.delta_t, radius)
    if not np.isfinite(values).all():
        bad = np.argwhere(~np.isfinite(values))[0]
        raise FloatingPointError(
            f"non-finite density at region ({bad[0]}, {bad[1]}), state {bad[2] + 1}")
    return DensityField(values=values, time=field.time + config.delta_t)


@dataclass(frozen=True)
class PDESolution:
    times: np.ndarray
    fields: np.ndarray  # (len(times), K+1, K+1, L)
    config: FDConfig
    initial: np.ndarray
    metrics: dict

    def at(self, t):
        idx = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[idx], t, rel_tol=1e-9, abs_tol=1e-6):
            raise ValueError(f"time {t} was not sampled")
        return self.fields[idx]


def field_fraction(values_t, values_0, state):
    """Interior sum of one state's density over the total initial density."""
    num = values_t[1:-1, 1:-1, state].sum()
    den = values_0[1:-1, 1:-1, :].sum()
    if den == 0:
        raise ValueError("initial field has zero mass")
    return float(num / den)


def solve_pde(spec, K_pde, T, config=None, sample_times=None, check_every=50):
    """Full finite-difference evolution, sampled at the requested times.

    Requested times snap to the nearest step; the horizon itself is
    always exact because T is a multiple of delta_t. Metrics report each
    state's share of the initial mass at T.
    """
    if config is None:
        dt = step_size_for(max(spec.mu) if spec.mu else 0.0, 1.0 / K_pde, T)
        config = FDConfig(delta_s=1.0 / K_pde, delta_t=dt, T=T)
    if config.K != K_pde:
        raise ValueError("K_pde does not match config.delta_s")
    if not math.isclose(config.T, T, rel_tol=1e-12):
        config = replace(config, T=T)
    _check_stability(spec, config)
    grid = LatticeGrid(K_pde)
    times = np.asarray(sample_times if sample_times is not None else [T],
                       dtype=np.float64)
    if times.ndim != 1 or len(times) == 0 or (np.diff(times) <= 0).any():
        raise ValueError("sample times must be strictly increasing")
    if times[0] < 0 or times[-1] > T * (1 + 1e-12):
        raise ValueError("sample times must lie in [0, T]")
    M = config.steps
    dt = config.delta_t
    marks = np.minimum(np.round(times / dt).astype(np.int64), M)

    field = DensityField.initial(spec, grid)
    values = field.values
    bgrids = spec.param_grids(grid)
    binner = bgrids[:, 1:-1, 1:-1]
    muK2 = spec.scaled_migration(grid.K)
    initial = values.copy()

    running_c = 0.0
    radius = None
    out = np.empty((len(times),) + values.shape)
    s = 0
    while s < len(marks) and marks[s] == 0:
        out[s] = values
        s += 1
    for m in range(1, M + 1):
        if config.clamp_enabled:
            radius = config.clamp_radius
            if radius is None:
                radius, running_c = _auto_radius(spec, values, bgrids, running_c)
        values = fluid.euler_step(spec, values, muK2, binner, dt, radius)
        if m % check_every == 0 or m == M:
            fluid._check_finite(values, m)
        while s < len(marks) and marks[s] == m:
            out[s] = values
            s += 1
    metrics = {f"fraction_{name}": field_fraction(values, initial, l)
               for l, name in enumerate(spec.states)}
    return PDESolution(times=times, fields=out, config=config,
                       initial=initial, metrics=metrics)


def lipschitz_clamp(f, c_prime, point):
    """Evaluate f at point, radially projected onto the c_prime ball."""
    if c_prime <= 0:
        raise ValueError("c_prime must be positive")
    point = np.asarray(point, dtype=np.float64)
    norm = float(np.sqrt((point ** 2).sum()))
    if norm <= c_prime:
        return f(point)
    return f(point * (c_prime / norm))


def step_size_for(mu_max, delta_s, T, safety=0.9):
    """Largest dt = T/M with mu_max*dt/ds^2 <= safety/4.

    With no diffusion (mu_max = 0) the step defaults to at most
    fluid.REACTION_DT per step.
    """
    if mu_max < 0:
        raise ValueError("mu_max must be nonnegative")
    if not 0 < safety <= 1:
        raise ValueError("safety must be in (0, 1]")
    if mu_max == 0:
        bound = fluid.REACTION_DT
    else:
        bound = safety * delta_s * delta_s / (4.0 * mu_max)
    M = max(1, math.ceil(T / bound - 1e-12))
    return T / M


def _restrict(values, K_from, K_to):
    stride = K_from // K_to
    return values[::stride, ::stride, :]


def refine_and_compare(spec, T, ds_list, metric_state=0, safety=0.9):
    """Solve on successively finer grids and difference neighbouring pairs.

    Each consecutive pair is compared on their common lattice (spacing
    1/gcd of the two K values); grids sharing only the corners are
    rejected. Rows: (ds_coarse, ds_fine, sup_norm_diff, metric_rel_diff).
    """
    if len(ds_list) < 2:
        raise ValueError("need at least two grid spacings")
    Ks = []
    for ds in ds_list:
        K = round(1.0 / ds)
        if K < 2 or not math.isclose(ds, 1.0 / K, rel_tol=1e-9):
            raise ValueError("each ds must be 1/K for an integer K >= 2")
        Ks.append(K)
    solutions = {}
    mu_max = max(spec.mu) if spec.mu else 0.0
    for K in Ks:
        if K not in solutions:
            dt = step_size_for(mu_max, 1.0 / K, T, safety)
            solutions[K] = solve_pde(spec, K, T,
                                     FDConfig(delta_s=1.0 / K, delta_t=dt, T=T))
    rows = []
    for K_a, K_b in zip(Ks, Ks[1:]):
        g = math.gcd(K_a, K_b)
        if g < 2:
            raise ValueError(
                f"grids 1/{K_a} and 1/{K_b} share only the border corners")
        va = _restrict(solutions[K_a].fields[-1], K_a, g)
        vb = _restrict(solutions[K_b].fields[-1], K_b, g)
        sup = float(np.abs(va - vb).max())
        name = f"fraction_{spec.states[metric_state]}"
        ma = solutions[K_a].metrics[name]
        mb = solutions[K_b].metrics[name]
        rel = abs(ma - mb) / abs(ma) if ma != 0 else abs(mb)
        rows.append((1.0 / K_a, 1.0 / K_b, sup, rel))
    return rows

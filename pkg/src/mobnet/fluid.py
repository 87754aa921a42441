"""Deterministic fluid limits: stationary ODE and the spatial ODE system.

Densities live on the same lattice as the stochastic model, one value per
(region, state), zero on the absorbing border. The spatial right-hand
side combines a scaled 5-point neighbour difference with the reaction
drift; explicit fixed-step Euler on that system is the canonical
integrator, and the finite-difference solver reuses the identical step
function so the two produce bit-equal sequences on a shared grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ratelaws

__all__ = [
    "DensityField",
    "FluidTrajectory",
    "discrete_laplacian",
    "spatial_rhs",
    "stationary_rhs",
    "integrate_euler",
    "integrate_rk4",
    "default_dt",
]

REACTION_DT = 0.01  # fallback step bound where diffusion gives no constraint


@dataclass
class DensityField:
    """Real densities indexed (x region, y region, state)."""

    values: np.ndarray
    time: float = 0.0

    @classmethod
    def initial(cls, spec, grid):
        values = np.moveaxis(spec.initial_density(grid), 0, -1)
        values[grid.is_border(), :] = 0.0
        return cls(values=values, time=0.0)


@dataclass(frozen=True)
class FluidTrajectory:
    times: np.ndarray
    fields: np.ndarray  # (len(times), K+1, K+1, L)

    def at(self, t):
        idx = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[idx], t, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(f"time {t} was not sampled")
        return self.fields[idx]


def discrete_laplacian(field, grid, region, l):
    """5-point Laplacian at one interior region: neighbour sum over ds^2."""
    i, j = region
    if not (0 < i < grid.K and 0 < j < grid.K):
        raise ValueError("discrete Laplacian is defined on interior regions only")
    v = field.values
    diff = (v[i - 1, j, l] + v[i + 1, j, l] + v[i, j - 1, l] + v[i, j + 1, l]
            - 4.0 * v[i, j, l])
    return diff * grid.K * grid.K


def _reaction_drift(spec, inner, binner, scale=None):
    """Reaction part of the rhs on the interior block, shape (K-1, K-1, L)."""
    L = spec.n_states
    if scale is not None:
        dens = [inner[:, :, l] * scale for l in range(L)]
        params = [binner[p] * scale for p in range(spec.n_params)]
    else:
        dens = [inner[:, :, l] for l in range(L)]
        params = [binner[p] for p in range(spec.n_params)]
    drift = np.zeros_like(inner)
    for r in spec.reactions:
        f = ratelaws.eval_grid(r.rate, dens, params)
        for l, nu in enumerate(r.net):
            if nu:
                drift[:, :, l] += nu * f
    return drift


def _rhs(spec, values, muK2, binner, scale=None):
    """Full rhs on the whole grid; exactly zero on the border rows."""
    out = np.zeros_like(values)
    lap = (values[0:-2, 1:-1, :] + values[2:, 1:-1, :]
           + values[1:-1, 0:-2, :] + values[1:-1, 2:, :]
           - 4.0 * values[1:-1, 1:-1, :])
    out[1:-1, 1:-1, :] = muK2 * lap + _reaction_drift(
        spec, values[1:-1, 1:-1, :], binner, scale)
    return out


def _clamp_scale(values_inner, binner, radius):
    """min(1, c'/||z||) per region, z the stacked (densities, params) vector."""
    norm2 = (values_inner ** 2).sum(axis=-1)
    for p in range(binner.shape[0]):
        norm2 = norm2 + binner[p] ** 2
    norm = np.sqrt(norm2)
    with np.errstate(divide="ignore"):
        return np.minimum(1.0, radius / norm)


def euler_step(spec, values, muK2, binner, dt, clamp_radius=None):
    """One explicit Euler update; the finite-difference scheme shares it."""
    scale = None
    if clamp_radius is not None:
        scale = _clamp_scale(values[1:-1, 1:-1, :], binner, clamp_radius)
    return values + dt * _rhs(spec, values, muK2, binner, scale)


def spatial_rhs(spec, grid, field):
    """Time derivative field: diffusion plus reaction drift, zero on border."""
    if field.values.shape != grid.shape + (spec.n_states,):
        raise ValueError("field shape does not match grid and state count")
    binner = spec.param_grids(grid)[:, 1:-1, 1:-1]
    return DensityField(
        values=_rhs(spec, field.values, spec.scaled_migration(grid.K), binner),
        time=field.time)


def stationary_rhs(spec, densities, params=()):
    """Reaction-only drift at one point, as an L-vector."""
    densities = np.asarray(densities, dtype=np.float64)
    out = np.zeros(spec.n_states)
    for r in spec.reactions:
        f = ratelaws.eval_scalar(r.rate, densities, params)
        out += np.asarray(r.net, dtype=np.float64) * f
    return out


def default_dt(spec, grid, T, safety=0.9):
    """T/M with the largest M-integer step meeting the stability bound.

    Respects max_l mu_l*dt/ds^2 <= safety/4 and additionally caps dt at
    REACTION_DT so reaction-dominated models stay accurate when diffusion
    is weak.
    """
    bound = REACTION_DT
    mu_max = max(spec.mu) if spec.mu else 0.0
    if mu_max > 0:
        bound = min(bound, safety / (4.0 * mu_max * grid.K * grid.K))
    M = max(1, math.ceil(T / bound - 1e-12))
    return T / M


def _steps_for(T, dt):
    M = round(T / dt)
    if M < 1 or not math.isclose(M * dt, T, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("T must be an integer multiple of dt")
    return M


def _check_finite(values, m):
    if np.isfinite(values).all():
        return
    bad = np.argwhere(~np.isfinite(values))[0]
    raise FloatingPointError(
        f"non-finite density at step {m}, region ({bad[0]}, {bad[1]}), "
        f"state {bad[2] + 1}")


def integrate_euler(spec, grid, initial=None, T=None, dt=None, check_every=50):
    """Fixed-step Euler trajectory, every step recorded.

    initial defaults to the model's initial field; T to its horizon; dt
    to default_dt. Border values stay exactly zero because the update is
    zero there.
    """
    if T is None:
        T = spec.horizon
    if dt is None:
        dt = default_dt(spec, grid, T)
    M = _steps_for(T, dt)
    field = initial if initial is not None else DensityField.initial(spec, grid)
    values = field.values.astype(np.float64, copy=True)
    muK2 = spec.scaled_migration(grid.K)
    binner = spec.param_grids(grid)[:, 1:-1, 1:-1]
    out = np.empty((M + 1,) + values.shape)
    out[0] = values
    for m in range(1, M + 1):
        values = euler_step(spec, values, muK2, binner, dt)
        out[m] = values
        if m % check_every == 0 or m == M:
            _check_finite(values, m)
    return FluidTrajectory(times=np.arange(M + 1) * dt, fields=out)


def integrate_rk4(spec, grid, initial=None, T=None, dt=None):
    """Classical 4th-order one-step integrator, for reference solutions."""
    if T is None:
        T = spec.horizon
    if dt is None:
        dt = default_dt(spec, grid, T)
    M = _steps_for(T, dt)
    field = initial if initial is not None else DensityField.initial(spec, grid)
    values = field.values.astype(np.float64, copy=True)
    muK2 = spec.scaled_migration(grid.K)
    binner = spec.param_grids(grid)[:, 1:-1, 1:-1]
    out = np.empty((M + 1,) + values.shape)
    out[0] = values
    for m in range(1, M + 1):
        k1 = _rhs(spec, values, muK2, binner)
        k2 = _rhs(spec, values + 0.5 * dt * k1, muK2, binner)
        k3 = _rhs(spec, values + 0.5 * dt * k2, muK2, binner)
        k4 = _rhs(spec, values + dt * k3, muK2, binner)
        values = values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[m] = values
        if m % 50 == 0 or m == M:
            _check_finite(values, m)
    return FluidTrajectory(times=np.arange(M + 1) * dt, fields=out)

import math

import numpy as np
import pytest

from mobnet import pde, scenarios
from mobnet.fluid import REACTION_DT, DensityField, integrate_euler
from mobnet.model import LatticeGrid, parse_spec
from mobnet.pde import (FDConfig, fd_step, field_fraction, lipschitz_clamp,
                        refine_and_compare, solve_pde, step_size_for)


class TestFDConfig:
    def test_properties(self):
        cfg = FDConfig(delta_s=0.125, delta_t=0.01, T=1.0)
        assert cfg.K == 8
        assert cfg.steps == 100

    @pytest.mark.parametrize("kw", [
        dict(delta_s=0.3, delta_t=0.01, T=1.0),
        dict(delta_s=1.0, delta_t=0.01, T=1.0),
        dict(delta_s=0.125, delta_t=0.0, T=1.0),
        dict(delta_s=0.125, delta_t=0.01, T=0.0),
        dict(delta_s=0.125, delta_t=0.03, T=1.0),
        dict(delta_s=0.125, delta_t=0.01, T=1.0, clamp_radius=-1.0),
    ])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            FDConfig(**kw)


class TestStability:
    def test_unstable_step_rejected(self):
        spec = scenarios.build("heat", mu1=0.1)
        cfg = FDConfig(delta_s=0.125, delta_t=0.05, T=0.1)
        with pytest.raises(ValueError, match="reduce delta_t"):
            fd_step(spec, LatticeGrid(8), DensityField.initial(spec, LatticeGrid(8)), cfg)

    def test_marginal_step_accepted(self):
        # r = 0.125 * (1/32) * 64 = 1/4 exactly
        spec = scenarios.build("heat", mu1=0.125)
        cfg = FDConfig(delta_s=0.125, delta_t=1.0 / 32, T=1.0 / 32)
        g = LatticeGrid(8)
        fd_step(spec, g, DensityField.initial(spec, g), cfg)


class TestFdStep:
    def test_spike_stencil_exact(self):
        # dyadic rates make the convex stencil weights exact
        spec = scenarios.build("heat", mu1=0.125)
        g = LatticeGrid(8)
        cfg = FDConfig(delta_s=0.125, delta_t=1.0 / 32, T=1.0 / 32)
        values = np.zeros((9, 9, 1))
        values[4, 4, 0] = 1.0
        new = fd_step(spec, g, DensityField(values=values), cfg)
        assert new.time == cfg.delta_t
        assert new.values[4, 4, 0] == 0.0
        for i, j in ((3, 4), (5, 4), (4, 3), (4, 5)):
            assert new.values[i, j, 0] == 0.25
        assert new.values.sum() == 1.0

    def test_maximum_principle(self):
        spec = scenarios.build("heat", mu1=0.125)
        g = LatticeGrid(8)
        cfg = FDConfig(delta_s=0.125, delta_t=1.0 / 32, T=50.0 / 32)
        rng = np.random.default_rng(2)
        values = np.zeros((9, 9, 1))
        values[1:-1, 1:-1, 0] = rng.random((7, 7))
        field = DensityField(values=values)
        peak = values.max()
        for _ in range(50):
            field = fd_step(spec, g, field, cfg)
            new_peak = field.values.max()
            assert new_peak <= peak + 1e-15
            assert field.values.min() >= 0.0
            peak = new_peak

    def test_grid_mismatch(self):
        spec = scenarios.build("heat")
        cfg = FDConfig(delta_s=0.125, delta_t=1e-3, T=1e-3)
        with pytest.raises(ValueError, match="spacing"):
            fd_step(spec, LatticeGrid(4), DensityField.initial(spec, LatticeGrid(4)), cfg)

    def test_matches_ode_euler_sequence_bitwise(self):
        spec = scenarios.build("onoff")
        g = LatticeGrid(8)
        dt, M = 0.001, 50
        cfg = FDConfig(delta_s=0.125, delta_t=dt, T=M * dt)
        ode = integrate_euler(spec, g, T=M * dt, dt=dt)
        field = DensityField.initial(spec, g)
        for m in range(1, M + 1):
            field = fd_step(spec, g, field, cfg)
            assert np.array_equal(field.values, ode.fields[m])


class TestSolve:
    def test_heat_amplitude_oracle(self):
        # separable mode decays at rate 2 pi^2 mu
        spec = scenarios.build("heat", mu1=0.1)
        sol = solve_pde(spec, 32, 1.0)
        peak = sol.fields[-1][16, 16, 0]
        assert peak == pytest.approx(math.exp(-0.2 * math.pi ** 2), abs=1e-3)

    def test_metrics_and_sampling(self):
        spec = scenarios.build("onoff", V=10.0)
        cfg = FDConfig(delta_s=0.125, delta_t=0.01, T=1.0)
        sol = solve_pde(spec, 8, 1.0, config=cfg, sample_times=[0.0, 0.5, 1.0])
        assert np.array_equal(sol.fields[0], sol.initial)
        assert set(sol.metrics) == {"fraction_off", "fraction_on"}
        total = sol.metrics["fraction_off"] + sol.metrics["fraction_on"]
        assert 0.0 < total <= 1.0
        assert np.array_equal(sol.at(1.0), sol.fields[-1])
        got = field_fraction(sol.at(1.0), sol.initial, 1)
        assert got == pytest.approx(sol.metrics["fraction_on"], rel=1e-12)

    def test_border_zero_bitwise(self):
        spec = scenarios.build("onoff", V=25.0)
        sol = solve_pde(spec, 8, 0.5, sample_times=[0.25, 0.5])
        g = LatticeGrid(8)
        assert (sol.fields[:, g.is_border(), :] == 0.0).all()

    def test_clamp_auto_radius_neutral_here(self):
        spec = scenarios.build("onoff", V=10.0)
        plain = solve_pde(spec, 8, 0.2)
        cfg = FDConfig(delta_s=0.125, delta_t=plain.config.delta_t, T=0.2,
                       clamp_enabled=True)
        clamped = solve_pde(spec, 8, 0.2, config=cfg)
        assert np.array_equal(plain.fields, clamped.fields)

    def test_small_clamp_radius_changes_solution(self):
        spec = scenarios.build("onoff", V=10.0)
        plain = solve_pde(spec, 8, 0.2)
        cfg = FDConfig(delta_s=0.125, delta_t=plain.config.delta_t, T=0.2,
                       clamp_enabled=True, clamp_radius=0.5)
        clamped = solve_pde(spec, 8, 0.2, config=cfg)
        assert not np.array_equal(plain.fields, clamped.fields)
        assert np.isfinite(clamped.fields).all()

    def test_zero_mass_metric_rejected(self):
        spec = scenarios.build("onoff", V=10.0)
        sol = solve_pde(spec, 8, 0.1)
        with pytest.raises(ValueError):
            field_fraction(sol.fields[-1], np.zeros_like(sol.initial), 0)

    def test_blowup_detected(self):
        spec = parse_spec({
            "states": ["a"], "mu": {"a": 0.0},
            "reactions": [
                {"consumed": {"a": 1}, "produced": {"a": 2},
                 "rate": "100 * a1"},
            ],
            "initial": {"a": {"kind": "builtin", "name": "theta", "scale": 1}},
            "horizon": 20.0,
        })
        cfg = FDConfig(delta_s=0.25, delta_t=0.01, T=20.0)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(FloatingPointError):
                solve_pde(spec, 4, 20.0, config=cfg, check_every=10)

    def test_K_mismatch(self):
        spec = scenarios.build("onoff")
        cfg = FDConfig(delta_s=0.125, delta_t=0.001, T=0.1)
        with pytest.raises(ValueError):
            solve_pde(spec, 16, 0.1, config=cfg)


class TestStepSize:
    def test_reference_bound(self):
        dt = step_size_for(0.010, 1.0 / 256, 10.0, safety=1.0)
        bound = (1.0 / 256) ** 2 / (4.0 * 0.010)
        assert dt <= bound * (1 + 1e-12)
        M = round(10.0 / dt)
        assert M * dt == pytest.approx(10.0, rel=1e-12)
        assert dt > 0.99 * bound

    def test_coarser_grid_quadruples_step(self):
        fine = step_size_for(0.010, 1.0 / 256, 1000.0)
        coarse = step_size_for(0.010, 1.0 / 128, 1000.0)
        assert coarse / fine == pytest.approx(4.0, rel=1e-2)

    def test_no_diffusion_cap(self):
        assert step_size_for(0.0, 1.0 / 8, 10.0) == pytest.approx(REACTION_DT)

    def test_validation(self):
        with pytest.raises(ValueError):
            step_size_for(-1.0, 0.1, 1.0)
        with pytest.raises(ValueError):
            step_size_for(0.1, 0.1, 1.0, safety=0.0)
        with pytest.raises(ValueError):
            step_size_for(0.1, 0.1, 1.0, safety=1.5)


class TestRefine:
    def test_identical_grids_give_zero_diff(self):
        spec = scenarios.build("heat", mu1=0.1)
        rows = refine_and_compare(spec, 0.25, [1.0 / 8, 1.0 / 8])
        assert rows[0][2] == 0.0
        assert rows[0][3] == 0.0

    def test_refinement_shrinks_difference(self):
        spec = scenarios.build("heat", mu1=0.1)
        rows = refine_and_compare(spec, 0.5, [1.0 / 8, 1.0 / 16, 1.0 / 32])
        assert rows[0][0] == 1.0 / 8 and rows[0][1] == 1.0 / 16
        assert rows[1][3] < 0.5 * rows[0][3]
        assert all(r[2] >= 0 for r in rows)

    def test_non_nesting_grids_rejected(self):
        spec = scenarios.build("heat", mu1=0.1)
        with pytest.raises(ValueError, match="corners"):
            refine_and_compare(spec, 0.25, [1.0 / 3, 1.0 / 5])

    def test_needs_two_spacings(self):
        spec = scenarios.build("heat")
        with pytest.raises(ValueError):
            refine_and_compare(spec, 0.25, [1.0 / 8])


class TestLipschitzClamp:
    def test_inside_ball_identity(self):
        seen = []
        out = lipschitz_clamp(lambda p: seen.append(p.copy()) or p.sum(),
                              2.0, (0.3, 0.4))
        assert out == pytest.approx(0.7)
        assert np.allclose(seen[0], [0.3, 0.4])

    def test_projection(self):
        seen = []
        lipschitz_clamp(lambda p: seen.append(p.copy()), 2.0, (3.0, 4.0))
        assert np.allclose(seen[0], [1.2, 1.6])

    def test_idempotent(self):
        grab = lambda p: tuple(p)
        once = lipschitz_clamp(grab, 2.0, (3.0, 4.0))
        twice = lipschitz_clamp(grab, 2.0, once)
        assert np.allclose(once, twice)

    def test_invalid_radius(self):
        with pytest.raises(ValueError):
            lipschitz_clamp(lambda p: p, 0.0, (1.0,))

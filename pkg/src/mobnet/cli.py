"""Command-line interface: validate configs, run experiments, emit CSV.

Subcommands: validate, sim, ode, pde, compare, rwcheck. Data tables go
to --out (written atomically) or stdout; seeds, metrics, and warnings go
to stderr. Exit codes: 0 success, 1 validation problem, 2 numeric
failure, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import ctmc, fluid, freewalk, pde, scenarios
from .model import LatticeGrid, SpecError, parse_spec

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; the contract here is 1
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fraction(text):
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _dt_value(text):
    if text == "auto":
        return "auto"
    return float(text)


def _add_shared(p, config=True):
    if config:
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="model configuration JSON path")
        src.add_argument("--scenario", choices=sorted(scenarios.SCENARIOS),
                         help="built-in model")
    p.add_argument("--K", type=int, help="lattice refinement (spacing 1/K)")
    p.add_argument("--N", type=int, default=1, help="population density scale")
    p.add_argument("--T", type=float, help="horizon (defaults to the model's)")
    p.add_argument("--seed", type=int, help="RNG seed; omitted draws one and prints it")
    p.add_argument("--jobs", type=int, default=1, help="parallel replica workers")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--snapshot-times", type=_float_list,
                   help="comma-separated sample times")
    p.add_argument("--mu1", type=float, help="override first state's movement rate")
    p.add_argument("--V", type=float, help="amplitude of bump-scaled initial fields")


def make_parser():
    top = _Parser(prog="mobnet",
                  description="Mobile reaction networks: stochastic simulation "
                              "and fluid/PDE limits.")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model configuration",
                       parents=[], add_help=True)
    _add_shared(p)

    p = sub.add_parser("sim", help="stochastic simulation / replica estimate")
    _add_shared(p)
    p.add_argument("--replicas-min", type=int, default=10)
    p.add_argument("--ci-rel", type=float, default=0.05,
                   help="target CI halfwidth relative to |mean|")
    p.add_argument("--replica-cap", type=int, default=10000)

    p = sub.add_parser("ode", help="integrate the spatial ODE system")
    _add_shared(p)
    p.add_argument("--dt", type=_dt_value, default="auto",
                   help='step size or "auto"')

    p = sub.add_parser("pde", help="finite-difference PDE solve")
    _add_shared(p)
    p.add_argument("--ds", type=_fraction, default=1.0 / 256,
                   help='grid spacing, fraction form like "1/256"')
    p.add_argument("--dt", type=_dt_value, default="auto",
                   help='step size or "auto"')
    p.add_argument("--clamp", choices=["on", "off"], default="off")

    p = sub.add_parser("compare", help="CTMC replicas vs reference PDE sweep")
    _add_shared(p)
    p.add_argument("--N-list", type=_int_list, default=[1], dest="N_list")
    p.add_argument("--K-list", type=_int_list, default=[7, 15], dest="K_list",
                   help="default stops at 15; larger K runs for hours, pass "
                        "an explicit list to extend")
    p.add_argument("--mu", type=float,
                   help="first state's movement rate for the sweep "
                        "(default 0.010 for built-in scenarios)")
    p.add_argument("--ref-ds", type=_fraction, default=1.0 / 256,
                   help="reference PDE grid spacing")
    p.add_argument("--replicas-min", type=int, default=10)
    p.add_argument("--ci-rel", type=float, default=0.05)
    p.add_argument("--replica-cap", type=int, default=10000)

    p = sub.add_parser("rwcheck", help="free-walk mean squared displacement")
    p.add_argument("--k", type=int, default=1, help="lattice refinement")
    p.add_argument("--r", type=float, default=4.0, help="total jump rate")
    p.add_argument("--t", type=_float_list, default=[2.0],
                   help="comma-separated horizons, one CSV row each")
    p.add_argument("--replicas", type=int, default=10000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output CSV path (default: stdout)")
    return top


def _note(text):
    print(text, file=sys.stderr)


def _pick_seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    seed = int(np.random.SeedSequence().entropy) % (2 ** 63)
    _note(f"seed = {seed}")
    return seed


def _load_model(args):
    if args.config is not None:
        with open(args.config) as fh:
            doc = json.load(fh)
        spec = parse_spec(doc)
        if args.V is not None:
            initial = []
            for f, s in zip(spec.initial, spec.states):
                if f.kind == "builtin":
                    initial.append(dataclasses.replace(f, scale=args.V))
                else:
                    initial.append(f)
            spec = dataclasses.replace(spec, initial=tuple(initial))
    else:
        kwargs = {}
        if args.V is not None:
            kwargs["V"] = args.V
        if args.mu1 is not None:
            kwargs["mu1"] = args.mu1
        if args.T is not None:
            kwargs["horizon"] = args.T
        spec = scenarios.build(args.scenario, **kwargs)
    if args.config is not None and args.mu1 is not None:
        spec = dataclasses.replace(spec, mu=(args.mu1,) + spec.mu[1:])
    if args.config is not None and args.T is not None:
        spec = dataclasses.replace(spec, horizon=args.T)
    return spec


def _write_rows(out_path, header, rows):
    import csv

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    if out_path is None:
        emit(sys.stdout)
        return
    directory = os.path.dirname(os.path.abspath(out_path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            emit(fh)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    return repr(float(x))


def _field_rows(spec, grid, times, fields, column):
    rows = []
    axis = [i * grid.ds for i in range(grid.K + 1)]
    for t, field in zip(times, fields):
        for i in range(grid.K + 1):
            for j in range(grid.K + 1):
                for l, name in enumerate(spec.states):
                    rows.append((_fmt(t), _fmt(axis[i]), _fmt(axis[j]),
                                 name, column(field[i, j, l])))
    return rows


def cmd_validate(args):
    _load_model(args)
    print("valid")
    return 0


def cmd_sim(args):
    spec = _load_model(args)
    K = args.K if args.K is not None else 7
    grid = LatticeGrid(K)
    T = args.T if args.T is not None else spec.horizon
    seed = _pick_seed(args)
    if args.snapshot_times:
        traj = ctmc.simulate(spec, grid, args.N, T, seed,
                             sample_times=args.snapshot_times)
        rows = _field_rows(spec, grid, traj.times, traj.counts,
                           lambda v: str(int(v)))
        _write_rows(args.out, ["t", "region_x", "region_y", "state", "count"],
                    rows)
        return 0
    est = ctmc.run_replicas(spec, grid, args.N, T, metric=0, seed=seed,
                            min_replicas=args.replicas_min,
                            rel_ci_target=args.ci_rel,
                            replica_cap=args.replica_cap, jobs=args.jobs)
    if est.capped:
        _note(f"warning: replica cap {args.replica_cap} reached before the "
              f"CI target; estimate is flagged")
    _write_rows(args.out, ["metric", "mean", "ci_low", "ci_high", "replicas"],
                [(est.metric, _fmt(est.mean), _fmt(est.ci_low),
                  _fmt(est.ci_high), est.n)])
    return 0


def cmd_ode(args):
    spec = _load_model(args)
    K = args.K if args.K is not None else 16
    grid = LatticeGrid(K)
    T = args.T if args.T is not None else spec.horizon
    dt = fluid.default_dt(spec, grid, T) if args.dt == "auto" else args.dt
    traj = fluid.integrate_euler(spec, grid, T=T, dt=dt)
    times = args.snapshot_times if args.snapshot_times else [T]
    fields = [traj.fields[min(round(t / dt), len(traj.fields) - 1)]
              for t in times]
    rows = _field_rows(spec, grid, times, fields, _fmt)
    _write_rows(args.out, ["t", "region_x", "region_y", "state", "density"],
                rows)
    return 0


def cmd_pde(args):
    spec = _load_model(args)
    T = args.T if args.T is not None else spec.horizon
    K = round(1.0 / args.ds)
    if args.dt == "auto":
        dt = pde.step_size_for(max(spec.mu) if spec.mu else 0.0, args.ds, T)
    else:
        dt = args.dt
    config = pde.FDConfig(delta_s=args.ds, delta_t=dt, T=T,
                          clamp_enabled=(args.clamp == "on"))
    times = args.snapshot_times if args.snapshot_times else [T]
    solution = pde.solve_pde(spec, K, T, config, sample_times=times)
    grid = LatticeGrid(K)
    rows = _field_rows(spec, grid, solution.times, solution.fields, _fmt)
    for name, value in solution.metrics.items():
        _note(f"{name} = {value!r}")
    _write_rows(args.out, ["t", "region_x", "region_y", "state", "density"],
                rows)
    return 0


def cmd_compare(args):
    spec = _load_model(args)
    mu_val = args.mu
    if mu_val is None and args.config is None and args.mu1 is None:
        mu_val = 0.010
    if mu_val is not None:
        spec = dataclasses.replace(spec, mu=(mu_val,) + spec.mu[1:])
    T = args.T if args.T is not None else spec.horizon
    seed = _pick_seed(args)
    V = args.V if args.V is not None else _initial_amplitude(spec)
    ref_K = round(1.0 / args.ref_ds)
    ref = pde.solve_pde(spec, ref_K, T)
    metric_name = f"fraction_{spec.states[0]}"
    pde_metric = ref.metrics[metric_name]
    rows = []
    idx = 0
    for N in args.N_list:
        for K in args.K_list:
            cell_seed = int(np.random.SeedSequence(
                entropy=seed, spawn_key=(1000 + idx,)).generate_state(
                    1, dtype=np.uint64)[0])
            est = ctmc.run_replicas(spec, LatticeGrid(K), N, T, metric=0,
                                    seed=cell_seed,
                                    min_replicas=args.replicas_min,
                                    rel_ci_target=args.ci_rel,
                                    replica_cap=args.replica_cap,
                                    jobs=args.jobs)
            rows.append((N, K, _fmt(V), _fmt(spec.mu[0]), _fmt(est.mean),
                         _fmt(est.ci_halfwidth), _fmt(pde_metric),
                         _fmt(abs(est.mean - pde_metric))))
            idx += 1
    _write_rows(args.out,
                ["N", "K", "V", "mu", "ctmc_mean", "ctmc_ci", "pde_metric",
                 "abs_error"], rows)
    return 0


def _initial_amplitude(spec):
    for f in spec.initial:
        if f.kind == "builtin" and f.scale:
            return f.scale
    return 0.0


def cmd_rwcheck(args):
    seed = _pick_seed(args)
    rows = []
    for i, t in enumerate(args.t):
        config = freewalk.FreeWalkConfig(k=args.k, r=args.r, t=t,
                                         replicas=args.replicas)
        row_seed = int(np.random.SeedSequence(
            entropy=seed, spawn_key=(i,)).generate_state(
                1, dtype=np.uint64)[0])
        estimate, half = freewalk.msd(config, seed=row_seed)
        rows.append((args.k, _fmt(args.r), _fmt(t), _fmt(estimate),
                     _fmt(estimate - half), _fmt(estimate + half),
                     _fmt(freewalk.msd_theory(config))))
    _write_rows(args.out, ["k", "r", "t", "msd", "ci_low", "ci_high", "theory"],
                rows)
    return 0


_COMMANDS = {
    "validate": cmd_validate,
    "sim": cmd_sim,
    "ode": cmd_ode,
    "pde": cmd_pde,
    "compare": cmd_compare,
    "rwcheck": cmd_rwcheck,
}


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SpecError, ValueError, KeyError, json.JSONDecodeError) as e:
        _note(f"error: {e}")
        return 1
    except (FloatingPointError, OverflowError, ArithmeticError) as e:
        _note(f"numeric failure: {e}")
        return 2
    except OSError as e:
        _note(f"i/o failure: {e}")
        return 3


if __name__ == "__main__":
    sys.exit(main())

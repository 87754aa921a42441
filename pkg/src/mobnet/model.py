"""Network model: lattice geometry, parameter fields, reactions, validation.

A model places L local states on the square lattice {(i/K, j/K)} over the
unit square. Border regions absorb: a node that walks onto them leaves the
system. Reactions fire region-locally with density-dependent rates, and
each state l additionally performs a nearest-neighbour random walk whose
per-neighbour rate scales as mu_l * K^2 so that spatial spread is K-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ratelaws
from .ratelaws import ExprError

__all__ = [
    "SpecError",
    "LatticeGrid",
    "Reaction",
    "ParameterField",
    "InitialField",
    "NetworkSpec",
    "theta",
    "parse_spec",
    "serialize_spec",
]

DIVISION_EPS_HINT = "max(1e-9, ...)"


class SpecError(ValueError):
    """Model validation failure. Carries every diagnostic found, not just the first."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class LatticeGrid:
    """Square lattice with spacing 1/K and an absorbing border ring."""

    K: int

    def __post_init__(self):
        if self.K < 2:
            raise SpecError(["K must be at least 2 so interior regions exist"])

    @property
    def ds(self):
        return 1.0 / self.K

    @property
    def shape(self):
        return (self.K + 1, self.K + 1)

    @property
    def n_regions(self):
        return (self.K + 1) ** 2

    @property
    def n_interior(self):
        return (self.K - 1) ** 2

    def coords(self):
        """Meshgrid of region coordinates, each of shape (K+1, K+1)."""
        axis = np.arange(self.K + 1) * self.ds
        return np.meshgrid(axis, axis, indexing="ij")

    def is_border(self):
        """Boolean mask of absorbing regions."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask

    def interior_index(self):
        """Row-major index over interior regions; -1 on the border."""
        idx = np.full(self.shape, -1, dtype=np.int32)
        idx[1:-1, 1:-1] = np.arange(self.n_interior, dtype=np.int32).reshape(
            self.K - 1, self.K - 1)
        return idx

    def neighbor_table(self):
        """For each interior region, interior indices of its 4 neighbours.

        Shape (n_interior, 4), order (-x, +x, -y, +y); -1 marks a border
        neighbour, i.e. an exit from the system.
        """
        idx = self.interior_index()
        table = np.empty((self.n_interior, 4), dtype=np.int32)
        table[:, 0] = idx[0:-2, 1:-1].ravel()
        table[:, 1] = idx[2:, 1:-1].ravel()
        table[:, 2] = idx[1:-1, 0:-2].ravel()
        table[:, 3] = idx[1:-1, 2:].ravel()
        return table


@dataclass(frozen=True)
class Reaction:
    """One reaction channel: consumed/produced counts per state plus a rate AST."""

    consumed: tuple
    produced: tuple
    rate: tuple
    label: str = ""

    @property
    def net(self):
        return tuple(p - c for c, p in zip(self.consumed, self.produced))


def theta(x, y):
    """Smooth bump supported on the disc of radius 1/2 about the centre.

    Value exp(4 - 1/(1/4 - r^2)) for r^2 < 1/4 and 0 outside, where r is
    the distance to (1/2, 1/2). Infinitely differentiable, peak value 1.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r2 = (x - 0.5) ** 2 + (y - 0.5) ** 2
    out = np.zeros(np.broadcast(x, y).shape)
    inside = r2 < 0.25
    with np.errstate(divide="ignore"):
        out[inside] = np.exp(4.0 - 1.0 / (0.25 - r2[inside]))
    if out.ndim == 0:
        return float(out)
    return out


def _sinprod(x, y):
    # fold about 1/2 so the ends are exact zeros, not sin(pi) = 1.2e-16
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sx = np.sin(np.pi * np.minimum(x, 1.0 - x))
    sy = np.sin(np.pi * np.minimum(y, 1.0 - y))
    return sx * sy


_BUILTIN_FIELDS = {"theta": theta, "sinprod": _sinprod}


@dataclass(frozen=True)
class ParameterField:
    """Region-dependent parameter: constant, named builtin, or tabulated.

    kind is "constant" (value), "builtin" (name + scale), or "table"
    (values on an (m+1) x (m+1) grid over the unit square, interpolated
    bilinearly onto the model grid).
    """

    name: str
    kind: str
    value: float = 0.0
    builtin: str = ""
    scale: float = 1.0
    table: tuple = ()

    def evaluate(self, grid):
        """Field values on every region of ``grid``, shape (K+1, K+1)."""
        if self.kind == "constant":
            return np.full(grid.shape, float(self.value))
        if self.kind == "builtin":
            x, y = grid.coords()
            return self.scale * _BUILTIN_FIELDS[self.builtin](x, y)
        return self._interpolate(grid)

    def _interpolate(self, grid):
        values = np.asarray(self.table, dtype=np.float64)
        m = values.shape[0] - 1
        x, y = grid.coords()
        fx = np.clip(x * m, 0, m)
        fy = np.clip(y * m, 0, m)
        i0 = np.minimum(fx.astype(np.int64), m - 1)
        j0 = np.minimum(fy.astype(np.int64), m - 1)
        tx = fx - i0
        ty = fy - j0
        return ((1 - tx) * (1 - ty) * values[i0, j0]
                + tx * (1 - ty) * values[i0 + 1, j0]
                + (1 - tx) * ty * values[i0, j0 + 1]
                + tx * ty * values[i0 + 1, j0 + 1])

    def probe_value(self):
        """A representative magnitude, used for rate validation probes."""
        if self.kind == "constant":
            return float(self.value)
        if self.kind == "builtin":
            return float(self.scale)
        return float(np.max(np.abs(self.table))) if len(self.table) else 0.0


@dataclass(frozen=True)
class InitialField:
    """Initial density profile for one state; must vanish on the border."""

    kind: str
    value: float = 0.0
    builtin: str = ""
    scale: float = 1.0
    table: tuple = ()

    def evaluate(self, grid):
        pf = ParameterField("", self.kind, self.value, self.builtin,
                            self.scale, self.table)
        return pf.evaluate(grid)

    def border_errors(self, state_label):
        """Diagnostics if the profile can be nonzero on the border."""
        probe = LatticeGrid(8)
        values = self.evaluate(probe)
        if np.any(values[probe.is_border()] != 0.0):
            return [f"initial profile for {state_label} is nonzero on the border"]
        if np.any(values < 0.0):
            return [f"initial profile for {state_label} is negative somewhere"]
        return []


@dataclass(frozen=True)
class NetworkSpec:
    """A complete model: states, movement rates, reactions, fields, horizon."""

    states: tuple
    mu: tuple
    reactions: tuple
    params: tuple = ()
    initial: tuple = ()
    horizon: float = 10.0
    constants: dict = field(default_factory=dict)

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_params(self):
        return len(self.params)

    def scaled_migration(self, K):
        """Per-neighbour walk rates mu_l * K^2, one entry per state."""
        return np.asarray(self.mu, dtype=np.float64) * K * K

    def param_grids(self, grid):
        """Stack of parameter fields over the grid, shape (P, K+1, K+1)."""
        if not self.params:
            return np.zeros((0,) + grid.shape)
        return np.stack([p.evaluate(grid) for p in self.params])

    def initial_density(self, grid):
        """Initial densities, shape (L, K+1, K+1)."""
        return np.stack([f.evaluate(grid) for f in self.initial])

    def rate_programs(self):
        """Postfix programs for all reactions, concatenated for the engine.

        Returns (ops, args, consts, offsets, stack_depth) where reaction j
        occupies ops[offsets[j]:offsets[j+1]].
        """
        ops, args, consts, offsets = [], [], [], [0]
        depth = 1
        for r in self.reactions:
            o, a, c, d = ratelaws.compile_program(r.rate)
            a = a.copy()
            a[o == ratelaws.OP_NUM] += len(consts)
            ops.append(o)
            args.append(a)
            consts.extend(c.tolist())
            offsets.append(offsets[-1] + len(o))
            depth = max(depth, d)
        return (np.concatenate(ops) if ops else np.zeros(0, np.int8),
                np.concatenate(args) if args else np.zeros(0, np.int32),
                np.asarray(consts, dtype=np.float64),
                np.asarray(offsets, dtype=np.int64),
                depth)


def _validate(states, mu, reactions, params, initial, horizon):
    errors = []
    L = len(states)
    if L == 0:
        errors.append("at least one state is required")
    if len(set(states)) != L:
        errors.append("state names must be unique")
    if len(mu) != L:
        errors.append(f"mu must list one rate per state ({len(mu)} given, {L} states)")
    if any(m < 0 for m in mu):
        errors.append("movement rates must be nonnegative")
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        errors.append("parameter names must be unique")
    if len(initial) != L:
        errors.append(f"initial must list one profile per state ({len(initial)} given)")
    if horizon <= 0:
        errors.append("horizon must be positive")
    probe_params = [p.probe_value() for p in params]
    for j, r in enumerate(reactions):
        where = r.label or f"reaction {j + 1}"
        if len(r.consumed) != L or len(r.produced) != L:
            errors.append(f"{where}: stoichiometry must list all {L} states")
            continue
        if any(c < 0 for c in r.consumed) or any(p < 0 for p in r.produced):
            errors.append(f"{where}: stoichiometric counts must be nonnegative")
        local = ratelaws.check_bounds(r.rate, L, len(params))
        local += ratelaws.check_division_guard(r.rate)
        if not local:
            for l, c in enumerate(r.consumed):
                if c > 0 and not ratelaws.vanishes_when_zero(r.rate, l, L, probe_params):
                    local.append(
                        f"rate must vanish when consumed state "
                        f"{states[l]} has density 0")
        errors.extend(f"{where}: {e}" for e in local)
    for f, s in zip(initial, states):
        errors.extend(f.border_errors(s))
    return errors


def _parse_field(obj, cls, where, errors, **extra):
    if isinstance(obj, (int, float)):
        return cls(kind="constant", value=float(obj), **extra)
    if not isinstance(obj, dict):
        errors.append(f"{where}: expected a number or an object")
        return cls(kind="constant", value=0.0, **extra)
    kind = obj.get("kind", "constant")
    if kind == "constant":
        return cls(kind="constant", value=float(obj.get("value", 0.0)), **extra)
    if kind == "builtin":
        name = obj.get("name", "")
        if name not in _BUILTIN_FIELDS:
            errors.append(f"{where}: unknown builtin field {name!r}")
            name = "theta"
        return cls(kind="builtin", builtin=name,
                   scale=float(obj.get("scale", 1.0)), **extra)
    if kind == "table":
        values = obj.get("values", [])
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 2:
            errors.append(f"{where}: table must be a square grid with at least 2 rows")
            arr = np.zeros((2, 2))
        return cls(kind="table", table=tuple(map(tuple, arr.tolist())), **extra)
    errors.append(f"{where}: unknown field kind {kind!r}")
    return cls(kind="constant", value=0.0, **extra)


def parse_spec(doc):
    """Build a validated NetworkSpec from a configuration mapping.

    Collects every problem it can find and raises SpecError with the full
    list, so a bad file reports all its mistakes at once.
    """
    errors = []
    if not isinstance(doc, dict):
        raise SpecError(["configuration must be a JSON object"])
    states = tuple(doc.get("states", ()))
    if not states or not all(isinstance(s, str) for s in states):
        errors.append("states must be a non-empty list of names")
        states = tuple(s if isinstance(s, str) else f"s{i}" for i, s in enumerate(states))
    constants = dict(doc.get("constants", {}))
    for name, value in constants.items():
        if not isinstance(value, (int, float)):
            errors.append(f"constant {name} must be numeric")
    mu_doc = doc.get("mu", {})
    if isinstance(mu_doc, dict):
        mu = tuple(float(mu_doc.get(s, 0.0)) for s in states)
        for name in mu_doc:
            if name not in states:
                errors.append(f"mu names unknown state {name!r}")
    elif isinstance(mu_doc, (list, tuple)) and len(mu_doc) == len(states):
        mu = tuple(float(v) for v in mu_doc)
    else:
        errors.append("mu must map state names to movement rates")
        mu = (0.0,) * len(states)

    params = []
    for name, obj in dict(doc.get("params", {})).items():
        params.append(_parse_field(obj, ParameterField, f"param {name}", errors, name=name))
    param_names = [p.name for p in params]

    reactions = []
    for j, robj in enumerate(doc.get("reactions", ())):
        where = f"reaction {j + 1}"
        if not isinstance(robj, dict):
            errors.append(f"{where}: expected an object")
            continue
        label = str(robj.get("label", ""))
        consumed = robj.get("consumed", {})
        produced = robj.get("produced", {})
        for side, which in ((consumed, "consumed"), (produced, "produced")):
            for name in side:
                if name not in states:
                    errors.append(f"{where}: {which} names unknown state {name!r}")
        cvec = tuple(int(consumed.get(s, 0)) for s in states)
        pvec = tuple(int(produced.get(s, 0)) for s in states)
        text = robj.get("rate", "")
        try:
            rate = ratelaws.parse_expr(text, constants, param_names)
        except ExprError as e:
            errors.append(f"{where}: {e}")
            continue
        reactions.append(Reaction(cvec, pvec, rate, label))

    initial = []
    init_doc = doc.get("initial", {})
    if isinstance(init_doc, dict):
        for name in init_doc:
            if name not in states:
                errors.append(f"initial names unknown state {name!r}")
        for s in states:
            initial.append(_parse_field(init_doc.get(s, 0.0), InitialField,
                                        f"initial {s}", errors))
    else:
        errors.append("initial must map state names to profiles")
        initial = [InitialField(kind="constant", value=0.0) for _ in states]

    horizon = doc.get("horizon", 10.0)
    if not isinstance(horizon, (int, float)):
        errors.append("horizon must be numeric")
        horizon = 10.0

    errors.extend(_validate(states, mu, tuple(reactions), tuple(params),
                            tuple(initial), horizon))
    if errors:
        raise SpecError(errors)
    return NetworkSpec(states=states, mu=mu, reactions=tuple(reactions),
                       params=tuple(params), initial=tuple(initial),
                       horizon=float(horizon), constants=constants)


def _field_doc(f):
    if f.kind == "constant":
        return {"kind": "constant", "value": f.value}
    if f.kind == "builtin":
        return {"kind": "builtin", "name": f.builtin, "scale": f.scale}
    return {"kind": "table", "values": [list(row) for row in f.table]}


def serialize_spec(spec):
    """Inverse of parse_spec: a plain mapping that parses back equal."""
    return {
        "states": list(spec.states),
        "mu": {s: m for s, m in zip(spec.states, spec.mu)},
        "params": {p.name: _field_doc(p) for p in spec.params},
        "reactions": [
            {
                "label": r.label,
                "consumed": {s: c for s, c in zip(spec.states, r.consumed) if c},
                "produced": {s: p for s, p in zip(spec.states, r.produced) if p},
                "rate": ratelaws.format_expr(r.rate),
            }
            for r in spec.reactions
        ],
        "initial": {s: _field_doc(f) for s, f in zip(spec.states, spec.initial)},
        "horizon": spec.horizon,
        "constants": dict(spec.constants),
    }

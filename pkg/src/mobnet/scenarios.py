"""Built-in model configurations.

Each builder returns a plain configuration mapping, the same shape a JSON
config file holds, so built-ins pass through parse_spec and its validation
exactly like user-supplied files.
"""

from __future__ import annotations

from .model import parse_spec

__all__ = ["onoff", "epidemic", "p2p", "heat", "SCENARIOS", "build"]


def onoff(V=10.0, mu1=0.001, lam=0.250, c=2.857, horizon=10.0):
    """Two-state on/off connectivity model.

    Nodes in the mobile "off" state connect at rate lam each; connected
    "on" nodes are pinned in place and disconnect at rate density
    c*min(a_on, 1). Everyone starts connected inside a central bump of
    amplitude V.
    """
    return {
        "states": ["off", "on"],
        "mu": {"off": mu1, "on": 0.0},
        "constants": {"lam": lam, "c": c},
        "reactions": [
            {"label": "connect", "consumed": {"off": 1}, "produced": {"on": 1},
             "rate": "lam * a1"},
            {"label": "disconnect", "consumed": {"on": 1}, "produced": {"off": 1},
             "rate": "c * min(a2, 1)"},
        ],
        "initial": {
            "off": 0.0,
            "on": {"kind": "builtin", "name": "theta", "scale": V},
        },
        "horizon": horizon,
    }


def epidemic(V=1.0, mu1=0.001, beta=1.0, horizon=10.0):
    """Single-state infection spread: susceptible density a1 decays at
    rate beta*a1*(1-a1), fastest when half the local population is infected."""
    return {
        "states": ["susceptible"],
        "mu": {"susceptible": mu1},
        "constants": {"beta": beta},
        "reactions": [
            {"label": "infect", "consumed": {"susceptible": 1}, "produced": {},
             "rate": "beta * a1 * (1 - a1)"},
        ],
        "initial": {
            "susceptible": {"kind": "builtin", "name": "theta", "scale": V},
        },
        "horizon": horizon,
    }


def p2p(V=1.0, mu1=0.001, mu2=0.001, lam=0.4, sigma=0.1, gamma=0.1,
        c=1.0, m=2.0, horizon=10.0):
    """File sharing with downloaders (leech) and uploaders (seed).

    Downloaders arrive over a centre-weighted field, either side may quit,
    and transfers complete at min(c*a1, m*a2): demand-limited or
    capacity-limited, whichever binds.
    """
    return {
        "states": ["leech", "seed"],
        "mu": {"leech": mu1, "seed": mu2},
        "constants": {"lam": lam, "sigma": sigma, "gamma": gamma,
                      "c": c, "m": m},
        "params": {
            "arrival": {"kind": "builtin", "name": "theta", "scale": 1.0},
        },
        "reactions": [
            {"label": "arrive", "consumed": {}, "produced": {"leech": 1},
             "rate": "lam * arrival"},
            {"label": "quit", "consumed": {"leech": 1}, "produced": {},
             "rate": "sigma * a1"},
            {"label": "retire", "consumed": {"seed": 1}, "produced": {},
             "rate": "gamma * a2"},
            {"label": "complete", "consumed": {"leech": 1, "seed": 1},
             "produced": {"seed": 2}, "rate": "min(c * a1, m * a2)"},
        ],
        "initial": {
            "leech": {"kind": "builtin", "name": "theta", "scale": V},
            "seed": {"kind": "builtin", "name": "theta", "scale": 0.1 * V},
        },
        "horizon": horizon,
    }


def heat(V=1.0, mu1=0.1, horizon=1.0):
    """Pure movement, no reactions: counts drift and drain out the border.

    The product-of-sines initial profile is an eigenfunction of the
    limiting diffusion, so the density decays as exp(-2 pi^2 mu1 t) times
    the profile."""
    return {
        "states": ["walker"],
        "mu": {"walker": mu1},
        "reactions": [],
        "initial": {
            "walker": {"kind": "builtin", "name": "sinprod", "scale": V},
        },
        "horizon": horizon,
    }


SCENARIOS = {"onoff": onoff, "epidemic": epidemic, "p2p": p2p, "heat": heat}


def build(name, **overrides):
    """Instantiate a built-in scenario as a validated NetworkSpec.

    Overrides not meaningful for the scenario (e.g. lam for heat) are
    rejected, matching the builder signatures. None values are dropped so
    callers can pass through optional CLI flags unconditionally.
    """
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    kwargs = {k: v for k, v in overrides.items() if v is not None}
    return parse_spec(SCENARIOS[name](**kwargs))

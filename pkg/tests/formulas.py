"""Random formulas and small systems shared by several test modules."""

from __future__ import annotations

import numpy as np

from stltube import stl
from stltube.network import Network, Subsystem
from stltube.sets import HPolytope, Zonotope

VARS2 = [stl.VarRef("x", 0, 0), stl.VarRef("x", 0, 1)]


def random_predicate(rng, variables=VARS2, scale=1.0):
    k = int(rng.integers(1, len(variables) + 1))
    chosen = rng.choice(len(variables), size=k, replace=False)
    terms = tuple((variables[j], float(np.round(rng.uniform(-1, 1), 2) or 0.5)) for j in chosen)
    sense = ">=" if rng.random() < 0.5 else "<="
    return stl.Predicate(terms, float(np.round(rng.uniform(-scale, scale), 2)), sense)


def random_formula(rng, depth=3, max_horizon=10, variables=VARS2, negations=False):
    """Random formula with nesting depth ``<= depth`` and ``horizon <= max_horizon``."""

    def build(d, budget):
        if d == 0 or budget == 0 and rng.random() < 0.5:
            p = random_predicate(rng, variables)
            return stl.Not(p) if negations and rng.random() < 0.2 else p
        kind = rng.choice(["and", "or", "G", "F", "U", "not"] if negations else
                          ["and", "or", "G", "F", "U"])
        if kind in ("and", "or"):
            kids = tuple(build(d - 1, budget) for _ in range(int(rng.integers(2, 4))))
            return stl.And(kids) if kind == "and" else stl.Or(kids)
        if kind == "not":
            return stl.Not(build(d - 1, budget))
        if budget == 0:
            return random_predicate(rng, variables)
        b = int(rng.integers(0, budget + 1))
        a = int(rng.integers(0, b + 1))
        if kind == "U":
            return stl.Until(a, b, build(d - 1, budget - b), build(d - 1, budget - b))
        cls = stl.Always if kind == "G" else stl.Eventually
        return cls(a, b, build(d - 1, budget - b))

    return build(depth, max_horizon)


def random_trajectory(rng, horizon, n=2, m=1, eta=1):
    states = [rng.normal(size=(horizon + 1, n)) for _ in range(eta)]
    inputs = [rng.normal(size=(horizon, m)) for _ in range(eta)]
    return stl.Trajectory(states, inputs)


def double_integrator(horizon=10, dt=0.5, x_init=(0.0, 0.0), u_bound=1.0, x_bound=3.0):
    """Single 2-state subsystem with bounded state and input."""
    A = np.array([[1.0, dt], [0.0, 1.0]])
    B = np.array([[0.5 * dt * dt], [dt]])
    sub = Subsystem(A=A, B=B, X=HPolytope.box([-x_bound] * 2, [x_bound] * 2),
                    U=HPolytope.box([-u_bound], [u_bound]), W=Zonotope(np.zeros(2)),
                    x_init=np.asarray(x_init, float))
    return Network([sub], horizon)


def random_zonotope(rng, n=2, q=None, spread=1.0):
    q = int(rng.integers(0, 5)) if q is None else q
    return Zonotope(rng.normal(scale=spread, size=n), rng.normal(size=(n, q)))


def certify_containment(inner, outer):
    """Run the generator-based containment LP; certificate or ``None``."""
    from stltube.opt import OptModel, solve_lp
    from stltube.sets import encode_zono_in_zono

    m = OptModel()
    h = encode_zono_in_zono(inner, outer, m)
    m.set_objective(0.0 * m.add_vars(1, lb=0.0, ub=0.0).sum())
    sol = solve_lp(m, {"backend": "highs"})
    return h.certificate(sol) if sol.ok else None

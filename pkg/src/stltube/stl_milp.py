"""Mixed-integer encoding of STL and nominal maximally-robust planning.

Each predicate instance ``(pi, t)`` gets a binary ``z`` linked to the shared
robustness variable ``rho`` by the big-M pair::

    rho - y_t <= M (1 - z)          z = 1  =>  y_t >= rho
    y_t - M z <= rho - eps          z = 0  =>  y_t <  rho

Boolean and temporal operators become min/max constraints on continuous
``z`` variables in ``[0, 1]``. With the root forced to one, maximizing ``rho``
recovers the robustness of the planned trajectory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog

from . import stl
from .network import Network, aggregate
from .opt import AffExpr, OptModel, SolverOptions, Status, concatenate, solve_milp
from .sets import HPolytope

log = logging.getLogger(__name__)

DEFAULT_EPS_STRICT = 1e-6
BIGM_MARGIN = 1.1


class EncodingError(RuntimeError):
    pass


class NominalInfeasible(RuntimeError):
    pass


@dataclass
class EncodingContext:
    """State shared while encoding one formula into one model.

    ``signal(v, t)`` returns the model expression for variable ``v`` at time
    ``t``; ``bounds(v, t)`` returns its ``(lo, hi)`` range (used to validate M).
    """

    signal: Callable
    rho: AffExpr
    bigM: float
    eps_strict: float = DEFAULT_EPS_STRICT
    bounds: Optional[Callable] = None
    z: dict = field(default_factory=dict)
    pred_z: dict = field(default_factory=dict)


def _pred_expr(p: stl.Predicate, ctx: EncodingContext, t: int):
    terms, c = p.normalized()
    y = -c
    for v, coef in terms:
        y = ctx.signal(v, t) * coef + y
    return y


def _pred_range(p: stl.Predicate, ctx: EncodingContext, t: int):
    terms, c = p.normalized()
    lo = hi = -c
    for v, coef in terms:
        a, b = ctx.bounds(v, t)
        lo += min(coef * a, coef * b)
        hi += max(coef * a, coef * b)
    return lo, hi


def _and(m: OptModel, zs: list, name: str):
    if len(zs) == 1:
        return zs[0]
    z = m.add_vars((), lb=0.0, ub=1.0, name=name)
    for zk in zs:
        m.add_constraints(z - zk, "<=", 0.0, name=name + "_le")
    total = zs[0]
    for zk in zs[1:]:
        total = total + zk
    m.add_constraints(z - total, ">=", -(len(zs) - 1), name=name + "_ge")
    return z


def _or(m: OptModel, zs: list, name: str):
    if len(zs) == 1:
        return zs[0]
    z = m.add_vars((), lb=0.0, ub=1.0, name=name)
    for zk in zs:
        m.add_constraints(z - zk, ">=", 0.0, name=name + "_ge")
    total = zs[0]
    for zk in zs[1:]:
        total = total + zk
    m.add_constraints(z - total, "<=", 0.0, name=name + "_le")
    return z


def encode_formula(f: stl.Formula, ctx: EncodingContext, m: OptModel, t: int = 0,
                   path: tuple = ()) -> AffExpr:
    """Return the indicator ``z`` of ``(s, t) |= f`` with margin ``rho``."""
    key = (path, t)
    if key in ctx.z:
        return ctx.z[key]
    tag = f"z{stl.path_str(path) or 'r'}_t{t}".replace(".", "_")
    if isinstance(f, stl.Predicate):
        if ctx.bounds is not None:
            lo, hi = _pred_range(f, ctx, t)
            need = max(abs(lo), abs(hi))
            if not np.isfinite(need):
                raise EncodingError(f"unbounded signal in predicate {stl.format_formula(f)}")
            if ctx.bigM < 2 * need:
                raise EncodingError(f"bigM={ctx.bigM:g} below the bound 2*{need:g} needed for "
                                    f"{stl.format_formula(f)} at t={t}")
        y = _pred_expr(f, ctx, t)
        z = m.add_vars((), binary=True, name=tag)
        # rho - y <= M (1 - z)
        m.add_constraints(ctx.rho - y + z * ctx.bigM, "<=", ctx.bigM, name=tag + "_a")
        # y - M z <= rho - eps
        m.add_constraints(y - z * ctx.bigM - ctx.rho, "<=", -ctx.eps_strict, name=tag + "_b")
        ctx.pred_z[key] = z
    elif isinstance(f, stl.And):
        z = _and(m, [encode_formula(c, ctx, m, t, path + (k,)) for k, c in enumerate(f.children)],
                 tag)
    elif isinstance(f, stl.Or):
        z = _or(m, [encode_formula(c, ctx, m, t, path + (k,)) for k, c in enumerate(f.children)],
                tag)
    elif isinstance(f, stl.Always):
        z = _and(m, [encode_formula(f.child, ctx, m, t + k, path + (0,))
                     for k in range(f.a, f.b + 1)], tag)
    elif isinstance(f, stl.Eventually):
        z = _or(m, [encode_formula(f.child, ctx, m, t + k, path + (0,))
                    for k in range(f.a, f.b + 1)], tag)
    elif isinstance(f, stl.Until):
        branches = []
        for k in range(f.a, f.b + 1):
            parts = [encode_formula(f.right, ctx, m, t + k, path + (1,))]
            parts += [encode_formula(f.left, ctx, m, t + j, path + (0,)) for j in range(k + 1)]
            branches.append(_and(m, parts, f"{tag}_u{k}"))
        z = _or(m, branches, tag)
    elif isinstance(f, stl.Not):
        raise EncodingError("encode_formula expects a negation-free formula")
    else:
        raise TypeError(f"not a formula: {f!r}")
    ctx.z[key] = z
    return z


# ---------------------------------------------------------------------------
# nominal planning


@dataclass
class NominalWeights:
    """Objective weights: ``max rho_w rho - J_L1 - 2 violation max(0, -rho)``."""

    input: float = 0.01
    state: float = 0.0
    rho: float = 1.0
    violation: float = 1e3

    @classmethod
    def from_dict(cls, d) -> "NominalWeights":
        if d is None:
            return cls()
        if isinstance(d, cls):
            return d
        return cls(**d)


@dataclass
class ActiveSet:
    """Predicate instances set to one in the optimal assignment."""

    entries: set
    rho_star: float
    snapshot: dict

    def to_json(self) -> dict:
        return {"rho_star": self.rho_star,
                "active": sorted([[stl.path_str(p), int(t)] for p, t in self.entries]),
                "inactive": sorted([[stl.path_str(p), int(t)] for (p, t), v in self.snapshot.items()
                                    if v == 0])}

    @classmethod
    def from_json(cls, d: dict) -> "ActiveSet":
        act = {(stl.path_from_str(p), int(t)) for p, t in d["active"]}
        snap = {k: 1 for k in act}
        snap.update({(stl.path_from_str(p), int(t)): 0 for p, t in d.get("inactive", [])})
        return cls(act, float(d["rho_star"]), snap)


@dataclass
class NominalPlan:
    states: list  # per subsystem, (h + 1, n_i)
    inputs: list  # per subsystem, (h, m_i)
    rho_star: float
    active: ActiveSet
    formula: stl.Formula
    objective: float = float("nan")
    nodes: int = 0
    status: str = "optimal"
    bigM: float = float("nan")
    start: int = 0

    def trajectory(self) -> stl.Trajectory:
        return stl.Trajectory(self.states, self.inputs)

    @property
    def satisfied(self) -> bool:
        return self.rho_star >= 0


def _poly_bounds(P: HPolytope, cache: dict) -> tuple[np.ndarray, np.ndarray]:
    key = id(P)
    if key not in cache:
        n = P.dim
        lo, hi = np.full(n, -np.inf), np.full(n, np.inf)
        for k in range(n):
            c = np.zeros(n)
            c[k] = 1.0
            for sgn in (1.0, -1.0):
                r = linprog(sgn * c, A_ub=P.H, b_ub=P.h, bounds=[(None, None)] * n,
                            method="highs")
                if r.status == 0:
                    if sgn > 0:
                        lo[k] = r.fun
                    else:
                        hi[k] = -r.fun
        cache[key] = (lo, hi, P)  # keep P alive so id() stays unique
    lo, hi, _ = cache[key]
    return lo, hi


def check_horizon(f: stl.Formula, horizon: int, start: int = 0) -> None:
    """The formula evaluated at ``start`` must fit in ``0..horizon``."""
    h = start + stl.horizon(f)
    if horizon < h:
        raise EncodingError(f"horizon {horizon} shorter than start + formula horizon = {h}")
    uh = stl.input_horizon(f)
    if uh >= 0 and start + uh >= horizon:
        raise EncodingError(f"formula reads an input at t={start + uh}, but inputs exist only for "
                            f"t < {horizon}")


def build_nominal_model(net: Network, f: stl.Formula, weights=None, bigM: Optional[float] = None,
                        eps_strict: float = DEFAULT_EPS_STRICT, quadratic: bool = False,
                        start: int = 0):
    """Assemble the nominal planning MILP; returns ``(model, handles)``.

    The formula is imposed at time ``start`` (``0`` means ``s |= f``).
    """
    weights = NominalWeights.from_dict(weights)
    f = stl.normalize_negation_free(f)
    h = net.horizon
    check_horizon(f, h, start)
    sig = net.signature
    for _, p in stl.predicates(f):
        for v, _ in p.terms:
            sig.check(v)
    agg = aggregate(net)
    N = sum(sig.state_dims)
    Mu = sum(sig.input_dims)
    m = OptModel("nominal")
    x = m.add_vars((h + 1, N), name="x")
    u = m.add_vars((max(h, 0), Mu), name="u")
    x0 = np.concatenate([s.x_init for s in net.subsystems])
    m.add_constraints(x[0], "==", x0, name="init")
    for t in range(h):
        w0 = agg.W[t].center
        m.add_constraints(x[t + 1] - agg.A[t] @ x[t] - agg.B[t] @ u[t], "==", w0, name=f"dyn{t}")
        m.add_constraints(agg.U[t].H @ u[t], "<=", agg.U[t].h, name=f"U{t}")
    for t in range(h + 1):
        m.add_constraints(agg.X[t].H @ x[t], "<=", agg.X[t].h, name=f"X{t}")

    cache: dict = {}

    def signal(v: stl.VarRef, t: int):
        if v.kind == "x":
            return x[t, agg.state_slices[v.subsystem].start + v.component]
        return u[t, agg.input_slices[v.subsystem].start + v.component]

    def bounds(v: stl.VarRef, t: int):
        P = agg.X[t] if v.kind == "x" else agg.U[t]
        sl = agg.state_slices if v.kind == "x" else agg.input_slices
        lo, hi = _poly_bounds(P, cache)
        k = sl[v.subsystem].start + v.component
        return lo[k], hi[k]

    # range of every predicate instance, for rho bounds and M
    R = 0.0
    tmp = EncodingContext(signal, None, np.inf, bounds=bounds)
    for path, p in stl.predicates(f):
        for t in range(h + 1):
            lo, hi = _pred_range(p, tmp, t)
            R = max(R, abs(lo), abs(hi))
    if not np.isfinite(R):
        raise EncodingError("signal domain is unbounded; bound X and U to use the big-M encoding")
    R = max(R, 1e-3)
    if bigM is None:
        bigM = 2 * R * BIGM_MARGIN
    elif bigM < 2 * R:
        raise EncodingError(f"bigM={bigM:g} is below the required 2*R = {2 * R:g}")
    rho = m.add_vars((), lb=-R, ub=R, name="rho")
    ctx = EncodingContext(signal, rho, float(bigM), eps_strict, bounds=bounds)
    root = encode_formula(f, ctx, m, t=start)
    m.add_constraints(root, "==", 1.0, name="root")
    viol = m.add_vars((), lb=0.0, name="viol")
    m.add_constraints(viol + rho, ">=", 0.0, name="viol_def")
    obj = rho * weights.rho - viol * (2 * weights.violation)
    if quadratic:
        quad = {}
        u_idx = u.coef.tocoo().col
        x_idx = x.coef.tocoo().col
        for j in u_idx:
            quad[(int(j), int(j))] = -weights.input
        if weights.state:
            for j in x_idx[N:]:
                quad[(int(j), int(j))] = -weights.state
        m.add_quadratic_objective(quad)
    else:
        if weights.input and u.size:
            au = m.add_vars(u.shape, lb=0.0, name="absu")
            m.add_constraints(au - u, ">=", 0.0, name="absu_p")
            m.add_constraints(au + u, ">=", 0.0, name="absu_n")
            obj = obj - au.sum() * weights.input
        if weights.state:
            ax = m.add_vars((h, N), lb=0.0, name="absx")
            m.add_constraints(ax - x[1:], ">=", 0.0, name="absx_p")
            m.add_constraints(ax + x[1:], ">=", 0.0, name="absx_n")
            obj = obj - ax.sum() * weights.state
    m.set_objective(obj, "max")
    handles = {"x": x, "u": u, "rho": rho, "ctx": ctx, "formula": f, "agg": agg, "R": R}
    return m, handles


def synth_nominal(net: Network, f: stl.Formula, weights=None, options=None,
                  bigM: Optional[float] = None, eps_strict: float = DEFAULT_EPS_STRICT,
                  start: int = 0, fixed: Optional[tuple] = None) -> NominalPlan:
    """Solve the nominal planning MILP and extract the active predicate set.

    ``fixed = (states, inputs)`` pins the signal to a given per-subsystem plan,
    leaving only the predicate assignment and robustness to optimize.
    """
    opts = SolverOptions.from_dict(options)
    m, hd = build_nominal_model(net, f, weights, bigM, eps_strict, start=start)
    if fixed is not None:
        m.fix(hd["x"], np.hstack([np.asarray(s, float) for s in fixed[0]]))
        if hd["u"].size:
            m.fix(hd["u"], np.hstack([np.asarray(u, float) for u in fixed[1]]))
    sol = solve_milp(m, opts)
    if sol.status == Status.INFEASIBLE:
        raise NominalInfeasible("nominal dynamics, bounds and initial state are inconsistent")
    if sol.x is None:
        raise RuntimeError(f"nominal MILP failed: {sol.status.value} {sol.message}")
    agg = hd["agg"]
    X = hd["x"].value(sol.x)
    U = hd["u"].value(sol.x)
    states = [X[:, sl] for sl in agg.state_slices]
    inputs = [U[:, sl] for sl in agg.input_slices]
    ctx = hd["ctx"]
    snapshot = {k: int(round(float(z.value(sol.x)))) for k, z in ctx.pred_z.items()}
    rho_star = float(hd["rho"].value(sol.x))
    active = ActiveSet({k for k, v in snapshot.items() if v == 1}, rho_star, snapshot)
    plan = NominalPlan(states, inputs, rho_star, active, hd["formula"], float(sol.objective),
                       sol.nodes, sol.status.value, ctx.bigM, start)
    extract_active(plan)
    log.info("nominal plan: rho*=%.6g, %d active predicate instances, %d nodes",
             rho_star, len(active.entries), sol.nodes)
    return plan


def skeleton_value(f: stl.Formula, assignment: dict, t: int = 0, path: tuple = ()) -> int:
    """Evaluate the Boolean skeleton with predicate values taken from ``assignment``."""
    if isinstance(f, stl.Predicate):
        return int(assignment.get((path, t), 0))
    if isinstance(f, stl.And):
        return min(skeleton_value(c, assignment, t, path + (k,)) for k, c in enumerate(f.children))
    if isinstance(f, stl.Or):
        return max(skeleton_value(c, assignment, t, path + (k,)) for k, c in enumerate(f.children))
    if isinstance(f, stl.Always):
        return min(skeleton_value(f.child, assignment, t + k, path + (0,))
                   for k in range(f.a, f.b + 1))
    if isinstance(f, stl.Eventually):
        return max(skeleton_value(f.child, assignment, t + k, path + (0,))
                   for k in range(f.a, f.b + 1))
    if isinstance(f, stl.Until):
        return max(min([skeleton_value(f.right, assignment, t + k, path + (1,))] +
                       [skeleton_value(f.left, assignment, t + j, path + (0,))
                        for j in range(k + 1)])
                   for k in range(f.a, f.b + 1))
    raise EncodingError("skeleton evaluation expects a negation-free formula")


def extract_active(plan: NominalPlan) -> ActiveSet:
    """Active entries of ``plan``; re-checks that they alone satisfy the formula."""
    act = plan.active
    assignment = {k: 1 for k in act.entries}
    if skeleton_value(plan.formula, assignment, plan.start) != 1:
        raise EncodingError("active predicates do not satisfy the formula skeleton "
                            "(encoding inconsistency)")
    return act


# ---------------------------------------------------------------------------
# robust satisfaction constraints


@dataclass
class TubeView:
    """Expressions of one subsystem's tube at one time.

    ``x = xbar + T zeta`` and ``u = ubar + M zeta`` share the same ``zeta``.
    """

    xbar: object
    T: object
    ubar: object = None
    M: object = None


def _combined(p: stl.Predicate, tube: Callable, t: int):
    """Center and generator row of ``p(s) - c`` over the tube at ``t``."""
    terms, c = p.normalized()
    center = -c
    per_sub: dict = {}
    for v, coef in terms:
        view = tube(v.subsystem, t)
        if view is None:
            raise EncodingError(f"no tube for subsystem {v.subsystem} at t={t}")
        if v.kind == "x":
            cen, gen = view.xbar, view.T
        else:
            if view.ubar is None:
                raise EncodingError(f"predicate reads {v} at t={t} where no input set exists")
            cen, gen = view.ubar, view.M
        center = cen[v.component] * coef + center
        if gen.shape[1]:
            row = gen[v.component] * coef
            prev = per_sub.get(v.subsystem)
            per_sub[v.subsystem] = row if prev is None else prev + row
    rows = [per_sub[i] for i in sorted(per_sub)]
    if not rows:
        return center, np.zeros(0)
    return center, concatenate(rows)


@dataclass
class ContainmentFamily:
    entries: list  # (path, t, constraint handle or None)
    rho_hat: float


def build_containment_constraints(active: ActiveSet, f: stl.Formula, tube: Callable,
                                  rho_hat: float, m: OptModel, name: str = "G") -> ContainmentFamily:
    """Force every tube point to satisfy each active predicate with margin ``rho_hat``.

    For an active ``(pi, t)`` with ``p(s) - c`` having center ``y`` and
    generator row ``g`` over the tube, adds ``y - sum(p') >= rho_hat`` and
    ``p' >= +-g``.
    """
    f = stl.normalize_negation_free(f)
    entries = []
    for path, t in sorted(active.entries):
        p = stl.subformula(f, path)
        if not isinstance(p, stl.Predicate):
            raise EncodingError(f"active entry {stl.path_str(path)} is not a predicate")
        center, g = _combined(p, tube, t)
        tag = f"{name}_{stl.path_str(path) or 'r'}_t{t}".replace(".", "_")
        lhs = center
        if isinstance(g, AffExpr):
            aux = m.add_vars(g.shape, lb=0.0, name=tag + "_p")
            m.add_constraints(aux - g, ">=", 0.0, name=tag + "_pp")
            m.add_constraints(aux + g, ">=", 0.0, name=tag + "_pn")
            lhs = lhs - aux.sum()
        elif np.size(g):
            lhs = lhs - float(np.abs(g).sum())
        if isinstance(lhs, AffExpr):
            h = m.add_constraints(lhs, ">=", rho_hat, name=tag)
        else:
            h = m.add_constraints(AffExpr.constant(lhs, m.num_vars), ">=", rho_hat, name=tag)
        entries.append((path, t, h))
    return ContainmentFamily(entries, float(rho_hat))


def margin_over_tube(p: stl.Predicate, center: float, g: np.ndarray) -> float:
    """Worst value of ``p(s) - c`` over a numeric tube slice."""
    return float(center - np.abs(np.asarray(g)).sum())

"""Solver entry points dispatching to the native or HiGHS backend."""

from __future__ import annotations

import logging
import time

import numpy as np

from . import highs
from .bnb import branch_and_bound
from .model import Compiled, OptModel, Solution, SolverError, SolverOptions, Status
from .simplex import solve_dense

log = logging.getLogger(__name__)


def _freeze(m) -> Compiled:
    if isinstance(m, Compiled):
        return m
    if m.quad_objective:
        raise SolverError("quadratic objectives are export-only; use export_lp_file")
    return m.freeze()


def _lp(P: Compiled, opts: SolverOptions) -> Solution:
    if opts.backend == "native":
        return solve_dense(P, max_iters=opts.max_iters, feas_tol=opts.feas_tol)
    if opts.backend == "highs":
        return highs.solve_lp(P, max_iters=opts.max_iters, time_limit=opts.time_limit)
    raise SolverError("unknown backend %r" % opts.backend)


def solve_lp(m, options=None) -> Solution:
    """Solve a linear program; binary flags must be absent."""
    opts = SolverOptions.from_dict(options)
    P = _freeze(m)
    if P.binary.any():
        raise SolverError("solve_lp called on a model with binaries")
    t0 = time.perf_counter()
    sol = _lp(P, opts)
    log.debug("LP %dx%d [%s] %s in %.3fs", *P.shape, opts.backend, sol.status.value,
              time.perf_counter() - t0)
    return sol


def solve_milp(m, options=None) -> Solution:
    """Solve a mixed-binary program to proven optimality (within ``int_tol``).

    The returned continuous values come from a final LP with the binaries
    fixed at their rounded incumbent values, so they are free of big-M leakage
    from near-integral relaxation values.
    """
    opts = SolverOptions.from_dict(options)
    P = _freeze(m)
    t0 = time.perf_counter()
    if opts.backend == "native":
        sol = branch_and_bound(P, lambda Q: solve_dense(Q, opts.max_iters, opts.feas_tol,
                                                          need_duals=False),
                               node_limit=opts.node_limit, int_tol=opts.int_tol)
    elif opts.backend == "highs":
        sol = highs.solve_milp(P, node_limit=opts.node_limit, time_limit=opts.time_limit)
    else:
        raise SolverError("unknown backend %r" % opts.backend)
    log.debug("MILP %dx%d [%s] %s nodes=%d in %.3fs", *P.shape, opts.backend,
              sol.status.value, sol.nodes, time.perf_counter() - t0)
    if sol.x is None or sol.status not in (Status.OPTIMAL, Status.ITERATION_LIMIT):
        return sol
    fixed = np.round(sol.x[P.binary])
    lb, ub = P.lb.copy(), P.ub.copy()
    lb[P.binary] = fixed
    ub[P.binary] = fixed
    Q = P.with_bounds(lb, ub)
    Q = Compiled(Q.A, Q.sense, Q.b, Q.c, Q.c0, lb, ub, np.zeros_like(P.binary), P.maximize)
    polished = _lp(Q, opts)
    if polished.status == Status.OPTIMAL:
        better = polished.objective >= sol.objective - 1e-7 if P.maximize else \
            polished.objective <= sol.objective + 1e-7
        if better or sol.status == Status.OPTIMAL:
            polished.status = sol.status
            polished.nodes = sol.nodes
            polished.duals = None
            return polished
    return sol


def solve(m, options=None) -> Solution:
    P = _freeze(m)
    if P.binary.any():
        return solve_milp(P, options)
    return solve_lp(P, options)


def kkt_report(m, sol: Solution) -> dict:
    """Dual objective, duality gap and KKT residuals of an optimal LP solution.

    Works from the user-level model so it checks either backend the same way.
    Duals are sensitivities ``d objective / d rhs``.
    """
    P = _freeze(m)
    if sol.duals is None or sol.x is None:
        raise SolverError("need primal and dual values")
    sgn = -1.0 if P.maximize else 1.0  # convert to minimization
    c = sgn * P.c
    y = sgn * sol.duals
    x = sol.x
    from .model import EQ, GE, LE
    # sign feasibility of duals for min: >= rows y >= 0, <= rows y <= 0
    sign_viol = np.concatenate([np.maximum(-y[P.sense == GE], 0),
                                np.maximum(y[P.sense == LE], 0), [0.0]]).max()
    r = c - P.A.T @ y
    dual_obj = float(P.b @ y)
    bound_viol = 0.0
    cs_bound = 0.0
    for j in range(c.size):
        rj = r[j]
        if rj > 0:
            if np.isfinite(P.lb[j]):
                dual_obj += rj * P.lb[j]
                cs_bound = max(cs_bound, abs(rj * (x[j] - P.lb[j])))
            else:
                bound_viol = max(bound_viol, rj)
        elif rj < 0:
            if np.isfinite(P.ub[j]):
                dual_obj += rj * P.ub[j]
                cs_bound = max(cs_bound, abs(rj * (P.ub[j] - x[j])))
            else:
                bound_viol = max(bound_viol, -rj)
    slack = P.A @ x - P.b
    cs_rows = float(np.abs(y * slack).max(initial=0.0))
    primal = float(c @ x)
    return {
        "primal_objective": sgn * (primal + sgn * P.c0),
        "dual_objective": sgn * (dual_obj + sgn * P.c0),
        "gap": abs(primal - dual_obj),
        "primal_residual": P.residual(x),
        "dual_residual": float(max(sign_viol, bound_viol)),
        "complementarity": float(max(cs_rows, cs_bound)),
    }

"""HiGHS backend through :mod:`scipy.optimize`, same contract as the native solver."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .model import EQ, GE, LE, Compiled, Solution, Status

_TIGHT = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def solve_lp(P: Compiled, max_iters=None, time_limit=None) -> Solution:
    c = -P.c if P.maximize else P.c
    le, eq, ge = P.sense == LE, P.sense == EQ, P.sense == GE
    A = sp.csr_matrix(P.A)
    A_ub = sp.vstack([A[le], -A[ge]], format="csr")
    b_ub = np.concatenate([P.b[le], -P.b[ge]])
    A_eq, b_eq = A[eq], P.b[eq]
    bounds = np.column_stack([np.where(np.isfinite(P.lb), P.lb, -np.inf),
                              np.where(np.isfinite(P.ub), P.ub, np.inf)])
    opts = dict(_TIGHT, presolve=True)
    if max_iters is not None:
        opts["maxiter"] = int(max_iters)
    if time_limit is not None:
        opts["time_limit"] = float(time_limit)
    res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if A_eq.shape[0] else None,
                  bounds=bounds, method="highs", options=opts)
    status = {0: Status.OPTIMAL, 1: Status.ITERATION_LIMIT, 2: Status.INFEASIBLE,
              3: Status.UNBOUNDED}.get(res.status)
    if status is None:
        return Solution(Status.ITERATION_LIMIT, message=res.message)
    if status != Status.OPTIMAL:
        return Solution(status, message=res.message, iterations=int(getattr(res, "nit", 0) or 0))
    x = np.asarray(res.x, float)
    duals = np.zeros(P.A.shape[0])
    n_le = int(le.sum())
    mu = np.asarray(res.ineqlin.marginals) if A_ub.shape[0] else np.zeros(0)
    duals[le] = mu[:n_le]
    duals[ge] = -mu[n_le:]
    if A_eq.shape[0]:
        duals[eq] = np.asarray(res.eqlin.marginals)
    if P.maximize:
        duals = -duals
    obj = float(P.c @ x + P.c0)
    return Solution(Status.OPTIMAL, obj, x, duals, iterations=int(res.nit))


def solve_milp(P: Compiled, node_limit=None, time_limit=None, mip_rel_gap=1e-9) -> Solution:
    c = -P.c if P.maximize else P.c
    lo = np.where(P.sense == GE, P.b, np.where(P.sense == EQ, P.b, -np.inf))
    hi = np.where(P.sense == LE, P.b, np.where(P.sense == EQ, P.b, np.inf))
    cons = [LinearConstraint(sp.csr_matrix(P.A), lo, hi)] if P.A.shape[0] else []
    opts = {"disp": False, "mip_rel_gap": mip_rel_gap}
    if node_limit is not None:
        opts["node_limit"] = int(node_limit)
    if time_limit is not None:
        opts["time_limit"] = float(time_limit)
    res = milp(c, integrality=P.binary.astype(int), bounds=Bounds(P.lb, P.ub),
               constraints=cons, options=opts)
    if res.status == 0:
        x = np.asarray(res.x, float)
        return Solution(Status.OPTIMAL, float(P.c @ x + P.c0), x, message=res.message)
    if res.status == 2:
        return Solution(Status.INFEASIBLE, message=res.message)
    if res.status == 3:
        return Solution(Status.UNBOUNDED, message=res.message)
    x = None if res.x is None else np.asarray(res.x, float)
    obj = float("nan") if x is None else float(P.c @ x + P.c0)
    return Solution(Status.ITERATION_LIMIT, obj, x, message=res.message)

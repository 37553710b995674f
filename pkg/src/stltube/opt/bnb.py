"""Depth-first branch-and-bound over binary variables."""

from __future__ import annotations

import numpy as np

from .model import Compiled, Solution, Status


def branch_and_bound(P: Compiled, solve_relaxation, node_limit: int = 1_000_000,
                     int_tol: float = 1e-6) -> Solution:
    """Maximize/minimize ``P`` with its binary variables forced integral.

    ``solve_relaxation(Compiled) -> Solution`` solves the LP relaxation at a
    node. Branching picks the most fractional binary; nodes whose relaxation
    bound cannot beat the incumbent are pruned.
    """
    sign = -1.0 if P.maximize else 1.0  # compare in minimization terms
    bin_idx = np.flatnonzero(P.binary)
    best_x, best_val = None, np.inf
    stack = [(P.lb.copy(), P.ub.copy())]
    nodes = 0
    unbounded = False
    while stack:
        if nodes >= node_limit:
            obj = float("nan") if best_x is None else sign * best_val
            return Solution(Status.ITERATION_LIMIT, obj, best_x, nodes=nodes,
                            message="node limit reached")
        lb, ub = stack.pop()
        nodes += 1
        sol = solve_relaxation(P.with_bounds(lb, ub))
        if sol.status == Status.INFEASIBLE:
            continue
        if sol.status == Status.UNBOUNDED:
            unbounded = True
            continue
        if sol.status != Status.OPTIMAL:
            return Solution(sol.status, nodes=nodes, message="relaxation failed")
        val = sign * sol.objective
        if val >= best_val - 1e-9 * (1.0 + abs(best_val)):
            continue
        xb = sol.x[bin_idx]
        frac = np.abs(xb - np.round(xb))
        if frac.size == 0 or frac.max() <= int_tol:
            best_x, best_val = sol.x.copy(), val
            best_x[bin_idx] = np.round(xb)
            continue
        k = int(np.argmax(frac))
        j = int(bin_idx[k])
        down = (lb.copy(), ub.copy())
        down[1][j] = 0.0
        up = (lb.copy(), ub.copy())
        up[0][j] = 1.0
        # explore the branch nearer the relaxation value first
        if xb[k] >= 0.5:
            stack.extend([down, up])
        else:
            stack.extend([up, down])
    if best_x is None:
        status = Status.UNBOUNDED if unbounded else Status.INFEASIBLE
        return Solution(status, nodes=nodes)
    return Solution(Status.OPTIMAL, sign * best_val, best_x, nodes=nodes)

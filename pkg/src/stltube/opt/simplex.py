"""Dense two-phase primal simplex with Bland's anti-cycling rule.

The solver works on a full tableau. Problems are first rewritten in the
standard form ``min c'y  s.t.  A'y = b' >= 0, y >= 0``: finite lower bounds
are shifted out, variables bounded only above are reflected, free variables
are split into positive parts, finite upper bounds become extra rows and
inequalities receive slack columns. Every row starts with an identity column
(slack where possible, artificial otherwise) so ``B^-1`` can be read off the
final tableau and the duals follow as ``c_B B^-1``.
"""

from __future__ import annotations

import numpy as np

from .model import EQ, GE, LE, Compiled, NumericalFailure, Solution, Status

RC_TOL = 1e-9
PIVOT_TOL = 1e-9
MIN_PIVOT = 1e-10


def _standard_form(P: Compiled):
    n = P.c.shape[0]
    A = P.A.toarray() if hasattr(P.A, "toarray") else np.asarray(P.A, float)
    m = A.shape[0]
    lb, ub = P.lb, P.ub
    # x = shift + D y
    cols, signs, shift = [], [], np.zeros(n)
    extra_rows = []  # (y column, bound)
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append(j)
            signs.append(1.0)
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append(j)
            signs.append(-1.0)
        else:
            cols.append(j)
            signs.append(1.0)
            cols.append(j)
            signs.append(-1.0)
    cols = np.asarray(cols, dtype=int)
    signs = np.asarray(signs)
    N = cols.size
    Ay = A[:, cols] * signs
    b = P.b - A @ shift
    cy = P.c[cols] * signs
    c0 = float(P.c @ shift)
    sense = P.sense.copy()
    if extra_rows:
        E = np.zeros((len(extra_rows), N))
        eb = np.zeros(len(extra_rows))
        for r, (col, bound) in enumerate(extra_rows):
            E[r, col] = 1.0
            eb[r] = bound
        Ay = np.vstack([Ay, E])
        b = np.concatenate([b, eb])
        sense = np.concatenate([sense, np.full(len(extra_rows), LE)])
    return Ay, b, sense, cy, c0, cols, signs, shift, m


def solve_dense(P: Compiled, max_iters=None, feas_tol: float = 1e-9,
                need_duals: bool = True) -> Solution:
    """Solve the LP relaxation of ``P`` (binary flags ignored)."""
    if np.any(P.lb > P.ub + feas_tol):
        return Solution(Status.INFEASIBLE, message="crossed bounds")
    Ay, b, sense, cy, c0, cols, signs, shift, m_user = _standard_form(P)
    if P.maximize:
        cy, c0 = -cy, -c0
    m, N = Ay.shape
    n_slack = int(np.sum(sense != EQ))
    flip = b < 0
    # tableau columns: y | slacks | artificials
    slack_of_row = -np.ones(m, dtype=int)
    S = np.zeros((m, n_slack))
    k = 0
    for r in range(m):
        if sense[r] == LE:
            S[r, k] = 1.0
        elif sense[r] == GE:
            S[r, k] = -1.0
        else:
            continue
        slack_of_row[r] = k
        k += 1
    rowsign = np.where(flip, -1.0, 1.0)
    core = np.hstack([Ay, S]) * rowsign[:, None]
    rhs = b * rowsign
    init_col = np.empty(m, dtype=int)
    need_art = []
    for r in range(m):
        s = slack_of_row[r]
        if s >= 0 and core[r, N + s] > 0:
            init_col[r] = N + s
        else:
            need_art.append(r)
    n_art = len(need_art)
    ncols = N + n_slack + n_art
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :N + n_slack] = core
    for a, r in enumerate(need_art):
        T[r, N + n_slack + a] = 1.0
        init_col[r] = N + n_slack + a
    T[:m, -1] = rhs
    basis = init_col.copy()
    is_art = np.zeros(ncols, dtype=bool)
    is_art[N + n_slack:] = True

    if max_iters is None:
        max_iters = 50 * (m + ncols)
    iters = 0
    scale = 1.0 + float(np.abs(rhs).max(initial=0.0))

    # phase 1
    if n_art:
        T[-1, :] = 0.0
        for r in need_art:
            T[-1, :] -= T[r, :]
        T[-1, :-1][is_art] = 0.0
        status, iters = _iterate(T, basis, np.zeros(ncols, bool), max_iters, iters)
        if status == Status.ITERATION_LIMIT:
            return Solution(Status.ITERATION_LIMIT, iterations=iters)
        if -T[-1, -1] > feas_tol * scale:
            return Solution(Status.INFEASIBLE, iterations=iters)
        # drive remaining artificials out of the basis
        for r in range(m):
            if is_art[basis[r]]:
                row = T[r, :N + n_slack]
                cand = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if cand.size:
                    _pivot(T, r, int(cand[0]))
                    basis[r] = int(cand[0])
                    iters += 1

    # phase 2
    cfull = np.zeros(ncols)
    cfull[:N] = cy
    T[-1, :-1] = cfull - cfull[basis] @ T[:m, :-1]
    T[-1, -1] = -cfull[basis] @ T[:m, -1]
    status, iters = _iterate(T, basis, is_art, max_iters, iters)
    if status != Status.OPTIMAL:
        return Solution(status, iterations=iters)

    y = np.zeros(ncols)
    y[basis] = T[:m, -1]
    ystd = y[:N]
    x = shift.copy()
    np.add.at(x, cols, signs * ystd)
    res = P.residual(x)
    if not np.isfinite(res) or res > 1e-6 * scale:
        raise NumericalFailure("simplex result violates constraints by %.3g" % res)
    obj = float(P.c @ x + P.c0)

    duals = None
    if need_duals:
        Binv = T[:m, init_col]
        ydual = cfull[basis] @ Binv  # w.r.t. the (possibly flipped) rows
        ydual = ydual * rowsign
        if P.maximize:
            ydual = -ydual
        duals = ydual[:m_user]
    return Solution(Status.OPTIMAL, obj, x, duals, iterations=iters)


def _pivot(T: np.ndarray, r: int, k: int) -> None:
    piv = T[r, k]
    if abs(piv) < MIN_PIVOT:
        raise NumericalFailure("pivot %.3g below %.0e" % (piv, MIN_PIVOT))
    T[r, :] /= piv
    col = T[:, k].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r, :])
    T[:, k] = 0.0
    T[r, k] = 1.0


def _iterate(T, basis, barred, max_iters, iters):
    m = T.shape[0] - 1
    while True:
        rc = T[-1, :-1]
        cand = np.flatnonzero((rc < -RC_TOL) & ~barred)
        if cand.size == 0:
            return Status.OPTIMAL, iters
        if iters >= max_iters:
            return Status.ITERATION_LIMIT, iters
        k = int(cand[0])  # Bland: smallest index
        col = T[:m, k]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return Status.UNBOUNDED, iters
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * (1.0 + abs(best))]
        r = int(ties[np.argmin(basis[ties])])
        _pivot(T, r, k)
        basis[r] = k
        iters += 1

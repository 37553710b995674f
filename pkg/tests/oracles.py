"""Independent reference computations used by the tests."""

from __future__ import annotations

import itertools

import numpy as np


def lp_vertex_enumeration(c, A, b, lb, ub, maximize=False):
    """Optimum of ``c x`` over ``{A x <= b, lb <= x <= ub}`` (bounded) by vertices.

    Returns ``(value, x)`` or ``(None, None)`` when infeasible.
    """
    c = np.asarray(c, float)
    n = c.size
    rows = [np.asarray(A, float)] + [np.eye(n), -np.eye(n)]
    rhs = [np.asarray(b, float), np.asarray(ub, float), -np.asarray(lb, float)]
    G = np.vstack(rows)
    h = np.concatenate(rhs)
    best, arg = None, None
    for idx in itertools.combinations(range(G.shape[0]), n):
        M = G[list(idx)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, h[list(idx)])
        if np.all(G @ x <= h + 1e-9):
            v = float(c @ x)
            if best is None or (v > best if maximize else v < best):
                best, arg = v, x
    return best, arg


def milp_enumeration(c, A, b, lb, ub, binary, maximize=False):
    """Exhaustive enumeration of binaries; each continuous LP solved by vertices."""
    c = np.asarray(c, float)
    binary = np.asarray(binary, bool)
    bidx = np.flatnonzero(binary)
    cidx = np.flatnonzero(~binary)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    best = None
    for bits in itertools.product([0.0, 1.0], repeat=bidx.size):
        xb = np.array(bits)
        rhs = b - A[:, bidx] @ xb
        const = float(c[bidx] @ xb)
        if cidx.size == 0:
            if np.all(rhs >= -1e-9):
                v = const
            else:
                continue
        else:
            v, _ = lp_vertex_enumeration(c[cidx], A[:, cidx], rhs, np.asarray(lb)[cidx],
                                         np.asarray(ub)[cidx], maximize)
            if v is None:
                continue
            v += const
        if best is None or (v > best if maximize else v < best):
            best = v
    return best


def box_robustness(x, lo, hi):
    """Robustness of ``lo <= x <= hi`` componentwise: ``min(x - lo, hi - x)``."""
    x = np.asarray(x, float)
    return float(np.min(np.concatenate([x - lo, hi - x])))


def naive_robustness(f, s, t=0):
    """Textbook recursive robustness, one time point at a time (negation allowed)."""
    from stltube import stl

    if isinstance(f, stl.Predicate):
        terms, c = f.normalized()
        return sum(coef * s.component(v, np.array([t]))[0] for v, coef in terms) - c
    if isinstance(f, stl.Not):
        return -naive_robustness(f.child, s, t)
    if isinstance(f, stl.And):
        return min(naive_robustness(c, s, t) for c in f.children)
    if isinstance(f, stl.Or):
        return max(naive_robustness(c, s, t) for c in f.children)
    if isinstance(f, stl.Always):
        return min(naive_robustness(f.child, s, t + k) for k in range(f.a, f.b + 1))
    if isinstance(f, stl.Eventually):
        return max(naive_robustness(f.child, s, t + k) for k in range(f.a, f.b + 1))
    if isinstance(f, stl.Until):
        return max(min([naive_robustness(f.right, s, t + k)] +
                       [naive_robustness(f.left, s, t + j) for j in range(k + 1)])
                   for k in range(f.a, f.b + 1))
    raise TypeError(f)


def zonotope_vertices(c, G):
    """All ``2^q`` sign combinations of a zonotope's generators (a superset of its vertices)."""
    G = np.asarray(G, float)
    q = G.shape[1]
    signs = np.array(list(itertools.product([-1.0, 1.0], repeat=q))) if q else np.zeros((1, 0))
    return np.asarray(c, float)[None, :] + signs @ G.T


def zonotope_membership_lp(c, G, x):
    """Minimum ``||b||_inf`` with ``c + G b = x`` via a dense LP (independent formulation)."""
    from scipy.optimize import linprog

    G = np.asarray(G, float)
    n, q = G.shape
    if q == 0:
        return 0.0 if np.allclose(x, c, atol=1e-12) else np.inf
    # variables [b, t]; minimize t subject to -t <= b <= t and G b = x - c
    A_ub = np.block([[np.eye(q), -np.ones((q, 1))], [-np.eye(q), -np.ones((q, 1))]])
    res = linprog(np.r_[np.zeros(q), 1.0], A_ub=A_ub, b_ub=np.zeros(2 * q),
                  A_eq=np.hstack([G, np.zeros((n, 1))]), b_eq=np.asarray(x, float) - c,
                  bounds=[(None, None)] * q + [(0, None)], method="highs-ipm")
    return float(res.fun) if res.status == 0 else np.inf

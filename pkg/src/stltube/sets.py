"""Zonotope and H-polytope algebra plus linear containment encodings.

A :class:`Zonotope` ``Z(c, G) = {c + G b : ||b||_inf <= 1}`` may hold either
numeric arrays or :class:`~stltube.opt.AffExpr` model expressions for its
center and generators; the latter is how tube sets enter optimization models.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
from scipy.optimize import linprog

from .opt import AffExpr, OptModel, concatenate, hstack, solve_lp
from .opt.expr import value_of

MEMBERSHIP_TOL = 1e-7


def _is_expr(v) -> bool:
    return isinstance(v, AffExpr)


class Zonotope:
    """Center + generator matrix representation.

    Parameters
    ----------
    center : array_like or AffExpr, shape (n,)
    generators : array_like or AffExpr, shape (n, q), optional
        ``q = 0`` (or ``None``) encodes the singleton ``{center}``.
    """

    __slots__ = ("center", "generators")

    def __init__(self, center, generators=None):
        if not _is_expr(center):
            center = np.array(center, dtype=float).reshape(-1)
        n = center.shape[0]
        if generators is None:
            generators = np.zeros((n, 0))
        if not _is_expr(generators):
            generators = np.array(generators, dtype=float)
            if generators.ndim == 1:
                generators = generators.reshape(n, -1) if generators.size else np.zeros((n, 0))
        if len(generators.shape) != 2 or generators.shape[0] != n:
            raise ValueError(f"generator shape {generators.shape} does not match dimension {n}")
        for arr in (center, generators):
            if isinstance(arr, np.ndarray):
                if not np.all(np.isfinite(arr)):
                    raise ValueError("zonotope entries must be finite")
                arr.setflags(write=False)
        self.center = center
        self.generators = generators

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def order(self) -> int:
        """Number of generator columns."""
        return self.generators.shape[1]

    @property
    def is_numeric(self) -> bool:
        return not (_is_expr(self.center) or _is_expr(self.generators))

    def __repr__(self) -> str:
        return f"Zonotope(dim={self.dim}, q={self.order})"

    def evaluate(self, x) -> "Zonotope":
        """Substitute a solver point into expression-valued fields."""
        return Zonotope(value_of(self.center, x), value_of(self.generators, x))

    @classmethod
    def box(cls, lower, upper) -> "Zonotope":
        lower = np.asarray(lower, float)
        upper = np.asarray(upper, float)
        if np.any(upper < lower):
            raise ValueError("box with upper < lower")
        rad = (upper - lower) / 2
        keep = rad > 0
        return cls((upper + lower) / 2, np.diag(rad)[:, keep])

    def point(self, b) -> np.ndarray:
        return self.center + self.generators @ np.asarray(b, float)

    def sample(self, rng: np.random.Generator, count: int, mode: str = "uniform") -> np.ndarray:
        """Sample ``count`` points; ``mode`` is ``uniform`` (in b) or ``vertex``."""
        q = self.order
        if mode == "uniform":
            b = rng.uniform(-1.0, 1.0, size=(count, q))
        elif mode == "vertex":
            b = rng.choice([-1.0, 1.0], size=(count, q))
        else:
            raise ValueError(f"unknown sampling mode {mode!r}")
        return self.center[None, :] + b @ self.generators.T

    def to_dict(self) -> dict:
        return {"center": np.asarray(self.center).tolist(),
                "generators": np.asarray(self.generators).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Zonotope":
        if "lower" in d or "upper" in d:
            return cls.box(d["lower"], d["upper"])
        c = np.asarray(d["center"], float)
        g = np.asarray(d.get("generators", []), float)
        if g.size == 0:
            g = np.zeros((c.size, 0))
        return cls(c, g)


@dataclass(frozen=True)
class HPolytope:
    """``{x | H x <= h}``."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, float))
        h = np.asarray(self.h, float).reshape(-1)
        if H.shape[0] < 1 or H.shape[0] != h.shape[0]:
            raise ValueError("HPolytope needs r >= 1 rows and matching h")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(h))):
            raise ValueError("HPolytope rows must be finite")
        H.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    @classmethod
    def box(cls, lower, upper) -> "HPolytope":
        lower = np.asarray(lower, float)
        upper = np.asarray(upper, float)
        n = lower.size
        return cls(np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([upper, -lower]))

    def contains(self, x, tol: float = MEMBERSHIP_TOL) -> bool:
        return bool(np.all(self.H @ np.asarray(x, float) <= self.h + tol))

    def to_dict(self) -> dict:
        return {"H": self.H.tolist(), "h": self.h.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "HPolytope":
        if "lower" in d:
            return cls.box(d["lower"], d["upper"])
        return cls(d["H"], d["h"])


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise ValueError(f"dimension mismatch: {a} vs {b}")


# ---------------------------------------------------------------------------
# algebra


def minkowski(a: Zonotope, b: Zonotope) -> Zonotope:
    _check_dims(a.dim, b.dim)
    c = a.center + b.center
    if a.order == 0:
        return Zonotope(c, b.generators)
    if b.order == 0:
        return Zonotope(c, a.generators)
    return Zonotope(c, hstack([a.generators, b.generators]))


def affine_map(A, b, z: Zonotope) -> Zonotope:
    A = np.atleast_2d(np.asarray(A, float))
    _check_dims(A.shape[1], z.dim)
    c = A @ z.center
    if b is not None:
        c = c + np.asarray(b, float)
    if z.order == 0:
        return Zonotope(c, np.zeros((A.shape[0], 0)))
    return Zonotope(c, A @ z.generators)


def interval_hull(z: Zonotope) -> tuple[np.ndarray, np.ndarray]:
    """``(c - sum|g_i|, c + sum|g_i|)``."""
    if not z.is_numeric:
        raise TypeError("interval_hull needs a numeric zonotope")
    r = np.abs(z.generators).sum(axis=1)
    return z.center - r, z.center + r


# ---------------------------------------------------------------------------
# containment encodings


@dataclass
class ContainmentCert:
    """Certificate ``inner.G = sum_k G_k Gamma_k``, ``oc - ic = sum_k G_k beta_k``.

    ``gamma``/``beta`` are the scaled blocks stacked horizontally; with all
    scales equal to one this is the usual condition ``||[Gamma beta]||_row <= 1``.
    """

    gamma: np.ndarray
    beta: np.ndarray
    slack: float
    scales: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def residual(self, inner: Zonotope, outer_G: np.ndarray, outer_c) -> float:
        """Largest violation when replaying the certificate."""
        eq1 = np.abs(inner.generators - outer_G @ self.gamma).max(initial=0.0)
        eq2 = np.abs(np.asarray(outer_c) - inner.center - outer_G @ self.beta).max(initial=0.0)
        rows = np.abs(self.gamma).sum(axis=1) + np.abs(self.beta)
        bound = np.maximum(rows - self.scales, 0).max(initial=0.0)
        return float(max(eq1, eq2, bound))


@dataclass
class ContainmentHandle:
    gamma: AffExpr
    beta: AffExpr
    scales: object
    outer_G: np.ndarray
    rows: list

    def certificate(self, sol) -> ContainmentCert:
        scales = np.asarray(value_of(self.scales, sol.x), float).reshape(-1)
        gamma = value_of(self.gamma, sol.x)
        beta = value_of(self.beta, sol.x)
        slack = float(np.max(scales - (np.abs(gamma).sum(axis=1) + np.abs(beta)), initial=0.0))
        return ContainmentCert(gamma, beta, max(slack, 0.0), scales)


def _split_abs(m: OptModel, shape, name: str):
    """Free variable ``v = P - N`` with ``P, N >= 0``; returns ``(v, P + N)``."""
    P = m.add_vars(shape, lb=0.0, name=name + "_p")
    N = m.add_vars(shape, lb=0.0, name=name + "_n")
    return P - N, P + N


def encode_zono_in_zono(inner: Zonotope, outer: Zonotope, m: OptModel, inflate=None,
                        scale=None, name: str = "zz") -> ContainmentHandle:
    """Append a sufficient linear condition for ``inner ⊆ outer ⊕ Z(0, inflate·I)``.

    ``outer.generators`` must be constant. ``scale`` (one entry per outer
    generator column, constant or expression) rescales those columns. Variable
    scales are handled exactly by working with the products
    ``Gamma' = diag(scale) Gamma`` so no bilinear terms arise.
    """
    _check_dims(inner.dim, outer.dim)
    if _is_expr(outer.generators):
        raise ValueError("outer generators must be constant (variable generators make the "
                         "condition bilinear; scale template columns via `scale` instead)")
    n, q = inner.dim, inner.order
    G = np.asarray(outer.generators, float)
    f = G.shape[1]
    blocks = []  # (generator block, per-column scale)
    if f:
        s = np.ones(f) if scale is None else scale
        if not _is_expr(s):
            s = np.broadcast_to(np.asarray(s, float), (f,)).copy()
        blocks.append((G, s))
    if inflate is not None:
        d = inflate.reshape(()) + np.zeros(n) if _is_expr(inflate) else np.full(n, float(inflate))
        blocks.append((np.eye(n), d))
    rows = []
    if not blocks:
        # singleton outer: inner must coincide with it
        rows.append(m.add_constraints(inner.center - outer.center, "==", 0.0, name=name + "_c"))
        if q:
            rows.append(m.add_constraints(inner.generators, "==", 0.0, name=name + "_G"))
        return ContainmentHandle(np.zeros((0, q)), np.zeros(0), np.zeros(0), np.zeros((n, 0)), rows)
    gammas, betas, gen_sum, cen_sum = [], [], 0.0, 0.0
    for k, (Gk, sk) in enumerate(blocks):
        cols = Gk.shape[1]
        bet, babs = _split_abs(m, (cols,), f"{name}_b{k}")
        total = babs
        if q:
            gam, gabs = _split_abs(m, (cols, q), f"{name}_g{k}")
            total = total + gabs.sum(axis=1)
            gammas.append(gam)
            gen_sum = gen_sum + Gk @ gam
        rows.append(m.add_constraints(total - sk, "<=", 0.0, name=f"{name}_n{k}"))
        betas.append(bet)
        cen_sum = cen_sum + Gk @ bet
    if q:
        rows.append(m.add_constraints(inner.generators - gen_sum, "==", 0.0, name=name + "_G"))
    rows.append(m.add_constraints(outer.center - inner.center - cen_sum, "==", 0.0,
                                  name=name + "_c"))
    scales = concatenate([sk for _, sk in blocks])
    gamma = concatenate(gammas) if q else np.zeros((sum(b[0].shape[1] for b in blocks), 0))
    return ContainmentHandle(gamma, concatenate(betas), scales, np.hstack([b[0] for b in blocks]),
                             rows)


def encode_zono_in_polytope(inner: Zonotope, outer: HPolytope, m: OptModel, inflate=None,
                            name: str = "zp") -> list:
    """Exact support-function condition ``H_k c + sum_j |H_k g_j| <= h_k``.

    With ``inflate = d`` every halfspace is relaxed by ``d * ||H_k||_1``, i.e.
    the support of ``Z(0, d I)``; for boxes this equals ``outer ⊕ Z(0, d I)``.
    """
    _check_dims(inner.dim, outer.dim)
    H, h = outer.H, outer.h
    lhs = H @ inner.center
    if inner.order:
        HG = H @ inner.generators
        if _is_expr(HG):
            aux = m.add_vars(HG.shape, lb=0.0, name=name + "_a")
            rows = [m.add_constraints(aux - HG, ">=", 0.0, name=name + "_ap"),
                    m.add_constraints(aux + HG, ">=", 0.0, name=name + "_an")]
            lhs = lhs + aux.sum(axis=1)
        else:
            rows = []
            lhs = lhs + np.abs(HG).sum(axis=1)
    else:
        rows = []
    rhs = h
    if inflate is not None:
        norms = np.abs(H).sum(axis=1)
        if _is_expr(inflate):
            lhs = lhs - norms * inflate.reshape(())
        else:
            rhs = h + norms * float(inflate)
    if _is_expr(lhs):
        rows.append(m.add_constraints(lhs, "<=", rhs, name=name + "_h"))
        return rows
    if np.any(lhs > rhs + 1e-12):
        # constant infeasible containment: keep it visible to the solver
        rows.append(m.add_constraints(AffExpr.constant(lhs, m.num_vars), "<=", rhs,
                                      name=name + "_h"))
    return rows


def directed_hausdorff(target, z: Zonotope, options=None) -> float:
    """Smallest ``d >= 0`` with ``z ⊆ target ⊕ Z(0, d I)`` (infinity-norm ball).

    For zonotope targets the containment test is the sufficient generator
    condition, so the value is an upper bound on the exact distance. For
    polytope targets each halfspace is inflated by its support of the ball.
    """
    if not z.is_numeric:
        raise TypeError("directed_hausdorff needs numeric zonotopes")
    if isinstance(target, HPolytope):
        _check_dims(target.dim, z.dim)
        supp = target.H @ z.center + np.abs(target.H @ z.generators).sum(axis=1)
        norms = np.abs(target.H).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(norms > 0, (supp - target.h) / norms,
                            np.where(supp > target.h, np.inf, 0.0))
        return float(max(need.max(initial=0.0), 0.0))
    m = OptModel("hausdorff")
    d = m.add_vars((), lb=0.0, name="d")
    encode_zono_in_zono(z, target, m, inflate=d)
    m.set_objective(d, "min")
    sol = solve_lp(m, options or {"backend": "highs"})
    if not sol.ok:
        raise RuntimeError(f"directed Hausdorff LP failed: {sol.status.value}")
    return max(float(sol.objective), 0.0)


def min_inf_preimage(G: np.ndarray, r: np.ndarray, eq_tol: float = 1e-9):
    """Solve ``min ||b||_inf  s.t.  |G b - r| <= eq_tol (1 + ||r||_inf)``.

    Returns ``(b, ||b||_inf)``, or ``(None, inf)`` when no such ``b`` exists.
    """
    G = np.asarray(G, float)
    r = np.asarray(r, float).reshape(-1)
    n, q = G.shape
    if q == 0:
        tol = eq_tol * (1.0 + np.abs(r).max(initial=0.0))
        ok = np.abs(r).max(initial=0.0) <= tol
        return (np.zeros(0), 0.0) if ok else (None, np.inf)
    # row scaling keeps small generators well above the solver's absolute tolerances
    scale = np.abs(G).max(axis=1)
    scale[scale == 0] = 1.0
    G = G / scale[:, None]
    r = r / scale
    tol = eq_tol * (1.0 + np.abs(r).max(initial=0.0))
    # variables [b (q), t]
    c = np.zeros(q + 1)
    c[-1] = 1.0
    A_ub = np.vstack([
        np.hstack([G, np.zeros((n, 1))]),
        np.hstack([-G, np.zeros((n, 1))]),
        np.hstack([np.eye(q), -np.ones((q, 1))]),
        np.hstack([-np.eye(q), -np.ones((q, 1))]),
    ])
    b_ub = np.concatenate([r + tol, tol - r, np.zeros(2 * q)])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * q + [(0, None)],
                  method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        return None, np.inf
    b = res.x[:q]
    return b, float(np.abs(b).max(initial=0.0))


def contains_point(z: Zonotope, x, tol: float = MEMBERSHIP_TOL) -> bool:
    """``True`` iff ``x = c + G b`` for some ``||b||_inf <= 1 + tol``."""
    x = np.asarray(x, float).reshape(-1)
    _check_dims(z.dim, x.size)
    _, norm = min_inf_preimage(z.generators, x - z.center)
    return bool(norm <= 1.0 + tol)

"""Coupled time-varying linear networks.

Subsystem ``i`` evolves as::

    x_i(t+1) = A_ii(t) x_i(t) + B_ii(t) u_i(t)
               + sum_j [A_ij(t) x_j(t) + B_ij(t) u_j(t)] + w_i(t),   w_i(t) in W_i(t)

Matrices and sets may be given once (time-invariant) or as a per-step list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .sets import HPolytope, Zonotope
from .stl import Signature


def _per_step(value, t: int):
    if isinstance(value, (list, tuple)):
        return value[min(t, len(value) - 1)] if len(value) else None
    if isinstance(value, np.ndarray) and value.ndim == 3:
        return value[min(t, value.shape[0] - 1)]
    return value


def _mat(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    return a.reshape(1, -1) if a.ndim == 1 else a


@dataclass
class Coupling:
    """Influence of neighbor ``j`` on this subsystem: ``A_ij x_j + B_ij u_j``."""

    A: object = None
    B: object = None

    def A_at(self, t: int) -> Optional[np.ndarray]:
        return None if self.A is None else _mat(_per_step(self.A, t))

    def B_at(self, t: int) -> Optional[np.ndarray]:
        return None if self.B is None else _mat(_per_step(self.B, t))


@dataclass
class Subsystem:
    A: object
    B: object
    X: object
    U: object
    W: object
    x_init: np.ndarray
    couplings: dict = field(default_factory=dict)
    name: str = ""
    x_init_gen: Optional[np.ndarray] = None  # generators of a set-valued initial state

    def __post_init__(self):
        self.x_init = np.asarray(self.x_init, dtype=float).reshape(-1)
        self.couplings = {int(j): c for j, c in self.couplings.items()}
        if self.x_init_gen is None:
            self.x_init_gen = np.zeros((self.x_init.size, 0))
        self.x_init_gen = np.asarray(self.x_init_gen, float).reshape(self.x_init.size, -1)

    @property
    def k(self) -> int:
        """Initial generator count of the tube."""
        return self.x_init_gen.shape[1]

    @property
    def n(self) -> int:
        return self.A_at(0).shape[0]

    @property
    def m(self) -> int:
        return self.B_at(0).shape[1]

    def A_at(self, t: int) -> np.ndarray:
        return _mat(_per_step(self.A, t))

    def B_at(self, t: int) -> np.ndarray:
        return _mat(_per_step(self.B, t))

    def X_at(self, t: int) -> HPolytope:
        return _per_step(self.X, t)

    def U_at(self, t: int) -> HPolytope:
        return _per_step(self.U, t)

    def W_at(self, t: int) -> Zonotope:
        return _per_step(self.W, t)


@dataclass
class Network:
    subsystems: list
    horizon: int

    @property
    def eta(self) -> int:
        return len(self.subsystems)

    def __len__(self) -> int:
        return len(self.subsystems)

    def __getitem__(self, i: int) -> Subsystem:
        return self.subsystems[i]

    @property
    def signature(self) -> Signature:
        return Signature(tuple(s.n for s in self.subsystems), tuple(s.m for s in self.subsystems))

    def neighbors(self, i: int) -> list:
        """Subsystems that influence ``i`` (incoming couplings)."""
        return sorted(self.subsystems[i].couplings)

    def influenced_by(self, j: int) -> list:
        return [i for i, s in enumerate(self.subsystems) if j in s.couplings]

    def with_horizon(self, horizon: int) -> "Network":
        return Network(self.subsystems, int(horizon))

    def step(self, t: int, xs: list, us: list, ws: list) -> list:
        """One step of the true coupled dynamics, per subsystem."""
        out = []
        for i, s in enumerate(self.subsystems):
            x = s.A_at(t) @ xs[i] + s.B_at(t) @ us[i] + ws[i]
            for j, c in s.couplings.items():
                Aij, Bij = c.A_at(t), c.B_at(t)
                if Aij is not None:
                    x = x + Aij @ xs[j]
                if Bij is not None:
                    x = x + Bij @ us[j]
            out.append(x)
        return out


@dataclass(frozen=True)
class PowerAreaParams:
    """Load-frequency-control area parameters (gain, synchronizing coefficient, time constant)."""

    K_p: float = 110.0
    K_s: float = 0.5
    T_p: float = 25.0
    dt: float = 0.1
    omega_bound: float = 0.001
    u_bound: float = 0.1
    x_bound: float = 10.0

    def __post_init__(self):
        for name in ("K_p", "K_s", "T_p", "dt", "u_bound", "x_bound"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.omega_bound < 0:
            raise ValueError("omega_bound must be nonnegative")


def power_area_matrices(p: PowerAreaParams, degree: int):
    """Euler-discretized ``(A_ii, A_ij, B_ii, w_gen)`` for states ``[delta, f]``."""
    sync = p.K_p * p.K_s / (2 * math.pi * p.T_p)
    Ac = np.array([[0.0, 2 * math.pi], [-sync * degree, -1.0 / p.T_p]])
    Aii = np.eye(2) + p.dt * Ac
    Aij = np.zeros((2, 2))
    Aij[1, 0] = p.dt * sync
    Bii = np.array([[0.0], [p.dt * p.K_p / p.T_p]])
    wgen = np.array([[0.0], [p.dt * p.K_p * p.omega_bound / p.T_p]])
    return Aii, Aij, Bii, wgen


def build_power_ring(n_areas: int, p: PowerAreaParams = PowerAreaParams(),
                     horizon: int = 8, x_init=(0.1, 0.1)) -> Network:
    """Ring of ``n_areas`` power areas, each coupled to its two neighbors."""
    if n_areas < 3:
        raise ValueError("a ring needs at least 3 areas")
    Aii, Aij, Bii, wgen = power_area_matrices(p, degree=2)
    if p.omega_bound == 0:
        W = Zonotope(np.zeros(2))
    else:
        W = Zonotope(np.zeros(2), wgen)
    X = HPolytope.box([-p.x_bound] * 2, [p.x_bound] * 2)
    U = HPolytope.box([-p.u_bound], [p.u_bound])
    subs = []
    for i in range(n_areas):
        nb = {(i - 1) % n_areas: Coupling(A=Aij), (i + 1) % n_areas: Coupling(A=Aij)}
        subs.append(Subsystem(A=Aii, B=Bii, X=X, U=U, W=W, x_init=np.asarray(x_init, float),
                              couplings=nb, name=f"area{i}"))
    return Network(subs, horizon)


@dataclass
class AggregateSystem:
    """Stacked dynamics ``x(t+1) = A(t) x(t) + B(t) u(t) + w(t)``."""

    A: list
    B: list
    X: list
    U: list
    W: list
    state_slices: list
    input_slices: list


def _offsets(dims):
    out, k = [], 0
    for d in dims:
        out.append(slice(k, k + d))
        k += d
    return out


def aggregate(net: Network) -> AggregateSystem:
    sig = net.signature
    xs, us = _offsets(sig.state_dims), _offsets(sig.input_dims)
    N, Mu = sum(sig.state_dims), sum(sig.input_dims)
    As, Bs, Xs, Us, Ws = [], [], [], [], []
    for t in range(max(net.horizon, 1) + 1):
        A = np.zeros((N, N))
        B = np.zeros((N, Mu))
        for i, s in enumerate(net.subsystems):
            A[xs[i], xs[i]] = s.A_at(t)
            B[xs[i], us[i]] = s.B_at(t)
            for j, c in s.couplings.items():
                if c.A_at(t) is not None:
                    A[xs[i], xs[j]] += c.A_at(t)
                if c.B_at(t) is not None:
                    B[xs[i], us[j]] += c.B_at(t)
        As.append(A)
        Bs.append(B)
        Xs.append(HPolytope(sla.block_diag(*[s.X_at(t).H for s in net.subsystems]),
                            np.concatenate([s.X_at(t).h for s in net.subsystems])))
        Us.append(HPolytope(sla.block_diag(*[s.U_at(t).H for s in net.subsystems]),
                            np.concatenate([s.U_at(t).h for s in net.subsystems])))
        Wz = [s.W_at(t) for s in net.subsystems]
        Ws.append(Zonotope(np.concatenate([w.center for w in Wz]),
                           sla.block_diag(*[w.generators for w in Wz])
                           if any(w.order for w in Wz) else np.zeros((N, 0))))
    return AggregateSystem(As, Bs, Xs, Us, Ws, xs, us)


def validate(net: Network) -> list:
    """Check shapes, coupling references and initial states.

    Returns a list of ``{"where": ..., "message": ...}`` records (empty when
    the network is well formed).
    """
    issues = []

    def flag(where, msg):
        issues.append({"where": where, "message": msg})

    eta = net.eta
    if net.horizon < 0:
        flag("network", "negative horizon")
    for i, s in enumerate(net.subsystems):
        for t in range(max(net.horizon, 1)):
            try:
                A, B = s.A_at(t), s.B_at(t)
            except Exception as e:  # malformed arrays
                flag(f"subsystem {i}, t={t}", f"cannot read A/B: {e}")
                continue
            n = s.x_init.size
            if A.shape != (n, n):
                flag(f"A[{i}], t={t}", f"shape {A.shape}, expected {(n, n)}")
            if B.shape[0] != n:
                flag(f"B[{i}], t={t}", f"shape {B.shape}, expected {n} rows")
            for j, c in s.couplings.items():
                if not 0 <= j < eta or j == i:
                    flag(f"coupling ({i},{j})", "references a nonexistent or self subsystem")
                    continue
                nj = net.subsystems[j].x_init.size
                mj = net.subsystems[j].B_at(t).shape[1]
                Aij, Bij = c.A_at(t), c.B_at(t)
                if Aij is not None and Aij.shape != (n, nj):
                    flag(f"A[{i},{j}], t={t}", f"shape {Aij.shape}, expected {(n, nj)}")
                if Bij is not None and Bij.shape != (n, mj):
                    flag(f"B[{i},{j}], t={t}", f"shape {Bij.shape}, expected {(n, mj)}")
            X, U, W = s.X_at(t), s.U_at(t), s.W_at(t)
            if X is None or X.dim != n:
                flag(f"X[{i}], t={t}", "missing or wrong dimension")
            if U is None or U.dim != B.shape[1]:
                flag(f"U[{i}], t={t}", "missing or wrong dimension")
            if W is None or W.dim != n:
                flag(f"W[{i}], t={t}", "missing or wrong dimension")
        X0 = s.X_at(0)
        if X0 is not None and X0.dim == s.x_init.size and not X0.contains(s.x_init, 1e-12):
            flag(f"x_init[{i}]", "initial state outside X_i(0)")
    return issues

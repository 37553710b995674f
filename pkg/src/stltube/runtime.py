"""Closed-loop execution of tube controllers on the true coupled network.

Each subsystem applies ``u = ubar_t + M_t zeta`` and, after observing its
next state, recovers the coefficient vector ``b`` of the realized augmented
disturbance (own noise plus neighbor couplings) in the assumed disturbance
zonotope by a min-infinity-norm back-solve; ``zeta`` grows by ``b``.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import stl
from .contracts import ControllerParams
from .network import Network
from .sets import Zonotope, contains_point, min_inf_preimage

log = logging.getLogger(__name__)

ZETA_TOL = 1e-6
SAMPLER_MODES = ("uniform", "extreme_vertex", "adversarial_axis")


class ContractViolation(RuntimeError):
    """Realized couplings left the assumed disturbance set."""

    def __init__(self, message: str, subsystem: int = -1, t: int = -1, run: int = -1,
                 norm: float = float("nan")):
        super().__init__(message)
        self.subsystem, self.t, self.run, self.norm = subsystem, t, run, norm

    def to_json(self) -> dict:
        return {"message": str(self), "subsystem": self.subsystem, "t": self.t, "run": self.run,
                "norm": self.norm}


@dataclass
class ZetaState:
    """Per-subsystem ``zeta`` vectors; ``zeta[i]`` has length ``q_i(t)``."""

    zeta: list

    def norms(self) -> list:
        return [float(np.abs(z).max(initial=0.0)) for z in self.zeta]

    def copy(self) -> "ZetaState":
        return ZetaState([z.copy() for z in self.zeta])


def initial_zeta(net: Network, ctrl: ControllerParams, x0: Optional[list] = None) -> ZetaState:
    """``zeta_0`` placing ``x0`` (default ``x_init``) in ``Z(xbar_0, T_0)``."""
    out = []
    for i, s in enumerate(net.subsystems):
        x = s.x_init if x0 is None else np.asarray(x0[i], float)
        b, norm = min_inf_preimage(ctrl.T[i][0], x - ctrl.xbar[i][0])
        if b is None or norm > 1 + ZETA_TOL:
            raise ContractViolation(f"initial state of subsystem {i} outside the initial tube",
                                    i, 0, norm=norm)
        out.append(b)
    return ZetaState(out)


def control(i: int, t: int, zeta: ZetaState, ctrl: ControllerParams) -> np.ndarray:
    """``u_i(t) = ubar_t + M_t zeta``."""
    z = zeta.zeta[i]
    M = ctrl.M[i][t]
    if z.size != M.shape[1]:
        raise ValueError(f"zeta of subsystem {i} has length {z.size}, controller at t={t} "
                         f"expects {M.shape[1]}")
    return ctrl.ubar[i][t] + M @ z


def advance_zeta(i: int, t: int, x_next, x, u, zeta: ZetaState, ctrl: ControllerParams,
                 net: Network) -> ZetaState:
    """Append the disturbance coefficients realized between ``t`` and ``t + 1``.

    Raises :class:`ContractViolation` when no ``b`` with ``||b||_inf <= 1`` explains
    the observed transition.
    """
    s = net[i]
    w_obs = np.asarray(x_next, float) - s.A_at(t) @ x - s.B_at(t) @ u
    b, norm = min_inf_preimage(ctrl.Gw[i][t], w_obs - ctrl.dw[i][t])
    if b is None or norm > 1 + ZETA_TOL:
        raise ContractViolation(f"subsystem {i} at t={t}: realized disturbance outside the "
                                f"assumed set (||b||={norm:.3g})", i, t, norm=norm)
    out = zeta.copy()
    out.zeta[i] = np.concatenate([zeta.zeta[i], b])
    return out


@dataclass
class DisturbanceSampler:
    """Draws ``w_i(t) in W_i(t)``.

    ``uniform`` samples the generator coefficients uniformly, ``extreme_vertex``
    picks random vertices, ``adversarial_axis`` picks the vertex pushing the
    next state farthest from the next tube center (a heuristic stress test).
    """

    mode: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in SAMPLER_MODES:
            raise ValueError(f"unknown sampler mode {self.mode!r}; choose from {SAMPLER_MODES}")

    def rng(self, run: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, run])

    def sample(self, W: Zonotope, rng: np.random.Generator, push=None) -> np.ndarray:
        q = W.order
        if q == 0:
            return np.array(W.center, float)
        if self.mode == "uniform":
            b = rng.uniform(-1.0, 1.0, q)
        elif self.mode == "extreme_vertex":
            b = rng.choice([-1.0, 1.0], q)
        else:
            direction = np.zeros(W.dim) if push is None else np.asarray(push, float)
            if not np.any(direction):
                direction = rng.choice([-1.0, 1.0], W.dim)
            b = np.sign(W.generators.T @ direction)
            b[b == 0] = 1.0
        return W.center + W.generators @ b


@dataclass
class RunResult:
    run: int
    trajectory: stl.Trajectory
    zeta_norms: np.ndarray  # (h + 1, eta)
    in_tube: np.ndarray  # (h + 1, eta) bool
    robustness: float = float("nan")
    satisfied: bool = False
    u_max: float = float("nan")
    violation: Optional[dict] = None

    @property
    def ok(self) -> bool:
        return self.violation is None and self.satisfied and bool(self.in_tube.all())


@dataclass
class SimulationResult:
    runs: list
    formula: Optional[stl.Formula] = None
    start: int = 0

    @property
    def trajectories(self) -> list:
        return [r.trajectory for r in self.runs]

    def summary(self) -> dict:
        rob = np.array([r.robustness for r in self.runs], float)
        finite = rob[np.isfinite(rob)]
        return {
            "runs": len(self.runs),
            "violations": int(sum(not r.ok for r in self.runs)),
            "contract_violations": int(sum(r.violation is not None for r in self.runs)),
            "spec_violations": int(sum(r.violation is None and not r.satisfied for r in self.runs)),
            "tube_exits": int(sum(not r.in_tube.all() for r in self.runs)),
            "min_robustness": float(finite.min()) if finite.size else None,
            "mean_robustness": float(finite.mean()) if finite.size else None,
            "max_abs_input": float(max((r.u_max for r in self.runs), default=0.0)),
            "max_zeta_norm": float(max((r.zeta_norms.max(initial=0.0) for r in self.runs),
                                       default=0.0)),
        }


def simulate_run(net: Network, ctrl: ControllerParams, sampler: DisturbanceSampler, run: int = 0,
                 formula: Optional[stl.Formula] = None, start: int = 0,
                 check_membership: bool = True) -> RunResult:
    """One closed-loop run of the true coupled dynamics."""
    rng = sampler.rng(run)
    h = ctrl.horizon
    eta = net.eta
    xs = [np.array(s.x_init, float) for s in net.subsystems]
    zeta = initial_zeta(net, ctrl)
    states = [[x] for x in xs]
    inputs = [[] for _ in range(eta)]
    norms = np.zeros((h + 1, eta))
    inside = np.ones((h + 1, eta), bool)
    violation = None
    norms[0] = zeta.norms()

    def member(i, t, x):
        return contains_point(ctrl.omega(i, t), x) if check_membership else True

    for i in range(eta):
        inside[0, i] = member(i, 0, xs[i])
    t_end = h
    for t in range(h):
        us = [control(i, t, zeta, ctrl) for i in range(eta)]
        ws = []
        for i, s in enumerate(net.subsystems):
            push = None
            if sampler.mode == "adversarial_axis":
                pred = net.step(t, xs, us, [np.zeros(s2.n) for s2 in net.subsystems])[i]
                push = pred - ctrl.xbar[i][t + 1]
            ws.append(sampler.sample(s.W_at(t), rng, push))
        nxt = net.step(t, xs, us, ws)
        try:
            for i in range(eta):
                zeta = advance_zeta(i, t, nxt[i], xs[i], us[i], zeta, ctrl, net)
        except ContractViolation as e:
            e.run = run
            violation = e.to_json()
            log.warning("run %d: %s", run, e)
            for i in range(eta):
                inputs[i].append(us[i])
                states[i].append(nxt[i])
            t_end = t + 1
            break
        for i in range(eta):
            inputs[i].append(us[i])
            states[i].append(nxt[i])
            inside[t + 1, i] = member(i, t + 1, nxt[i])
        norms[t + 1] = zeta.norms()
        xs = nxt
    traj = stl.Trajectory([np.array(s) for s in states],
                          [np.array(u).reshape(len(u), -1) for u in inputs])
    u_max = max((float(np.abs(np.array(u)).max(initial=0.0)) for u in inputs), default=0.0)
    res = RunResult(run, traj, norms[:t_end + 1], inside[:t_end + 1], u_max=u_max,
                    violation=violation)
    if formula is not None and violation is None:
        res.robustness = stl.robustness(formula, traj, start)
        res.satisfied = res.robustness >= 0
    elif formula is None:
        res.satisfied = violation is None
    return res


def simulate(net: Network, ctrl: ControllerParams, sampler: DisturbanceSampler, runs: int,
             formula: Optional[stl.Formula] = None, start: int = 0, workers: int = 1,
             check_membership: bool = True) -> SimulationResult:
    """Monte Carlo over ``runs`` independent seeds ``(sampler.seed, run)``."""
    def one(k):
        return simulate_run(net, ctrl, sampler, k, formula, start, check_membership)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            out = list(pool.map(one, range(runs)))
    else:
        out = [one(k) for k in range(runs)]
    return SimulationResult(out, formula, start)


def write_trace(path, sim: SimulationResult) -> None:
    """``trace.csv``: one row per (run, t, subsystem)."""
    runs = sim.runs
    if not runs:
        raise ValueError("no runs to write")
    traj0 = runs[0].trajectory
    nmax = max(s.shape[1] for s in traj0.states)
    mmax = max((u.shape[1] for u in traj0.inputs), default=0)
    header = (["run", "t", "subsystem"] + [f"x{k}" for k in range(nmax)] +
              [f"u{k}" for k in range(mmax)] + ["zeta_inf_norm", "in_tube"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in runs:
            tr = r.trajectory
            for t in range(tr.horizon + 1):
                for i, X in enumerate(tr.states):
                    x = list(X[t]) + [""] * (nmax - X.shape[1])
                    U = tr.inputs[i]
                    u = list(U[t]) if t < len(U) else []
                    u = u + [""] * (mmax - len(u))
                    zn = r.zeta_norms[t, i] if t < len(r.zeta_norms) else ""
                    it = int(r.in_tube[t, i]) if t < len(r.in_tube) else ""
                    w.writerow([r.run, t, i] + [repr(float(v)) if v != "" else "" for v in x] +
                               [repr(float(v)) if v != "" else "" for v in u] +
                               [repr(float(zn)) if zn != "" else "", it])


def read_trace(path) -> dict:
    """Parse a trace CSV into ``{run: Trajectory}``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"trace {path} is empty")
    data: dict = {}
    for row in rows:
        run = int(row.get("run") or 0)
        t, i = int(row["t"]), int(row["subsystem"])
        x = [float(row[k]) for k in sorted((k for k in row if k.startswith("x") and k[1:].isdigit()),
                                           key=lambda k: int(k[1:])) if row[k] not in ("", None)]
        u = [float(row[k]) for k in sorted((k for k in row if k.startswith("u") and k[1:].isdigit()),
                                           key=lambda k: int(k[1:])) if row[k] not in ("", None)]
        data.setdefault(run, {}).setdefault(i, {})[t] = (x, u)
    out = {}
    for run, subs in data.items():
        states, inputs = [], []
        for i in sorted(subs):
            ts = sorted(subs[i])
            if ts != list(range(len(ts))):
                raise ValueError(f"run {run}, subsystem {i}: time steps are not contiguous")
            states.append(np.array([subs[i][t][0] for t in ts], float))
            us = [subs[i][t][1] for t in ts if subs[i][t][1]]
            inputs.append(np.array(us, float) if us else np.zeros((0, 0)))
        out[run] = stl.Trajectory(states, inputs)
    return out

"""Distributed synthesis by descent on a sum of per-subsystem potentials.

Given contract parameters ``alpha``, subsystem ``i`` solves a local LP that
relaxes contract correctness and hard bounds by nonnegative inflation
defects; its optimal total defect is the potential ``V_i(alpha)``. The
parameters enter that LP only as right-hand sides of pinning rows, so
``V_i`` is a convex piecewise-affine function of ``alpha`` and the pin duals
are an exact subgradient. ``V = sum_i V_i`` is driven to zero by projected,
preconditioned subgradient steps with a backtracking line search.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import stl
from .contracts import (ContractParams, ControllerParams, Defects, ParamLayout, ParamTemplate,
                        ParamVars, SynthesisInfeasible, Tube, assumed_disturbance,
                        build_correctness_constraints, build_hard_constraints,
                        build_tube_constraints, warm_start)
from .network import Network
from .opt import OptModel, SolverOptions, Status, solve_lp
from .stl_milp import ActiveSet, NominalPlan, build_containment_constraints

log = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-9
FAMILIES = ("dx", "du", "dbx", "dbu")


class SpecDynamicsConflict(SynthesisInfeasible):
    """The local STL containment family cannot hold under the subsystem dynamics."""


def local_active(i: int, active: ActiveSet, f: stl.Formula) -> ActiveSet:
    """Active predicate instances that read subsystem ``i`` only.

    Raises :class:`stl.NotSeparable` when an active predicate couples
    several subsystems.
    """
    f = stl.normalize_negation_free(f)
    entries = set()
    for path, t in active.entries:
        subs = stl.subformula(f, path).subsystems()
        if len(subs) > 1:
            raise stl.NotSeparable(f"predicate {stl.path_str(path)} couples subsystems {sorted(subs)}")
        if subs == {i}:
            entries.add((path, t))
    snap = {k: v for k, v in active.snapshot.items() if k in entries}
    return ActiveSet(entries, active.rho_star, snap)


@dataclass
class PotentialResult:
    value: float
    defects: dict  # family -> per-time array
    controllers: Optional[ControllerParams]
    subgradient: Optional[np.ndarray] = None
    status: str = "optimal"

    def family_totals(self) -> dict:
        return {k: float(np.sum(v)) for k, v in self.defects.items()}

    def to_json(self) -> dict:
        return {"V": self.value, "defects": {k: np.asarray(v).tolist() for k, v in self.defects.items()}}


class PotentialLP:
    """Compiled local LP of subsystem ``i``; only the pin right-hand sides vary.

    Parameters
    ----------
    i : int
    net : Network
    templates : ParamTemplate
    layout : ParamLayout
    formula : Formula
        Full (negation-free) formula the active set refers to.
    active : ActiveSet
        Active predicate instances; entries on other subsystems are ignored.
    rho_hat : float
        Robustness margin imposed on the active predicates over the tube.
    """

    def __init__(self, i: int, net: Network, templates: ParamTemplate, layout: ParamLayout,
                 formula: stl.Formula, active: ActiveSet, rho_hat: float = 0.0):
        self.i = i
        self.layout = layout
        self.horizon = h = net.horizon
        self.subsystems = sorted({i} | set(net.neighbors(i)))
        m = OptModel(f"potential{i}")
        self.pv = ParamVars(m, layout, self.subsystems, pinned=ContractParams(layout))
        Wz = [assumed_disturbance(i, t, self.pv, net, templates) for t in range(h)]
        self.tube = build_tube_constraints(i, net, Wz, m)
        self.defects = Defects(dx=m.add_vars(h + 1, lb=0.0, name="dx"),
                               du=m.add_vars(h, lb=0.0, name="du"),
                               dbx=m.add_vars(h + 1, lb=0.0, name="dbx"),
                               dbu=m.add_vars(h, lb=0.0, name="dbu"))
        build_hard_constraints(i, self.tube, net, m, self.defects)
        build_correctness_constraints(i, self.tube, self.pv, templates, m, self.defects)
        loc = local_active(i, active, formula)
        build_containment_constraints(loc, formula, lambda j, t: self.tube.view(t) if j == i else None,
                                      rho_hat, m, name=f"G{i}")
        m.set_objective(self.defects.total(), "min")
        self.model = m
        self.P = m.freeze()
        self.pin_rows = np.concatenate([h.rows for h, _ in self.pv.pins])
        self.pin_index = np.concatenate([idx for _, idx in self.pv.pins])
        self.coords = np.unique(self.pin_index)

    @property
    def shape(self):
        return self.P.shape

    def _solve(self, vec, opts: SolverOptions):
        b = self.P.b.copy()
        b[self.pin_rows] = np.asarray(vec, float)[self.pin_index]
        return solve_lp(dataclasses.replace(self.P, b=b), opts)

    def value(self, vec, options=None) -> float:
        sol = self._solve(vec, SolverOptions.from_dict(options or {"backend": "highs"}))
        if sol.status != Status.OPTIMAL:
            return float("inf")
        return max(float(sol.objective), 0.0)

    def evaluate(self, vec, options=None, gradient: str = "dual",
                 fd_step: float = 1e-4) -> PotentialResult:
        """Solve at ``alpha = vec``; returns value, defects, minimizer and subgradient."""
        opts = SolverOptions.from_dict(options or {"backend": "highs"})
        sol = self._solve(vec, opts)
        if sol.status != Status.OPTIMAL:
            raise SpecDynamicsConflict(
                f"potential LP of subsystem {self.i} is {sol.status.value}: the local STL "
                "containment family conflicts with the dynamics", {"subsystem": self.i})
        d = self.defects
        defects = {k: np.maximum(getattr(d, k).value(sol.x), 0.0) for k in FAMILIES}
        ctrl = ControllerParams.from_solution([self.tube], sol.x)
        V = max(float(sol.objective), 0.0)
        g = np.zeros(self.layout.size)
        if gradient == "dual":
            np.add.at(g, self.pin_index, sol.duals[self.pin_rows])
        elif gradient == "fd":
            base = np.asarray(vec, float)
            for k in self.coords:
                probe = base.copy()
                probe[k] += fd_step
                g[k] = (self.value(probe, opts) - V) / fd_step
        elif gradient != "none":
            raise ValueError(f"unknown gradient mode {gradient!r}")
        return PotentialResult(V, defects, ctrl, g)


def build_potential_lp(i, net, templates, layout, formula, active, rho_hat=0.0) -> PotentialLP:
    return PotentialLP(i, net, templates, layout, formula, active, rho_hat)


def eval_potential_i(i: int, alpha: ContractParams, net: Network, formula: stl.Formula,
                     active: ActiveSet, templates: ParamTemplate, rho_hat: float = 0.0,
                     options=None, gradient: str = "dual") -> PotentialResult:
    """One-shot ``V_i(alpha)`` (builds the LP; prefer :class:`PotentialLP` in loops)."""
    lp = PotentialLP(i, net, templates, alpha.layout, formula, active, rho_hat)
    return lp.evaluate(alpha.vec, options, gradient)


def subgradient_i(lp: PotentialLP, alpha, result: Optional[PotentialResult] = None,
                  mode: str = "fd", options=None, fd_step: float = 1e-4) -> np.ndarray:
    """Subgradient of ``V_i`` over ``alpha^ext``.

    ``mode="fd"`` takes one-sided differences on the coordinates that enter the
    local LP; ``mode="dual"`` reads the pin duals. Coordinates of subsystems
    outside ``i`` and its neighbors are exactly zero.
    """
    vec = alpha.vec if isinstance(alpha, ContractParams) else np.asarray(alpha, float)
    if mode == "dual" and result is not None and result.subgradient is not None:
        return result.subgradient
    return lp.evaluate(vec, options, gradient=mode, fd_step=fd_step).subgradient


# ---------------------------------------------------------------------------
# descent


@dataclass
class DescentState:
    iteration: int
    alpha: ContractParams
    V_history: list = field(default_factory=list)
    step: float = float("nan")
    armijo: float = 1e-4


@dataclass
class DistributedResult:
    success: bool
    contracts: ContractParams
    controllers: Optional[ControllerParams]
    tube: Optional[Tube]
    report: dict
    potentials: list


def preconditioner(layout: ParamLayout, templates: ParamTemplate) -> np.ndarray:
    """Per-coordinate scale: template radius for centers, one for scales."""
    S = np.ones(layout.size)
    for i in range(layout.eta):
        rx = np.abs(templates.Gx[i]).sum(axis=1)
        ru = np.abs(templates.Gu[i]).sum(axis=1)
        S[layout.slice(i, "cx")] = np.tile(rx, layout.shapes[i, "cx"][0])
        if layout.shapes[i, "cu"][0]:
            S[layout.slice(i, "cu")] = np.tile(ru, layout.shapes[i, "cu"][0])
    return np.maximum(S, 1e-12)


def _merge(ctrls: list) -> ControllerParams:
    def col(name):
        return [getattr(c, name)[0] for c in ctrls]
    return ControllerParams(col("xbar"), col("T"), col("ubar"), col("M"), col("Gw"), col("dw"),
                            [c.k[0] for c in ctrls])


class _Evaluator:
    def __init__(self, lps: list, options, gradient: str, workers: int):
        self.lps = lps
        self.options = SolverOptions.from_dict(options or {"backend": "highs"})
        self.gradient = gradient
        self.pool = ThreadPoolExecutor(workers) if workers > 1 else None
        self.lp_time = np.zeros(len(lps))
        self.calls = 0
        self.call_times = []  # summed LP time of each full (gradient) evaluation
        self.grad_times = [[] for _ in lps]  # per subsystem, each gradient evaluation

    def _one(self, k, vec, gradient):
        t0 = time.perf_counter()
        try:
            return self.lps[k].evaluate(vec, self.options, gradient)
        except SpecDynamicsConflict as e:
            return e
        finally:
            dt = time.perf_counter() - t0
            self.lp_time[k] += dt
            if gradient != "none":
                self.grad_times[k].append(dt)

    def __call__(self, vec, gradient: Optional[str] = None):
        """All potentials at one immutable snapshot of ``vec``."""
        self.calls += 1
        vec = np.array(vec, float)
        vec.setflags(write=False)
        g = self.gradient if gradient is None else gradient
        before = self.lp_time.sum()
        if self.pool is None:
            out = [self._one(k, vec, g) for k in range(len(self.lps))]
        else:
            out = list(self.pool.map(lambda k: self._one(k, vec, g), range(len(self.lps))))
        if g != "none":
            self.call_times.append(float(self.lp_time.sum() - before))
        return out

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def _total(results) -> float:
    if any(isinstance(r, Exception) for r in results):
        return float("inf")
    return float(sum(r.value for r in results))


def run_distributed(net: Network, formula: stl.Formula, plan: NominalPlan, templates: ParamTemplate,
                    alpha0: Optional[ContractParams] = None, tol: float = 1e-6,
                    max_iter: int = 500, rho_hat: float = 0.0, options=None,
                    gradient: str = "dual", workers: int = 1, armijo: float = 1e-4,
                    max_halvings: int = 40, monitor_convexity: bool = True) -> DistributedResult:
    """Minimize ``V(alpha) = sum_i V_i(alpha)`` until it drops to ``tol``.

    Each iteration evaluates every ``V_i`` and its subgradient at the same
    ``alpha`` snapshot (optionally in a thread pool), steps along the
    preconditioned negative subgradient with a Polyak initial step
    (the optimal value is zero), halves until the Armijo condition holds and
    projects the template scales onto ``[1e-9, inf)``.
    """
    t_start = time.perf_counter()
    layout = ParamLayout(net, templates)
    f = stl.normalize_negation_free(formula)
    t0 = time.perf_counter()
    lps = [PotentialLP(i, net, templates, layout, f, plan.active, rho_hat) for i in range(net.eta)]
    build_time = time.perf_counter() - t0
    ev = _Evaluator(lps, options, gradient, workers)
    scale_mask = layout.scale_mask()
    S2 = preconditioner(layout, templates) ** 2

    def project(v):
        v = v.copy()
        v[scale_mask] = np.maximum(v[scale_mask], ALPHA_FLOOR)
        return v

    alpha = project((alpha0 or warm_start(layout, plan)).vec)
    state = DescentState(0, ContractParams(layout, alpha), armijo=armijo)
    results = ev(alpha)
    for r in results:
        if isinstance(r, Exception):
            ev.close()
            raise r
    V = _total(results)
    state.V_history.append(V)
    iter_times, convexity_violations, steps = [], [], []
    while V > tol and state.iteration < max_iter:
        t_it = time.perf_counter()
        g = np.sum([r.subgradient for r in results], axis=0)
        Pg = S2 * g
        gPg = float(g @ Pg)
        if not np.isfinite(gPg) or gPg <= 0:
            log.warning("zero subgradient at V=%.3g; stopping", V)
            break
        gamma = V / gPg
        accepted = None
        for _ in range(max_halvings):
            trial = project(alpha - gamma * Pg)
            if np.all(trial == alpha):
                break
            Vt = _total(ev(trial, gradient="none"))
            if Vt <= V - armijo * gamma * gPg:
                accepted = (trial, Vt)
                break
            gamma *= 0.5
        if accepted is None:
            log.warning("line search failed at iteration %d (V=%.3g)", state.iteration, V)
            break
        trial, Vt = accepted
        if monitor_convexity:
            Vm = _total(ev(0.5 * (alpha + trial), gradient="none"))
            if Vm > 0.5 * (V + Vt) + 1e-6:
                convexity_violations.append({"iteration": state.iteration, "mid": Vm,
                                             "ends": [V, Vt]})
                log.warning("midpoint convexity violated at iteration %d: %.3g > %.3g",
                            state.iteration, Vm, 0.5 * (V + Vt))
        alpha = trial
        results = ev(alpha)
        V = _total(results)
        state.iteration += 1
        state.step = gamma
        state.V_history.append(V)
        steps.append(gamma)
        iter_times.append(time.perf_counter() - t_it)
        log.debug("iteration %d: V=%.6g step=%.3g", state.iteration, V, gamma)
    ev.close()
    state.alpha = ContractParams(layout, alpha)
    success = V <= tol
    report = {
        "V_history": state.V_history,
        "iterations": state.iteration,
        "success": bool(success),
        "per_subsystem_defects": [r.to_json() for r in results],
        "wall_times": {"build": build_time, "total": time.perf_counter() - t_start,
                       "per_iteration": iter_times, "lp_per_subsystem": ev.lp_time.tolist(),
                       "lp_per_evaluation": ev.call_times,
                       "lp_min_per_subsystem": [min(ts) for ts in ev.grad_times]},
        "evaluations": ev.calls,
        "steps": steps,
        "convexity_violations": convexity_violations,
        "lp_shapes": [list(lp.shape) for lp in lps],
    }
    ctrl = _merge([r.controllers for r in results])
    return DistributedResult(bool(success), state.alpha, ctrl if success else None,
                             Tube.from_controllers(ctrl) if success else None, report, results)

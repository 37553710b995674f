"""Parametric assume-guarantee contracts and disturbance-feedback tubes.

Subsystem ``i`` promises its neighbors that its state and input stay in the
template sets::

    X_i(t, alpha) = Z(cx_i(t), Gx_i diag(ax_i(t)))
    U_i(t, alpha) = Z(cu_i(t), Gu_i diag(au_i(t)))

and in exchange assumes the coupling disturbance
``W_i(t) = (+)_j A_ij X_j(t) (+) B_ij U_j(t) (+) W_i(t)``. Its controller is
``u = ubar_t + M_t zeta`` with tube ``Omega_i(t) = Z(xbar_t, T_t)`` where::

    T_{t+1} = [A_ii T_t + B_ii M_t, G^w_i(t)],    xbar_{t+1} = A_ii xbar_t + B_ii ubar_t + d^w_i(t)

All contract parameters enter the constraints linearly (template column
scales are absorbed into the containment certificate), so they can be model
variables: free in the centralized LP, pinned to given values otherwise.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import stl
from .network import Network
from .opt import AffExpr, OptModel, SolverOptions, Status, concatenate, hstack, solve_lp
from .opt.expr import value_of
from .sets import HPolytope, Zonotope, encode_zono_in_polytope, encode_zono_in_zono
from .stl_milp import ActiveSet, NominalPlan, TubeView, build_containment_constraints

log = logging.getLogger(__name__)

FIELDS = ("cx", "ax", "cu", "au")


class SynthesisInfeasible(RuntimeError):
    def __init__(self, message: str, diagnosis: Optional[dict] = None):
        super().__init__(message)
        self.diagnosis = diagnosis or {}


# ---------------------------------------------------------------------------
# templates and parameters


@dataclass
class ParamTemplate:
    """Fixed generator directions of the contract sets, one pair per subsystem."""

    Gx: list
    Gu: list

    def __post_init__(self):
        self.Gx = [np.asarray(g, float).reshape(len(g), -1) for g in self.Gx]
        self.Gu = [np.asarray(g, float).reshape(len(g), -1) for g in self.Gu]
        for g in self.Gx + self.Gu:
            if g.shape[1] and np.any(np.all(g == 0, axis=0)):
                raise ValueError("template generator matrices must not contain zero columns")

    @classmethod
    def boxes(cls, rx: list, ru: list) -> "ParamTemplate":
        return cls([np.diag(np.asarray(r, float)) for r in rx],
                   [np.diag(np.asarray(r, float)) for r in ru])

    def to_json(self) -> dict:
        return {"Gx": [g.tolist() for g in self.Gx], "Gu": [g.tolist() for g in self.Gu]}

    @classmethod
    def from_json(cls, d: dict) -> "ParamTemplate":
        return cls([np.asarray(g, float) for g in d["Gx"]], [np.asarray(g, float) for g in d["Gu"]])


class ParamLayout:
    """Position of every contract parameter in the flat ``alpha^ext`` vector."""

    def __init__(self, net: Network, templates: ParamTemplate):
        h = net.horizon
        self.horizon = h
        self.shapes = {}
        self.offsets = {}
        off = 0
        for i, s in enumerate(net.subsystems):
            shapes = {"cx": (h + 1, s.n), "ax": (h + 1, templates.Gx[i].shape[1]),
                      "cu": (h, s.m), "au": (h, templates.Gu[i].shape[1])}
            for fld in FIELDS:
                self.shapes[i, fld] = shapes[fld]
                self.offsets[i, fld] = off
                off += int(np.prod(shapes[fld]))
        self.size = off
        self.eta = net.eta

    def slice(self, i: int, fld: str) -> slice:
        o = self.offsets[i, fld]
        return slice(o, o + int(np.prod(self.shapes[i, fld])))

    def indices(self, subsystems) -> np.ndarray:
        return np.concatenate([np.arange(self.size)[self.slice(i, f)]
                               for i in subsystems for f in FIELDS])

    def scale_mask(self) -> np.ndarray:
        """``True`` on template scale coordinates (``ax``, ``au``)."""
        mask = np.zeros(self.size, bool)
        for i in range(self.eta):
            mask[self.slice(i, "ax")] = True
            mask[self.slice(i, "au")] = True
        return mask


class ContractParams:
    """Numeric ``alpha^ext``: centers and template scales for every (i, t)."""

    def __init__(self, layout: ParamLayout, vec=None):
        self.layout = layout
        self.vec = np.zeros(layout.size) if vec is None else np.asarray(vec, float).copy()

    def get(self, i: int, fld: str) -> np.ndarray:
        return self.vec[self.layout.slice(i, fld)].reshape(self.layout.shapes[i, fld])

    def set(self, i: int, fld: str, value) -> None:
        self.vec[self.layout.slice(i, fld)] = np.broadcast_to(
            np.asarray(value, float), self.layout.shapes[i, fld]).reshape(-1)

    def copy(self) -> "ContractParams":
        return ContractParams(self.layout, self.vec)

    def to_json(self) -> list:
        out = []
        for i in range(self.layout.eta):
            out.append({f: self.get(i, f).tolist() for f in FIELDS})
        return out

    @classmethod
    def from_json(cls, layout: ParamLayout, data: list) -> "ContractParams":
        p = cls(layout)
        for i, d in enumerate(data):
            for f in FIELDS:
                p.set(i, f, np.asarray(d[f], float).reshape(layout.shapes[i, f]))
        return p


def warm_start(layout: ParamLayout, plan: Optional[NominalPlan] = None,
               scale: float = 1.0) -> ContractParams:
    """Centers from the nominal plan (zeros without one), all scales ``scale``."""
    p = ContractParams(layout)
    for i in range(layout.eta):
        p.set(i, "ax", scale)
        p.set(i, "au", scale)
        if plan is not None:
            p.set(i, "cx", plan.states[i])
            p.set(i, "cu", plan.inputs[i])
    return p


class ParamVars:
    """Contract parameters as model variables.

    With ``pinned`` values every variable gets an equality row ``var == value``;
    the duals of those rows are the sensitivities of the optimal value.
    """

    def __init__(self, m: OptModel, layout: ParamLayout, subsystems, pinned=None,
                 name: str = "alpha"):
        self.layout = layout
        self.vars = {}
        self.pins = []  # (Constraints, global index array)
        for i in subsystems:
            for fld in FIELDS:
                shape = layout.shapes[i, fld]
                lb = 0.0 if fld in ("ax", "au") and pinned is None else -np.inf
                v = m.add_vars(shape, lb=lb, name=f"{name}_{fld}{i}")
                self.vars[i, fld] = v
                if pinned is not None:
                    h = m.add_constraints(v, "==", pinned.get(i, fld), name=f"pin_{fld}{i}")
                    self.pins.append((h, np.arange(layout.size)[layout.slice(i, fld)]))

    def get(self, i: int, fld: str):
        return self.vars[i, fld]

    def values(self, x) -> ContractParams:
        p = ContractParams(self.layout)
        for (i, fld), v in self.vars.items():
            p.set(i, fld, v.value(x))
        return p


def contract_sets(i: int, t: int, params, templates: ParamTemplate, horizon: int):
    """``(X_i(t, alpha), U_i(t, alpha) or None)`` as (template, scale, center) triples."""
    X = (templates.Gx[i], params.get(i, "ax")[t], params.get(i, "cx")[t])
    U = None
    if t < horizon:
        U = (templates.Gu[i], params.get(i, "au")[t], params.get(i, "cu")[t])
    return X, U


def _scaled(G: np.ndarray, scale, mask: np.ndarray):
    """``G[:, mask] diag(scale[mask])`` for constant or expression scales."""
    Gm = G[:, mask]
    if not Gm.shape[1]:
        return None
    s = scale[np.flatnonzero(mask)] if isinstance(scale, AffExpr) else np.asarray(scale)[mask]
    if isinstance(s, AffExpr):
        return s.reshape((1, -1)) * Gm
    return Gm * s[None, :]


def coupling_columns(i: int, t: int, net: Network, templates: ParamTemplate) -> list:
    """Structurally nonzero generator columns entering ``W_i(t)``.

    Returns ``[(kind, j, mask), ...]`` with ``kind`` in ``{"x", "u"}``.
    """
    out = []
    for j in sorted(net[i].couplings):
        c = net[i].couplings[j]
        Aij, Bij = c.A_at(t), c.B_at(t)
        if Aij is not None and templates.Gx[j].shape[1]:
            mask = np.any(Aij @ templates.Gx[j] != 0, axis=0)
            if mask.any():
                out.append(("x", j, mask))
        if Bij is not None and templates.Gu[j].shape[1] and t < net.horizon:
            mask = np.any(Bij @ templates.Gu[j] != 0, axis=0)
            if mask.any():
                out.append(("u", j, mask))
    return out


def column_count(i: int, t: int, net: Network, templates: ParamTemplate) -> int:
    """``l_i(t)``: columns of the assumed disturbance generator at ``t``."""
    W = net[i].W_at(t)
    l = int(np.any(W.generators != 0, axis=0).sum()) if W.order else 0
    for _, _, mask in coupling_columns(i, t, net, templates):
        l += int(mask.sum())
    return l


def assumed_disturbance(i: int, t: int, params, net: Network, templates: ParamTemplate) -> Zonotope:
    """``W_i(t) = (+)_j A_ij X_j(t, alpha) (+) B_ij U_j(t, alpha) (+) W_i(t)``.

    ``params`` may be numeric (:class:`ContractParams`) or model variables
    (:class:`ParamVars`); structurally zero columns are dropped.
    """
    s = net[i]
    W = s.W_at(t)
    center = W.center
    gens = []
    for j in sorted(s.couplings):
        c = s.couplings[j]
        Aij, Bij = c.A_at(t), c.B_at(t)
        if Aij is not None:
            center = Aij @ params.get(j, "cx")[t] + center
        if Bij is not None and t < net.horizon:
            center = Bij @ params.get(j, "cu")[t] + center
    for kind, j, mask in coupling_columns(i, t, net, templates):
        c = s.couplings[j]
        if kind == "x":
            g = _scaled(c.A_at(t) @ templates.Gx[j], params.get(j, "ax")[t], mask)
        else:
            g = _scaled(c.B_at(t) @ templates.Gu[j], params.get(j, "au")[t], mask)
        gens.append(g)
    if W.order:
        keep = np.any(W.generators != 0, axis=0)
        if keep.any():
            gens.append(W.generators[:, keep])
    G = hstack(gens) if gens else np.zeros((s.n, 0))
    return Zonotope(center, G)


# ---------------------------------------------------------------------------
# tubes


@dataclass
class TubeVars:
    """Controller parameters of one subsystem as model expressions."""

    i: int
    xbar: list
    T: list
    ubar: list
    M: list
    Wz: list  # assumed disturbance per t
    init_rows: object = None

    def view(self, t: int) -> Optional[TubeView]:
        if t >= len(self.xbar):
            return None
        if t < len(self.ubar):
            return TubeView(self.xbar[t], self.T[t], self.ubar[t], self.M[t])
        return TubeView(self.xbar[t], self.T[t])

    def q(self) -> list:
        return [T.shape[1] for T in self.T]


def build_tube_constraints(i: int, net: Network, Wz: list, m: OptModel,
                           name: str = "tube") -> TubeVars:
    """Declare ``xbar, ubar, M`` and the tube recursion under the assumed disturbances.

    ``T_t`` is kept as an expression of the ``M`` variables and disturbance
    generators; centers are variables tied by equality rows.
    """
    s = net[i]
    h = net.horizon
    n, mu = s.n, s.m
    xbar = [m.add_vars(n, name=f"{name}{i}_xbar0")]
    init = m.add_constraints(xbar[0], "==", s.x_init, name=f"{name}{i}_init")
    T = [s.x_init_gen.copy()]
    ubar, Ms = [], []
    for t in range(h):
        A, B = s.A_at(t), s.B_at(t)
        W = Wz[t]
        q = T[t].shape[1]
        ub = m.add_vars(mu, name=f"{name}{i}_ubar{t}")
        ubar.append(ub)
        if q:
            Mt = m.add_vars((mu, q), name=f"{name}{i}_M{t}")
            prop = A @ T[t] + B @ Mt
        else:
            Mt = np.zeros((mu, 0))
            prop = np.zeros((n, 0))
        Ms.append(Mt)
        xn = m.add_vars(n, name=f"{name}{i}_xbar{t + 1}")
        m.add_constraints(xn - A @ xbar[t] - B @ ub - W.center, "==", 0.0,
                          name=f"{name}{i}_center{t}")
        xbar.append(xn)
        parts = [p for p in (prop, W.generators) if p.shape[1]]
        T.append(hstack(parts) if len(parts) > 1 else (parts[0] if parts else np.zeros((n, 0))))
    return TubeVars(i, xbar, T, ubar, Ms, list(Wz), init)


@dataclass
class Defects:
    """Per-time inflation variables of one subsystem (``None`` when hard)."""

    dx: Optional[AffExpr] = None
    du: Optional[AffExpr] = None
    dbx: Optional[AffExpr] = None
    dbu: Optional[AffExpr] = None

    def total(self):
        parts = [d.sum() for d in (self.dx, self.du, self.dbx, self.dbu) if d is not None and d.size]
        out = parts[0]
        for p in parts[1:]:
            out = out + p
        return out


def build_hard_constraints(i: int, tube: TubeVars, net: Network, m: OptModel,
                           defects: Optional[Defects] = None, name: str = "hard") -> list:
    """``Omega_i(t) ⊆ X_i(t)`` for ``t <= h`` and ``Theta_i(t) ⊆ U_i(t)`` for ``t < h``."""
    s = net[i]
    rows = []
    for t, (xb, T) in enumerate(zip(tube.xbar, tube.T)):
        d = None if defects is None or defects.dbx is None else defects.dbx[t]
        rows += encode_zono_in_polytope(Zonotope(xb, T), s.X_at(t), m, inflate=d,
                                        name=f"{name}{i}_X{t}")
    for t, (ub, M) in enumerate(zip(tube.ubar, tube.M)):
        d = None if defects is None or defects.dbu is None else defects.dbu[t]
        rows += encode_zono_in_polytope(Zonotope(ub, M), s.U_at(t), m, inflate=d,
                                        name=f"{name}{i}_U{t}")
    return rows


def build_correctness_constraints(i: int, tube: TubeVars, params, templates: ParamTemplate,
                                  m: OptModel, defects: Optional[Defects] = None,
                                  name: str = "corr") -> list:
    """``Omega_i(t) ⊆ X_i(t, alpha)`` and ``Theta_i(t) ⊆ U_i(t, alpha)``."""
    h = len(tube.ubar)
    out = []
    for t in range(len(tube.xbar)):
        (Gx, ax, cx), U = contract_sets(i, t, params, templates, h)
        d = None if defects is None or defects.dx is None else defects.dx[t]
        out.append(encode_zono_in_zono(Zonotope(tube.xbar[t], tube.T[t]), Zonotope(cx, Gx), m,
                                       inflate=d, scale=ax, name=f"{name}{i}_x{t}"))
        if U is not None:
            Gu, au, cu = U
            d = None if defects is None or defects.du is None else defects.du[t]
            out.append(encode_zono_in_zono(Zonotope(tube.ubar[t], tube.M[t]), Zonotope(cu, Gu), m,
                                           inflate=d, scale=au, name=f"{name}{i}_u{t}"))
    return out


# ---------------------------------------------------------------------------
# numeric artifacts


def _mat_value(v, x, rows: int) -> np.ndarray:
    a = np.asarray(value_of(v, x), float)
    return a.reshape(rows, -1) if a.size else np.zeros((rows, 0))


@dataclass
class ControllerParams:
    """Numeric ``(xbar, T, ubar, M)`` per subsystem and time, plus ``W_i(t)``."""

    xbar: list  # [i][t] (n,)
    T: list  # [i][t] (n, q_t)
    ubar: list  # [i][t] (m,)
    M: list  # [i][t] (m, q_t)
    Gw: list  # [i][t] (n, l_t)
    dw: list  # [i][t] (n,)
    k: list  # [i]

    @classmethod
    def from_solution(cls, tubes: list, x) -> "ControllerParams":
        xbar, T, ubar, M, Gw, dw, k = [], [], [], [], [], [], []
        for tv in tubes:
            xbar.append([value_of(v, x) for v in tv.xbar])
            T.append([_mat_value(v, x, len(xbar[-1][0])) for v in tv.T])
            ubar.append([value_of(v, x) for v in tv.ubar])
            mu = len(ubar[-1][0]) if ubar[-1] else 0
            M.append([_mat_value(v, x, mu) for v in tv.M])
            Gw.append([_mat_value(W.generators, x, W.dim) for W in tv.Wz])
            dw.append([value_of(W.center, x) for W in tv.Wz])
            k.append(int(T[-1][0].shape[1]))
        return cls(xbar, T, ubar, M, Gw, dw, k)

    @property
    def horizon(self) -> int:
        return len(self.ubar[0])

    def omega(self, i: int, t: int) -> Zonotope:
        return Zonotope(self.xbar[i][t], self.T[i][t])

    def theta(self, i: int, t: int) -> Zonotope:
        return Zonotope(self.ubar[i][t], self.M[i][t])

    def W(self, i: int, t: int) -> Zonotope:
        return Zonotope(self.dw[i][t], self.Gw[i][t])

    def to_json(self) -> list:
        out = []
        for i in range(len(self.xbar)):
            steps = []
            for t in range(len(self.xbar[i])):
                d = {"t": t, "xbar": self.xbar[i][t].tolist(), "T": self.T[i][t].tolist(),
                     "k": self.k[i]}
                if t < len(self.ubar[i]):
                    d.update({"ubar": self.ubar[i][t].tolist(), "M": self.M[i][t].tolist(),
                              "Gw": self.Gw[i][t].tolist(), "dw": self.dw[i][t].tolist()})
                steps.append(d)
            out.append(steps)
        return out

    @classmethod
    def from_json(cls, data: list) -> "ControllerParams":
        def mat(v, rows):
            a = np.asarray(v, float)
            return a.reshape(rows, -1) if a.size else np.zeros((rows, 0))

        xbar, T, ubar, M, Gw, dw, k = [], [], [], [], [], [], []
        for steps in data:
            n = len(steps[0]["xbar"])
            xbar.append([np.asarray(s["xbar"], float) for s in steps])
            T.append([mat(s["T"], n) for s in steps])
            ctl = [s for s in steps if "ubar" in s]
            ubar.append([np.asarray(s["ubar"], float) for s in ctl])
            mu = len(ctl[0]["ubar"]) if ctl else 0
            M.append([mat(s["M"], mu) for s in ctl])
            Gw.append([mat(s["Gw"], n) for s in ctl])
            dw.append([np.asarray(s["dw"], float) for s in ctl])
            k.append(int(steps[0]["k"]))
        return cls(xbar, T, ubar, M, Gw, dw, k)


@dataclass
class Tube:
    omega: list  # [i][t] Zonotope
    theta: list  # [i][t] Zonotope

    @classmethod
    def from_controllers(cls, ctrl: ControllerParams) -> "Tube":
        om = [[ctrl.omega(i, t) for t in range(len(ctrl.xbar[i]))] for i in range(len(ctrl.xbar))]
        th = [[ctrl.theta(i, t) for t in range(len(ctrl.ubar[i]))] for i in range(len(ctrl.ubar))]
        return cls(om, th)

    def to_json(self) -> list:
        out = []
        for i in range(len(self.omega)):
            steps = []
            for t, om in enumerate(self.omega[i]):
                d = {"t": t, "omega": om.to_dict()}
                if t < len(self.theta[i]):
                    d["theta"] = self.theta[i][t].to_dict()
                steps.append(d)
            out.append(steps)
        return out


# ---------------------------------------------------------------------------
# baseline templates


def baseline_templates(net: Network, options=None, floor: float = 1e-6) -> ParamTemplate:
    """Box templates from uncoupled tubes.

    Each subsystem's tube is synthesized under its own ``W_i`` only (couplings
    ignored) with minimal total generator mass; the template is the box
    spanned by the largest interval-hull radius over time, floored at
    ``floor``.
    """
    rx, ru = [], []
    opts = SolverOptions.from_dict(options or {"backend": "highs"})
    for i, s in enumerate(net.subsystems):
        m = OptModel(f"baseline{i}")
        Wz = []
        for t in range(net.horizon):
            W = s.W_at(t)
            Wz.append(W)
        tube = build_tube_constraints(i, net, Wz, m, name="base")
        build_hard_constraints(i, tube, net, m, name="bhard")
        mass = 0.0
        for G in tube.T[1:] + tube.M:
            if isinstance(G, AffExpr) and G.size:
                a = m.add_vars(G.shape, lb=0.0, name="abs")
                m.add_constraints(a - G, ">=", 0.0, name="absp")
                m.add_constraints(a + G, ">=", 0.0, name="absn")
                mass = a.sum() + mass
            elif np.size(G):
                mass = mass + float(np.abs(G).sum())
        m.set_objective(mass, "min")
        sol = solve_lp(m, opts)
        if not sol.ok:
            raise SynthesisInfeasible(f"baseline tube for subsystem {i}: {sol.status.value}")
        ctrl = ControllerParams.from_solution([tube], sol.x)
        radx = np.max([np.abs(T).sum(axis=1) for T in ctrl.T[0]], axis=0)
        radu = np.max([np.abs(M).sum(axis=1) for M in ctrl.M[0]] or [np.zeros(s.m)], axis=0)
        rx.append(np.maximum(radx, floor))
        ru.append(np.maximum(radu, floor))
    return ParamTemplate.boxes(rx, ru)


# ---------------------------------------------------------------------------
# centralized synthesis


@dataclass
class SynthesisResult:
    controllers: ControllerParams
    tube: Tube
    contracts: ContractParams
    objective: float
    status: str = "optimal"
    report: dict = field(default_factory=dict)


def _tube_lookup(tubes: dict):
    def look(i, t):
        tv = tubes.get(i)
        return None if tv is None else tv.view(t)
    return look


def _diagnose(net, plan, templates, layout, formula, rho_hat, options) -> dict:
    """Relax each constraint family with defect variables to locate the conflict."""
    from .compositional import build_potential_lp  # local import: shared LP builder

    out = {}
    params = warm_start(layout, plan)
    for i in range(net.eta):
        try:
            lp = build_potential_lp(i, net, templates, layout, formula, plan.active, rho_hat)
            res = lp.evaluate(params.vec, options)
            out[str(i)] = {"V": res.value, "families": res.family_totals()}
        except SynthesisInfeasible as e:
            out[str(i)] = {"error": str(e)}
    return out


def synth_centralized(net: Network, formula: stl.Formula, plan: NominalPlan,
                      templates: ParamTemplate, rho_hat: float = 0.0, options=None,
                      diagnose: bool = True, repeats: int = 1) -> SynthesisResult:
    """One LP over all subsystems with free contract parameters.

    Minimizes the L1 distance of tube centers to the nominal plan subject to
    the tube recursion, hard bounds, contract correctness and the robust STL
    constraints on the active predicates. ``repeats`` re-solves the compiled
    LP for timing (the reported solve time is the fastest).
    """
    t_build = time.perf_counter()
    opts = SolverOptions.from_dict(options or {"backend": "highs"})
    layout = ParamLayout(net, templates)
    m = OptModel("centralized")
    pv = ParamVars(m, layout, range(net.eta))
    tubes = {}
    for i in range(net.eta):
        Wz = [assumed_disturbance(i, t, pv, net, templates) for t in range(net.horizon)]
        tubes[i] = build_tube_constraints(i, net, Wz, m)
    for i in range(net.eta):
        build_hard_constraints(i, tubes[i], net, m)
        build_correctness_constraints(i, tubes[i], pv, templates, m)
    f = stl.normalize_negation_free(formula)
    build_containment_constraints(plan.active, f, _tube_lookup(tubes), rho_hat, m)
    dev = 0.0
    for i, tv in tubes.items():
        for t, xb in enumerate(tv.xbar[1:], start=1):
            a = m.add_vars(xb.shape, lb=0.0, name="devx")
            m.add_constraints(a - xb, ">=", -plan.states[i][t], name="devxp")
            m.add_constraints(a + xb, ">=", plan.states[i][t], name="devxn")
            dev = a.sum() + dev
        for t, ub in enumerate(tv.ubar):
            a = m.add_vars(ub.shape, lb=0.0, name="devu")
            m.add_constraints(a - ub, ">=", -plan.inputs[i][t], name="devup")
            m.add_constraints(a + ub, ">=", plan.inputs[i][t], name="devun")
            dev = a.sum() + dev
    m.set_objective(dev, "min")
    build_time = time.perf_counter() - t_build
    solve_times = []
    for _ in range(max(int(repeats), 1)):
        t0 = time.perf_counter()
        sol = solve_lp(m, opts)
        solve_times.append(time.perf_counter() - t0)
    if sol.status != Status.OPTIMAL:
        diag = _diagnose(net, plan, templates, layout, f, rho_hat, opts) if diagnose else {}
        raise SynthesisInfeasible(f"centralized LP {sol.status.value}", diag)
    ctrl = ControllerParams.from_solution([tubes[i] for i in range(net.eta)], sol.x)
    params = pv.values(sol.x)
    report = {"rows": m.num_rows, "cols": m.num_vars, "objective": float(sol.objective),
              "q": [tubes[i].q() for i in range(net.eta)], "build_time": build_time,
              "solve_time": min(solve_times)}
    return SynthesisResult(ctrl, Tube.from_controllers(ctrl), params, float(sol.objective),
                           "optimal", report)

"""Linear / mixed-binary model IR and solve results."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .expr import AffExpr, as_expr

LE, EQ, GE = -1, 0, 1
_SENSES = {"<=": LE, "==": EQ, "=": EQ, ">=": GE}
SENSE_TEXT = {LE: "<=", EQ: "=", GE: ">="}


class SolverError(RuntimeError):
    """Raised for misuse of the solver or an unrecoverable numerical failure."""


class NumericalFailure(SolverError):
    pass


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class SolverOptions:
    """Solver configuration.

    ``backend`` selects the embedded simplex/branch-and-bound (``"native"``)
    or scipy's HiGHS bindings (``"highs"``).
    """

    backend: str = "native"
    max_iters: Optional[int] = None
    node_limit: int = 1_000_000
    feas_tol: float = 1e-9
    int_tol: float = 1e-6
    time_limit: Optional[float] = None

    @classmethod
    def from_dict(cls, d: Optional[dict]) -> "SolverOptions":
        if d is None:
            return cls()
        if isinstance(d, SolverOptions):
            return d
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError("unknown solver options: %s" % sorted(unknown))
        return cls(**known)


@dataclass
class Constraints:
    """Handle to a block of rows appended by :meth:`OptModel.add_constraints`."""

    start: int
    stop: int
    name: str
    shape: tuple

    @property
    def rows(self) -> np.ndarray:
        return np.arange(self.start, self.stop)

    def dual(self, sol: "Solution") -> np.ndarray:
        if sol.duals is None:
            raise SolverError("solution carries no duals")
        return sol.duals[self.start:self.stop].reshape(self.shape)


@dataclass
class Compiled:
    """Frozen matrix form: optimize ``c @ x + c0`` s.t. ``A x (sense) b``, bounds."""

    A: sp.csr_matrix
    sense: np.ndarray
    b: np.ndarray
    c: np.ndarray
    c0: float
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    maximize: bool

    @property
    def shape(self):
        return self.A.shape

    def with_bounds(self, lb, ub) -> "Compiled":
        return Compiled(self.A, self.sense, self.b, self.c, self.c0,
                        np.asarray(lb, float), np.asarray(ub, float),
                        self.binary, self.maximize)

    def residual(self, x) -> float:
        """Largest primal infeasibility of ``x`` (rows and bounds)."""
        ax = self.A @ x
        r = np.zeros_like(ax)
        le, eq, ge = self.sense == LE, self.sense == EQ, self.sense == GE
        r[le] = np.maximum(ax[le] - self.b[le], 0)
        r[ge] = np.maximum(self.b[ge] - ax[ge], 0)
        r[eq] = np.abs(ax[eq] - self.b[eq])
        rb = np.concatenate([np.maximum(self.lb - x, 0), np.maximum(x - self.ub, 0), [0.0]])
        return float(max(r.max(initial=0.0), np.nanmax(rb)))


@dataclass
class Solution:
    status: Status
    objective: float = float("nan")
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    nodes: int = 0
    iterations: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL

    def value(self, expr):
        if self.x is None:
            raise SolverError("no primal values (status %s)" % self.status.value)
        if isinstance(expr, AffExpr):
            return expr.value(self.x)
        return np.asarray(expr, dtype=float)


class OptModel:
    """Container for variables, linear constraints and a linear objective.

    Variables are created in blocks and returned as :class:`AffExpr` arrays so
    constraints can be written with numpy-like algebra::

        m = OptModel()
        x = m.add_vars(2, lb=0)
        m.add_constraints(x.sum(), "<=", 1)
        m.set_objective(x[0] + 2 * x[1], "max")
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.binary: list[bool] = []
        self.var_names: list[str] = []
        self._rows: list[tuple] = []  # (coef csr, sense array, rhs array)
        self.row_names: list[str] = []
        self.objective: AffExpr = AffExpr.constant(0.0)
        self.maximize = False
        self.quad_objective: dict[tuple[int, int], float] = {}
        self._frozen: Optional[Compiled] = None
        self._nrows = 0

    # -- variables --------------------------------------------------------
    @property
    def num_vars(self) -> int:
        return len(self.lb)

    @property
    def num_rows(self) -> int:
        return self._nrows

    def add_vars(self, shape=(), lb=-np.inf, ub=np.inf, binary: bool = False,
                 name: str = "x") -> AffExpr:
        self._check_mutable()
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        size = int(np.prod(shape)) if shape else 1
        first = self.num_vars
        lbs = np.broadcast_to(np.asarray(lb, float), shape).reshape(-1) if size else []
        ubs = np.broadcast_to(np.asarray(ub, float), shape).reshape(-1) if size else []
        if binary:
            lbs = np.zeros(size)
            ubs = np.ones(size)
        self.lb.extend(float(v) for v in lbs)
        self.ub.extend(float(v) for v in ubs)
        self.binary.extend([binary] * size)
        grid = np.arange(size).reshape(shape) if shape else np.array([0])
        for idx in np.ndindex(*shape) if shape else [()]:
            suffix = "_".join(str(i) for i in idx)
            self.var_names.append(f"{name}_{suffix}" if suffix else name)
        del grid
        return AffExpr.variables(first, shape, self.num_vars)

    def fix(self, expr: AffExpr, value) -> None:
        """Pin variables (given as a plain variable expression) via their bounds."""
        value = np.broadcast_to(np.asarray(value, float), expr.shape).reshape(-1)
        coo = expr.coef.tocoo()
        for r, cidx, v in zip(coo.row, coo.col, coo.data):
            if v != 1.0:
                raise SolverError("fix() expects plain variables")
            self.lb[cidx] = self.ub[cidx] = float(value[r])

    # -- constraints ------------------------------------------------------
    def add_constraints(self, lhs, sense: str, rhs=0.0, name: str = "c") -> Constraints:
        """Append ``lhs (sense) rhs`` elementwise; returns a row handle."""
        self._check_mutable()
        s = _SENSES[sense]
        expr = as_expr(lhs, self.num_vars) - rhs
        if expr.nvars > self.num_vars:
            raise SolverError("expression references undeclared variables")
        coef = sp.csr_matrix(expr.coef)
        coef = sp.csr_matrix((coef.data, coef.indices, coef.indptr),
                             shape=(coef.shape[0], self.num_vars))
        n = expr.size
        self._rows.append((coef, np.full(n, s, dtype=int), -expr.const.copy()))
        start = self._nrows
        self._nrows += n
        self.row_names.extend(f"{name}_{k}" for k in range(n))
        return Constraints(start, self._nrows, name, expr.shape)

    def set_objective(self, expr, sense: str = "min") -> None:
        self._check_mutable()
        if sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        expr = as_expr(expr, self.num_vars)
        if expr.size != 1:
            expr = expr.sum()
        self.objective = expr.reshape(())
        self.maximize = sense == "max"

    def add_quadratic_objective(self, terms: dict) -> None:
        """Quadratic objective terms ``{(i, j): q}`` meaning ``q * x_i * x_j``.

        Only carried through LP-file export; the embedded solvers reject them.
        """
        self._check_mutable()
        for (i, j), q in terms.items():
            key = (min(i, j), max(i, j))
            self.quad_objective[key] = self.quad_objective.get(key, 0.0) + float(q)

    # -- freezing ---------------------------------------------------------
    def _check_mutable(self) -> None:
        if self._frozen is not None:
            raise SolverError("model is frozen")

    @property
    def frozen(self) -> bool:
        return self._frozen is not None

    def freeze(self) -> Compiled:
        if self._frozen is None:
            n = self.num_vars
            if self._rows:
                A = sp.vstack([sp.csr_matrix((c.data, c.indices, c.indptr), shape=(c.shape[0], n))
                               for c, _, _ in self._rows], format="csr")
                sense = np.concatenate([s for _, s, _ in self._rows])
                b = np.concatenate([r for _, _, r in self._rows])
            else:
                A = sp.csr_matrix((0, n))
                sense = np.zeros(0, dtype=int)
                b = np.zeros(0)
            obj = self.objective
            c = np.zeros(n)
            oc = obj.coef.tocoo()
            np.add.at(c, oc.col, oc.data)
            self._frozen = Compiled(A, sense, b, c, float(obj.const[0]),
                                    np.array(self.lb, float), np.array(self.ub, float),
                                    np.array(self.binary, bool), self.maximize)
            self._rows = [(A, sense, b)]
        return self._frozen

    @property
    def has_binaries(self) -> bool:
        return any(self.binary)

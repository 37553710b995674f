"""Signal Temporal Logic over discrete-time signals of a coupled network.

Formulas are immutable trees of frozen dataclasses. Signals are stacked
state/input trajectories, one array per subsystem. Time intervals are integer
step offsets.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Union

import numpy as np


class STLError(ValueError):
    pass


class STLSyntaxError(STLError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class HorizonError(STLError):
    pass


class NotSeparable(STLError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class VarRef:
    kind: str  # "x" (state) or "u" (input)
    subsystem: int
    component: int

    def __post_init__(self):
        if self.kind not in ("x", "u"):
            raise STLError("variable kind must be 'x' or 'u'")
        if self.subsystem < 0 or self.component < 0:
            raise STLError("negative variable index")

    def __str__(self) -> str:
        return f"{self.kind}{self.subsystem}[{self.component}]"


@dataclass(frozen=True)
class Predicate:
    """Linear predicate ``sum(coef * var) (sense) bound``."""

    terms: tuple  # ((VarRef, coef), ...)
    bound: float
    sense: str = ">="

    def __post_init__(self):
        if not self.terms:
            raise STLError("predicate needs at least one term")
        if self.sense not in (">=", "<="):
            raise STLError("predicate sense must be '>=' or '<='")
        if not all(np.isfinite(c) for _, c in self.terms) or not np.isfinite(self.bound):
            raise STLError("non-finite predicate coefficient")

    def normalized(self) -> tuple[tuple, float]:
        """``(terms, c)`` such that the predicate reads ``p(s) >= c``."""
        if self.sense == ">=":
            return self.terms, float(self.bound)
        return tuple((v, -c) for v, c in self.terms), -float(self.bound)

    def negated(self) -> "Predicate":
        return Predicate(self.terms, self.bound, "<=" if self.sense == ">=" else ">=")

    def subsystems(self) -> set:
        return {v.subsystem for v, _ in self.terms}


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise STLError("And needs at least two operands")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise STLError("Or needs at least two operands")


def _check_interval(a, b):
    if int(a) != a or int(b) != b:
        raise STLError("time bounds must be integers")
    if a < 0 or b < a:
        raise STLError(f"malformed interval [{a},{b}]")


@dataclass(frozen=True)
class Always:
    a: int
    b: int
    child: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class Eventually:
    a: int
    b: int
    child: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class Until:
    a: int
    b: int
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b)


Formula = Union[Predicate, Not, And, Or, Always, Eventually, Until]


def conj(*fs) -> Formula:
    fs = tuple(fs)
    return fs[0] if len(fs) == 1 else And(fs)


def disj(*fs) -> Formula:
    fs = tuple(fs)
    return fs[0] if len(fs) == 1 else Or(fs)


def children(f: Formula) -> tuple:
    if isinstance(f, Predicate):
        return ()
    if isinstance(f, (And, Or)):
        return f.children
    if isinstance(f, Until):
        return (f.left, f.right)
    return (f.child,)


def predicates(f: Formula, path: tuple = ()) -> Iterator[tuple[tuple, Predicate]]:
    """Yield ``(path, predicate)`` for every predicate leaf, in tree order."""
    if isinstance(f, Predicate):
        yield path, f
        return
    for k, c in enumerate(children(f)):
        yield from predicates(c, path + (k,))


def subformula(f: Formula, path: Sequence[int]) -> Formula:
    for k in path:
        f = children(f)[k]
    return f


def path_str(path: Sequence[int]) -> str:
    return ".".join(str(k) for k in path)


def path_from_str(text: str) -> tuple:
    return tuple(int(k) for k in text.split(".")) if text else ()


# ---------------------------------------------------------------------------
# signature / trajectories


@dataclass(frozen=True)
class Signature:
    """State and input dimension of every subsystem."""

    state_dims: tuple
    input_dims: tuple

    def check(self, v: VarRef) -> None:
        dims = self.state_dims if v.kind == "x" else self.input_dims
        if v.subsystem >= len(dims) or v.component >= dims[v.subsystem]:
            raise STLError(f"unknown variable {v}")


def _as_rows(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return a.reshape(len(a), a.shape[1] if a.ndim > 1 else 0)
    return a.reshape(len(a), -1)


class Trajectory:
    """Stacked signal ``s(t) = (x(t), u(t))`` split per subsystem.

    ``states[i]`` has shape ``(h + 1, n_i)``; ``inputs[i]`` has shape
    ``(T_u, m_i)`` with ``T_u`` usually ``h`` (no input at the final step).
    """

    def __init__(self, states: Sequence, inputs: Sequence = ()):
        self.states = [_as_rows(s) for s in states]
        self.inputs = [_as_rows(u) for u in inputs]
        for s in self.states:
            s.setflags(write=False)
        for u in self.inputs:
            u.setflags(write=False)
        lengths = {s.shape[0] for s in self.states}
        if len(lengths) > 1:
            raise STLError("subsystem trajectories have different lengths")

    @property
    def horizon(self) -> int:
        return self.states[0].shape[0] - 1 if self.states else -1

    def component(self, v: VarRef, times: np.ndarray) -> np.ndarray:
        arrs = self.states if v.kind == "x" else self.inputs
        if v.subsystem >= len(arrs):
            raise STLError(f"trajectory has no subsystem for {v}")
        arr = arrs[v.subsystem]
        if times.size and times.max() >= arr.shape[0]:
            raise HorizonError(f"{v} read at t={times.max()} beyond recorded length {arr.shape[0]}")
        return arr[times, v.component]

    def predicate_value(self, p: Predicate, times) -> np.ndarray:
        """``p(s(t)) - c`` in the normalized ``>=`` orientation."""
        times = np.atleast_1d(np.asarray(times, dtype=int))
        terms, c = p.normalized()
        out = np.full(times.shape, -c)
        for v, coef in terms:
            out = out + coef * self.component(v, times)
        return out


# ---------------------------------------------------------------------------
# parsing / printing

_TOKEN = re.compile(
    r"\s*(?:(?P<var>[xu]\s*\d+\s*\[\s*\d+\s*\])"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<op><=|>=|[<>GFU\[\],()&|!+\-*]))"
)


def _tokenize(text: str):
    toks, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise STLSyntaxError(f"unexpected character {text[pos:].strip()[:1]!r}",
                                 pos + len(text[pos:]) - len(text[pos:].lstrip()))
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, signature: Optional[Signature]):
        self.toks = _tokenize(text)
        self.k = 0
        self.sig = signature

    def peek(self):
        return self.toks[self.k]

    def take(self, value=None, kind=None):
        tok = self.toks[self.k]
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            want = value if value is not None else kind
            got = tok[1] or "end of input"
            raise STLSyntaxError(f"expected {want!r}, found {got!r}", tok[2])
        self.k += 1
        return tok

    def formula(self):
        f = self.disjunction()
        if self.peek()[0] != "end":
            tok = self.peek()
            raise STLSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return f

    def disjunction(self):
        items = [self.conjunction()]
        while self.peek()[1] == "|":
            self.take("|")
            items.append(self.conjunction())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conjunction(self):
        items = [self.until()]
        while self.peek()[1] == "&":
            self.take("&")
            items.append(self.until())
        return items[0] if len(items) == 1 else And(tuple(items))

    def until(self):
        left = self.prefix()
        if self.peek()[1] == "U":
            self.take("U")
            a, b = self.interval()
            right = self.until()
            return Until(a, b, left, right)
        return left

    def interval(self):
        tok = self.take("[")
        a = self.integer()
        self.take(",")
        b = self.integer()
        self.take("]")
        if b < a:
            raise STLSyntaxError(f"malformed interval [{a},{b}]", tok[2])
        return a, b

    def integer(self) -> int:
        neg = False
        if self.peek()[1] == "-":
            neg = True
            self.take("-")
        tok = self.take(kind="num")
        if neg:
            raise STLSyntaxError("negative time bound", tok[2])
        try:
            return int(tok[1])
        except ValueError:
            raise STLSyntaxError(f"time bound {tok[1]} is not an integer", tok[2]) from None

    def prefix(self):
        tok = self.peek()
        if tok[1] in ("G", "F"):
            self.take()
            a, b = self.interval()
            child = self.prefix()
            return Always(a, b, child) if tok[1] == "G" else Eventually(a, b, child)
        if tok[1] == "!":
            self.take()
            return Not(self.prefix())
        if tok[1] == "(":
            self.take("(")
            f = self.disjunction()
            self.take(")")
            return f
        return self.atom()

    def signed_number(self) -> float:
        sign = 1.0
        while self.peek()[1] in ("+", "-"):
            if self.take()[1] == "-":
                sign = -sign
        return sign * float(self.take(kind="num")[1])

    def term(self, sign: float):
        coef = 1.0
        if self.peek()[0] == "num" or (self.peek()[1] in "+-" and self.peek()[1]):
            coef = self.signed_number()
            self.take("*")
        tok = self.take(kind="var")
        m = re.fullmatch(r"([xu])\s*(\d+)\s*\[\s*(\d+)\s*\]", tok[1])
        v = VarRef(m.group(1), int(m.group(2)), int(m.group(3)))
        if self.sig is not None:
            try:
                self.sig.check(v)
            except STLError as e:
                raise STLSyntaxError(str(e), tok[2]) from None
        return v, sign * coef

    def atom(self):
        tok = self.peek()
        if tok[0] not in ("var", "num") and tok[1] not in ("+", "-"):
            raise STLSyntaxError(f"expected a predicate, found {tok[1] or 'end of input'!r}", tok[2])
        sign = 1.0
        if tok[1] == "-":
            self.take()
            sign = -1.0
        elif tok[1] == "+":
            self.take()
        terms = [self.term(sign)]
        while self.peek()[1] in ("+", "-"):
            sign = 1.0 if self.take()[1] == "+" else -1.0
            terms.append(self.term(sign))
        cmp = self.peek()
        if cmp[1] not in ("<=", ">=", "<", ">"):
            raise STLSyntaxError(f"expected comparison, found {cmp[1] or 'end of input'!r}", cmp[2])
        self.take()
        bound = self.signed_number()
        sense = "<=" if cmp[1] in ("<=", "<") else ">="
        return Predicate(tuple(terms), bound, sense)


def parse_formula(text: str, signature: Optional[Signature] = None) -> Formula:
    """Parse the concrete STL syntax, e.g. ``"F[0,8] (x0[0] <= 0.01)"``.

    Strict comparisons are read as their non-strict counterparts.
    """
    try:
        return _Parser(text, signature).formula()
    except STLSyntaxError:
        raise
    except STLError as e:
        raise STLSyntaxError(str(e), 0) from None


def _num(v: float) -> str:
    return repr(float(v))


def _wrap(f: Formula) -> str:
    s = format_formula(f)
    return f"({s})" if isinstance(f, (And, Or, Until)) else s


def format_formula(f: Formula) -> str:
    """Print ``f`` so that :func:`parse_formula` reconstructs the same tree."""
    if isinstance(f, Predicate):
        parts = []
        for k, (v, c) in enumerate(f.terms):
            mag = abs(c)
            body = str(v) if mag == 1.0 else f"{_num(mag)}*{v}"
            if k == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append(("- " if c < 0 else "+ ") + body)
        return f"({' '.join(parts)} {f.sense} {_num(f.bound)})"
    if isinstance(f, Not):
        return "!" + _wrap(f.child)
    if isinstance(f, And):
        return " & ".join(_wrap(c) for c in f.children)
    if isinstance(f, Or):
        return " | ".join(_wrap(c) for c in f.children)
    if isinstance(f, Always):
        return f"G[{f.a},{f.b}] " + _wrap(f.child)
    if isinstance(f, Eventually):
        return f"F[{f.a},{f.b}] " + _wrap(f.child)
    if isinstance(f, Until):
        return f"{_wrap(f.left)} U[{f.a},{f.b}] {_wrap(f.right)}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# structural operations


def normalize_negation_free(f: Formula, negate: bool = False) -> Formula:
    """Push negations down to predicates.

    Negated Until has no negation-free dual operator with the same interval,
    so it is expanded over its (finite) window::

        !(a U[l,r] b)  ==  AND_{k=l..r} ( F[k,k] !b  |  F[0,k] !a )
    """
    if isinstance(f, Predicate):
        return f.negated() if negate else f
    if isinstance(f, Not):
        return normalize_negation_free(f.child, not negate)
    if isinstance(f, (And, Or)):
        kids = tuple(normalize_negation_free(c, negate) for c in f.children)
        flip = isinstance(f, And) == negate  # And under negation becomes Or
        return Or(kids) if flip else And(kids)
    if isinstance(f, (Always, Eventually)):
        kid = normalize_negation_free(f.child, negate)
        as_always = isinstance(f, Always) != negate
        return Always(f.a, f.b, kid) if as_always else Eventually(f.a, f.b, kid)
    if isinstance(f, Until):
        if not negate:
            return Until(f.a, f.b, normalize_negation_free(f.left), normalize_negation_free(f.right))
        nl = normalize_negation_free(f.left, True)
        nr = normalize_negation_free(f.right, True)
        parts = tuple(disj(Eventually(k, k, nr), Eventually(0, k, nl)) for k in range(f.a, f.b + 1))
        return conj(*parts)
    raise TypeError(f"not a formula: {f!r}")


def is_negation_free(f: Formula) -> bool:
    if isinstance(f, Not):
        return False
    return all(is_negation_free(c) for c in children(f))


def horizon(f: Formula) -> int:
    if isinstance(f, Predicate):
        return 0
    if isinstance(f, Not):
        return horizon(f.child)
    if isinstance(f, (And, Or)):
        return max(horizon(c) for c in f.children)
    if isinstance(f, (Always, Eventually)):
        return f.b + horizon(f.child)
    if isinstance(f, Until):
        return f.b + max(horizon(f.left), horizon(f.right))
    raise TypeError(f"not a formula: {f!r}")


def input_horizon(f: Formula) -> int:
    """Latest time offset at which an input variable is read, or -1."""
    if isinstance(f, Predicate):
        return 0 if any(v.kind == "u" for v, _ in f.terms) else -1
    if isinstance(f, (Not, And, Or)):
        return max(input_horizon(c) for c in children(f))
    if isinstance(f, (Always, Eventually)):
        h = input_horizon(f.child)
        return -1 if h < 0 else f.b + h
    h = max(input_horizon(f.left), input_horizon(f.right))
    return -1 if h < 0 else f.b + h


def subsystems_of(f: Formula) -> set:
    out = set()
    for _, p in predicates(f):
        out |= p.subsystems()
    return out


def _flatten_and(f: Formula) -> list:
    if isinstance(f, And):
        out = []
        for c in f.children:
            out.extend(_flatten_and(c))
        return out
    return [f]


def split_separable(f: Formula, n_subsystems: int) -> list:
    """Split ``f = f_1 & ... & f_k`` into one formula per subsystem.

    Entry ``i`` of the result is the conjunction of all conjuncts that only
    reference subsystem ``i`` (``None`` if there are none).
    """
    if not is_negation_free(f):
        raise STLError("split_separable expects a negation-free formula")
    groups: dict[int, list] = {}
    for c in _flatten_and(f):
        subs = subsystems_of(c)
        if len(subs) != 1:
            raise NotSeparable(f"conjunct {format_formula(c)} references subsystems {sorted(subs)}")
        i = subs.pop()
        if i >= n_subsystems:
            raise STLError(f"conjunct references subsystem {i} of {n_subsystems}")
        groups.setdefault(i, []).append(c)
    return [conj(*groups[i]) if i in groups else None for i in range(n_subsystems)]


# ---------------------------------------------------------------------------
# quantitative and Boolean semantics


def _rob(f: Formula, s: Trajectory, t0: int, count: int) -> np.ndarray:
    """Robustness of ``f`` at times ``t0 .. t0+count-1``."""
    if isinstance(f, Predicate):
        return s.predicate_value(f, np.arange(t0, t0 + count))
    if isinstance(f, And):
        return np.min([_rob(c, s, t0, count) for c in f.children], axis=0)
    if isinstance(f, Or):
        return np.max([_rob(c, s, t0, count) for c in f.children], axis=0)
    if isinstance(f, (Always, Eventually)):
        w = f.b - f.a + 1
        inner = _rob(f.child, s, t0 + f.a, count + w - 1)
        windows = np.lib.stride_tricks.sliding_window_view(inner, w)
        return windows.min(axis=1) if isinstance(f, Always) else windows.max(axis=1)
    if isinstance(f, Until):
        right = _rob(f.right, s, t0 + f.a, count + f.b - f.a)
        left = _rob(f.left, s, t0, count + f.b)
        out = np.empty(count)
        for k in range(count):
            prefix = np.minimum.accumulate(left[k:k + f.b + 1])
            cand = np.minimum(right[k:k + f.b - f.a + 1], prefix[f.a:f.b + 1])
            out[k] = cand.max()
        return out
    if isinstance(f, Not):
        raise STLError("robustness expects a negation-free formula; normalize first")
    raise TypeError(f"not a formula: {f!r}")


def robustness(f: Formula, s: Trajectory, t: int = 0) -> float:
    """Quantitative robustness ``rho(s, f, t)``; positive means satisfied."""
    if t + horizon(f) > s.horizon:
        raise HorizonError(f"formula needs t + hrz = {t + horizon(f)} steps, trajectory has {s.horizon}")
    return float(_rob(f, s, t, 1)[0])


def satisfies(f: Formula, s: Trajectory, t: int = 0) -> bool:
    """Boolean satisfaction ``(s, t) |= f`` (negation allowed)."""
    if isinstance(f, Predicate):
        return bool(s.predicate_value(f, [t])[0] >= 0)
    if isinstance(f, Not):
        return not satisfies(f.child, s, t)
    if isinstance(f, And):
        return all(satisfies(c, s, t) for c in f.children)
    if isinstance(f, Or):
        return any(satisfies(c, s, t) for c in f.children)
    if isinstance(f, Always):
        return all(satisfies(f.child, s, t + k) for k in range(f.a, f.b + 1))
    if isinstance(f, Eventually):
        return any(satisfies(f.child, s, t + k) for k in range(f.a, f.b + 1))
    if isinstance(f, Until):
        return any(satisfies(f.right, s, t + k) and
                   all(satisfies(f.left, s, t + j) for j in range(0, k + 1))
                   for k in range(f.a, f.b + 1))
    raise TypeError(f"not a formula: {f!r}")

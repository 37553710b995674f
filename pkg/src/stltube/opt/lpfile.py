"""CPLEX-style LP text format: export and a matching reader."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .model import EQ, GE, LE, SENSE_TEXT, OptModel

_BAD = re.compile(r"[^A-Za-z0-9_.]")


def _names(m: OptModel) -> list[str]:
    seen = set()
    out = []
    for k, name in enumerate(m.var_names):
        s = _BAD.sub("_", name)
        if not s or s[0].isdigit() or s[0] == ".":
            s = "v" + s
        if s in seen:
            s = f"{s}__{k}"
        seen.add(s)
        out.append(s)
    return out


def _num(v: float) -> str:
    return repr(float(v))


def _linear(coefs, cols, names) -> str:
    parts = []
    for v, j in zip(coefs, cols):
        if v == 0:
            continue
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_num(abs(v))} {names[j]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def write_lp(m: OptModel, path) -> None:
    """Write ``m`` in LP format (objective, constraints, bounds, binaries)."""
    P = m.freeze()
    names = _names(m)
    lines = [f"\\ {m.name}", "Maximize" if P.maximize else "Minimize"]
    cols = np.flatnonzero(P.c)
    obj = " obj: " + _linear(P.c[cols], cols, names)
    if P.c0 != 0:
        obj += (" + " if P.c0 > 0 else " - ") + _num(abs(P.c0))
    if m.quad_objective:
        q = []
        for (i, j), v in sorted(m.quad_objective.items()):
            term = f"{names[i]} ^2" if i == j else f"{names[i]} * {names[j]}"
            q.append(("- " if v < 0 else "+ ") + _num(2 * abs(v)) + " " + term)
        obj += " + [ " + " ".join(q).lstrip("+ ") + " ] / 2"
    lines += [obj, "Subject To"]
    A = P.A.tocsr()
    for r in range(A.shape[0]):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        expr = _linear(A.data[lo:hi], A.indices[lo:hi], names)
        lines.append(f" {_BAD.sub('_', m.row_names[r])}: {expr} {SENSE_TEXT[P.sense[r]]} {_num(P.b[r])}")
    lines.append("Bounds")
    for j, name in enumerate(names):
        if P.binary[j]:
            continue
        lo, hi = P.lb[j], P.ub[j]
        if lo == -np.inf and hi == np.inf:
            lines.append(f" {name} free")
        elif lo == hi:
            lines.append(f" {name} = {_num(lo)}")
        else:
            left = "-inf" if lo == -np.inf else _num(lo)
            right = "+inf" if hi == np.inf else _num(hi)
            lines.append(f" {left} <= {name} <= {right}")
    binaries = [names[j] for j in np.flatnonzero(P.binary)]
    if binaries:
        lines.append("Binaries")
        lines += [" " + b for b in binaries]
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")


export_lp_file = write_lp

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
                    r"|(?P<name>[A-Za-z_][A-Za-z0-9_.]*)|(?P<op>[+-]))")


def _parse_linear(text: str):
    """Parse ``c1 x1 - c2 x2 + k`` into ``([(coef, name), ...], constant)``."""
    terms, const = [], 0.0
    sign, coef = 1.0, None
    pos, text = 0, text.strip()
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if mt is None or mt.end() == pos:
            raise ValueError("cannot parse LP expression near %r" % text[pos:pos + 20])
        pos = mt.end()
        if mt.group("op"):
            if coef is not None:
                const += sign * coef
                coef = None
                sign = 1.0
            sign = -sign if mt.group("op") == "-" else sign
        elif mt.group("num"):
            coef = float(mt.group("num"))
        else:
            terms.append((sign * (1.0 if coef is None else coef), mt.group("name")))
            sign, coef = 1.0, None
    if coef is not None:
        const += sign * coef
    return terms, const


def read_lp(path) -> dict:
    """Parse a file written by :func:`write_lp` into plain Python structures.

    Returns a dict with ``sense``, ``objective`` (``{name: coef}``),
    ``objective_constant``, ``constraints`` (list of ``(name, {var: coef},
    sense, rhs)``), ``bounds`` (``{name: (lo, hi)}``) and ``binaries``.
    """
    section = None
    out = {"sense": None, "objective": {}, "objective_constant": 0.0,
           "constraints": [], "bounds": {}, "binaries": [], "quadratic": ""}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("maximize", "minimize"):
            out["sense"] = "max" if low == "maximize" else "min"
            section = "obj"
            continue
        if low == "subject to":
            section = "st"
            continue
        if low in ("bounds", "binaries", "end"):
            section = low
            continue
        if section == "obj":
            body = line.split(":", 1)[1]
            if "[" in body:
                body, quad = body.split("[", 1)
                out["quadratic"] = "[" + quad
                body = body.rstrip().rstrip("+").rstrip()
            terms, const = _parse_linear(body)
            for v, n in terms:
                if v != 0:
                    out["objective"][n] = out["objective"].get(n, 0.0) + v
            out["objective_constant"] = const
        elif section == "st":
            name, body = line.split(":", 1)
            mm = re.match(r"(.*?)(<=|>=|=)\s*(\S+)$", body.strip())
            terms, _ = _parse_linear(mm.group(1))
            sense = {"<=": LE, ">=": GE, "=": EQ}[mm.group(2)]
            out["constraints"].append((name.strip(), {n: v for v, n in terms if v != 0}, sense,
                                       float(mm.group(3))))
        elif section == "bounds":
            parts = line.split()
            if len(parts) == 2 and parts[1] == "free":
                out["bounds"][parts[0]] = (-np.inf, np.inf)
            elif len(parts) == 3 and parts[1] == "=":
                v = float(parts[2])
                out["bounds"][parts[0]] = (v, v)
            else:
                lo = float(parts[0].replace("+inf", "inf"))
                hi = float(parts[4].replace("+inf", "inf"))
                out["bounds"][parts[2]] = (lo, hi)
        elif section == "binaries":
            out["binaries"].append(line)
    return out


def model_terms(m: OptModel) -> dict:
    """The same structure as :func:`read_lp`, taken directly from a model."""
    P = m.freeze()
    names = _names(m)
    A = P.A.tocsr()
    cons = []
    for r in range(A.shape[0]):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        terms = {names[j]: float(v) for j, v in zip(A.indices[lo:hi], A.data[lo:hi]) if v != 0}
        cons.append((_BAD.sub("_", m.row_names[r]), terms, int(P.sense[r]), float(P.b[r])))
    bounds = {names[j]: (float(P.lb[j]), float(P.ub[j]))
              for j in range(len(names)) if not P.binary[j]}
    return {
        "sense": "max" if P.maximize else "min",
        "objective": {names[j]: float(P.c[j]) for j in np.flatnonzero(P.c)},
        "objective_constant": float(P.c0),
        "constraints": cons,
        "bounds": bounds,
        "binaries": [names[j] for j in np.flatnonzero(P.binary)],
    }

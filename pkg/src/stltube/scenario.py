"""Scenario files: network, specification, solver and pipeline settings.

A scenario is a JSON object::

    {
      "network": {"power_ring": {"n_areas": 5, "params": {...}, "x_init": [0.1, 0.1]}},
      "spec_template": "F[0,6] G[0,2] (x{i}[0] >= 0.14 & ...) & F[0,8] (...)",
      "horizon": 9, "start": 1,
      "mode": "distributed", "seed": 0,
      "solver": {"backend": "highs"}, "templates": "baseline"
    }

``network`` may instead list subsystems inline (matrices as nested lists,
sets as ``{"lower", "upper"}`` boxes or ``{"H", "h"}`` / ``{"center",
"generators"}`` dicts). ``spec`` gives the formula verbatim;
``spec_template`` is instantiated for every subsystem with ``{i}`` and the
copies are conjoined.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import stl
from .contracts import ParamTemplate
from .network import Coupling, Network, PowerAreaParams, Subsystem, build_power_ring, validate
from .sets import HPolytope, Zonotope

MODES = ("central", "distributed")
KNOWN_KEYS = {"network", "spec", "spec_template", "horizon", "start", "mode", "seed", "solver",
              "templates", "tol", "max_iter", "rho_hat", "weights", "workers", "runs", "sampler",
              "out_dir", "bigM", "name", "subgradient"}


class ScenarioError(ValueError):
    """Schema error with a JSON pointer to the offending location."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"
        self.detail = message

    def to_json(self) -> dict:
        return {"error": "scenario", "pointer": self.pointer, "message": self.detail}


def _need(d: dict, key: str, ptr: str):
    if not isinstance(d, dict):
        raise ScenarioError("expected an object", ptr)
    if key not in d:
        raise ScenarioError(f"missing required key {key!r}", ptr)
    return d[key]


def _array(v, ptr: str, ndim: Optional[int] = None) -> np.ndarray:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError("expected a numeric array", ptr) from None
    if ndim is not None and a.ndim != ndim:
        raise ScenarioError(f"expected a {ndim}-d array, got shape {a.shape}", ptr)
    if not np.all(np.isfinite(a)):
        raise ScenarioError("non-finite entries", ptr)
    return a


def _polytope(d, ptr: str) -> HPolytope:
    if not isinstance(d, dict):
        raise ScenarioError("expected a set object", ptr)
    try:
        return HPolytope.from_dict(d)
    except (KeyError, ValueError, TypeError) as e:
        raise ScenarioError(f"bad polytope: {e}", ptr) from None


def _zonotope(d, ptr: str) -> Zonotope:
    if not isinstance(d, dict):
        raise ScenarioError("expected a set object", ptr)
    try:
        return Zonotope.from_dict(d)
    except (KeyError, ValueError, TypeError) as e:
        raise ScenarioError(f"bad zonotope: {e}", ptr) from None


def _per_step(v, ptr, conv):
    if isinstance(v, list) and v and isinstance(v[0], dict):
        return [conv(x, f"{ptr}/{k}") for k, x in enumerate(v)]
    return conv(v, ptr)


def network_from_json(d: dict, horizon: int, ptr: str = "/network") -> Network:
    if not isinstance(d, dict):
        raise ScenarioError("expected an object", ptr)
    if "power_ring" in d:
        pr = d["power_ring"]
        p = f"{ptr}/power_ring"
        n = _need(pr, "n_areas", p)
        if not isinstance(n, int) or n < 3:
            raise ScenarioError("n_areas must be an integer >= 3", p + "/n_areas")
        params = pr.get("params", {})
        unknown = set(params) - set(PowerAreaParams.__dataclass_fields__)
        if unknown:
            raise ScenarioError(f"unknown parameters {sorted(unknown)}", p + "/params")
        try:
            pp = PowerAreaParams(**params)
        except ValueError as e:
            raise ScenarioError(str(e), p + "/params") from None
        x0 = _array(pr.get("x_init", [0.1, 0.1]), p + "/x_init", 1)
        return build_power_ring(n, pp, horizon, x0)
    subs_json = _need(d, "subsystems", ptr)
    if not isinstance(subs_json, list) or not subs_json:
        raise ScenarioError("expected a nonempty list", ptr + "/subsystems")
    subs = []
    for i, s in enumerate(subs_json):
        p = f"{ptr}/subsystems/{i}"
        couplings = {}
        for j, c in (s.get("couplings") or {}).items():
            cp = f"{p}/couplings/{j}"
            try:
                jj = int(j)
            except ValueError:
                raise ScenarioError("coupling keys must be subsystem indices", cp) from None
            couplings[jj] = Coupling(A=None if c.get("A") is None else _array(c["A"], cp + "/A"),
                                     B=None if c.get("B") is None else _array(c["B"], cp + "/B"))
        subs.append(Subsystem(
            A=_array(_need(s, "A", p), p + "/A"), B=_array(_need(s, "B", p), p + "/B"),
            X=_per_step(_need(s, "X", p), p + "/X", _polytope),
            U=_per_step(_need(s, "U", p), p + "/U", _polytope),
            W=_per_step(_need(s, "W", p), p + "/W", _zonotope),
            x_init=_array(_need(s, "x_init", p), p + "/x_init", 1), couplings=couplings,
            name=str(s.get("name", f"s{i}")),
            x_init_gen=None if s.get("x_init_gen") is None else _array(s["x_init_gen"],
                                                                        p + "/x_init_gen")))
    net = Network(subs, horizon)
    issues = validate(net)
    if issues:
        raise ScenarioError(issues[0]["message"] + f" ({issues[0]['where']})", ptr)
    return net


@dataclass
class Scenario:
    raw: dict
    network: Network
    formula: stl.Formula
    spec_text: str
    horizon: int
    start: int = 0
    mode: str = "distributed"
    seed: int = 0
    solver: dict = field(default_factory=lambda: {"backend": "highs"})
    templates: object = "baseline"
    tol: float = 1e-6
    max_iter: int = 500
    rho_hat: float = 0.0
    weights: Optional[dict] = None
    workers: int = 1
    runs: int = 100
    sampler: str = "uniform"
    out_dir: Optional[str] = None
    bigM: Optional[float] = None
    subgradient: str = "dual"

    @property
    def hash(self) -> str:
        return scenario_hash(self.raw)

    def param_templates(self) -> Optional[ParamTemplate]:
        if isinstance(self.templates, dict):
            return ParamTemplate.from_json(self.templates)
        return None


def scenario_hash(raw: dict) -> str:
    """SHA-256 of the canonical JSON, ignoring output-only keys."""
    core = {k: v for k, v in raw.items() if k not in ("out_dir", "runs", "workers")}
    text = json.dumps(core, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def spec_text_for(raw: dict, eta: int) -> str:
    if "spec" in raw:
        if not isinstance(raw["spec"], str):
            raise ScenarioError("expected a string", "/spec")
        return raw["spec"]
    if "spec_template" in raw:
        tpl = raw["spec_template"]
        if not isinstance(tpl, str) or "{i}" not in tpl:
            raise ScenarioError("expected a string containing '{i}'", "/spec_template")
        return " & ".join("(" + tpl.replace("{i}", str(i)) + ")" for i in range(eta))
    raise ScenarioError("missing 'spec' or 'spec_template'", "/")


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object", "/")
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ScenarioError(f"unknown keys {sorted(unknown)}", "/")
    start = raw.get("start", 0)
    if not isinstance(start, int) or start < 0:
        raise ScenarioError("expected a nonnegative integer", "/start")
    # the formula may be needed to pick the horizon, which the network needs
    probe_eta = None
    net_raw = _need(raw, "network", "")
    if isinstance(net_raw, dict) and "power_ring" in net_raw:
        probe_eta = net_raw["power_ring"].get("n_areas")
    elif isinstance(net_raw, dict) and isinstance(net_raw.get("subsystems"), list):
        probe_eta = len(net_raw["subsystems"])
    if not isinstance(probe_eta, int):
        raise ScenarioError("cannot determine subsystem count", "/network")
    text = spec_text_for(raw, probe_eta)
    try:
        f = stl.parse_formula(text)
    except stl.STLSyntaxError as e:
        raise ScenarioError(str(e), "/spec" if "spec" in raw else "/spec_template") from None
    need = start + max(stl.horizon(f), stl.input_horizon(f) + 1)
    hz = raw.get("horizon", need)
    if not isinstance(hz, int) or hz < 0:
        raise ScenarioError("expected a nonnegative integer", "/horizon")
    if hz < need:
        raise ScenarioError(f"horizon {hz} shorter than start + formula horizon ({need})",
                            "/horizon")
    net = network_from_json(net_raw, hz)
    try:
        for _, p in stl.predicates(f):
            for v, _ in p.terms:
                net.signature.check(v)
    except stl.STLError as e:
        raise ScenarioError(str(e), "/spec") from None
    mode = raw.get("mode", "distributed")
    if mode not in MODES:
        raise ScenarioError(f"mode must be one of {MODES}", "/mode")
    tm = raw.get("templates", "baseline")
    if tm != "baseline" and not isinstance(tm, dict):
        raise ScenarioError("expected 'baseline' or {Gx, Gu}", "/templates")
    sc = Scenario(raw=raw, network=net, formula=f, spec_text=text, horizon=hz, start=start,
                  mode=mode, templates=tm)
    for key, typ in (("seed", int), ("tol", float), ("max_iter", int), ("rho_hat", float),
                     ("workers", int), ("runs", int), ("sampler", str), ("out_dir", str),
                     ("bigM", float), ("subgradient", str)):
        if key in raw:
            v = raw[key]
            if typ is float and isinstance(v, int):
                v = float(v)
            if not isinstance(v, typ) or isinstance(v, bool):
                raise ScenarioError(f"expected {typ.__name__}", f"/{key}")
            setattr(sc, key, v)
    if "solver" in raw:
        if not isinstance(raw["solver"], dict):
            raise ScenarioError("expected an object", "/solver")
        sc.solver = dict(raw["solver"])
    if "weights" in raw:
        sc.weights = raw["weights"]
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"file {path} does not exist", "")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}",
                            "") from None
    return scenario_from_dict(raw)


PSI1 = "(x{i}[0] >= 0.14 & x{i}[0] <= 0.26 & x{i}[1] >= -0.16 & x{i}[1] <= -0.04)"
PSI2 = "(x{i}[0] >= -0.01 & x{i}[0] <= 0.01 & x{i}[1] >= -0.01 & x{i}[1] <= 0.01)"
POWER_SPEC = f"F[0,6] G[0,2] {PSI1} & F[0,8] {PSI2}"


def power_ring_scenario(n_areas: int = 5, u_bound: float = 0.1, horizon: int = 9, start: int = 1,
                        mode: str = "distributed", seed: int = 0) -> dict:
    """Raw scenario dict for the load-frequency-control ring case study."""
    return {
        "name": f"power_ring_{n_areas}",
        "network": {"power_ring": {"n_areas": n_areas,
                                   "params": {"K_p": 110.0, "K_s": 0.5, "T_p": 25.0, "dt": 0.1,
                                              "omega_bound": 0.001, "u_bound": u_bound,
                                              "x_bound": 10.0},
                                   "x_init": [0.1, 0.1]}},
        "spec_template": POWER_SPEC,
        "horizon": horizon,
        "start": start,
        "mode": mode,
        "seed": seed,
        "solver": {"backend": "highs"},
        "templates": "baseline",
    }

"""Command line interface: ``stltube <command> [options]``.

Exit codes: 0 success, 2 nominal plan only reaches least violation
(negative optimal robustness), 1 error.
"""

from __future__ import annotations

import argparse
import csv
import gc
import json
import logging
import os
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import stl
from .network import Network, Subsystem
from .compositional import SpecDynamicsConflict, run_distributed
from .contracts import (ContractParams, ControllerParams, ParamLayout, SynthesisInfeasible, Tube,
                        baseline_templates, synth_centralized)
from .opt import SolverError, write_lp
from .runtime import SAMPLER_MODES, ContractViolation, DisturbanceSampler, read_trace, simulate, write_trace
from .scenario import Scenario, ScenarioError, load_scenario, power_ring_scenario, scenario_from_dict
from .stl_milp import EncodingError, NominalInfeasible, build_nominal_model, synth_nominal
from .svg import render_tubes, time_lift

log = logging.getLogger("stltube")

EXIT_OK, EXIT_ERROR, EXIT_LEAST_VIOLATION = 0, 1, 2


def _setup_logging() -> None:
    level = os.environ.get("STLTUBE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, default=float))


def _load(path: Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ScenarioError(f"artifact {path} not found", "") from None
    except json.JSONDecodeError as e:
        raise ScenarioError(f"malformed JSON in {path} at line {e.lineno}: {e.msg}", "") from None


# ---------------------------------------------------------------------------
# pipeline


def synthesize(sc: Scenario, out_dir, mode=None, tol=None, max_iter=None, export_lp=None,
               report: dict = None) -> int:
    """nominal MILP -> active set -> robust tube synthesis; writes artifacts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mode = mode or sc.mode
    tol = sc.tol if tol is None else tol
    max_iter = sc.max_iter if max_iter is None else max_iter
    report = {} if report is None else report
    report.update({"scenario_hash": sc.hash, "mode": mode, "status": "error",
                   "horizon": sc.horizon, "formula_horizon": stl.horizon(sc.formula),
                   "start": sc.start, "spec": sc.spec_text})
    net = sc.network
    if export_lp:
        m, _ = build_nominal_model(net, sc.formula, sc.weights, sc.bigM, start=sc.start)
        write_lp(m, export_lp)
        report["lp_file"] = str(export_lp)
    t0 = time.perf_counter()
    plan = synth_nominal(net, sc.formula, sc.weights, sc.solver, sc.bigM, start=sc.start)
    report["nominal"] = {"rho_star": plan.rho_star, "objective": plan.objective,
                         "nodes": plan.nodes, "time": time.perf_counter() - t0,
                         "active": plan.active.to_json()}
    _dump(out / "nominal.json", {"scenario_hash": sc.hash, "rho_star": plan.rho_star,
                                 "states": [s.tolist() for s in plan.states],
                                 "inputs": [u.tolist() for u in plan.inputs],
                                 "active": plan.active.to_json()})
    if plan.rho_star < 0:
        report["status"] = "least_violation"
        report["message"] = ("the specification is unsatisfiable for the nominal system; "
                             "the least-violation plan is in nominal.json")
        return EXIT_LEAST_VIOLATION
    t0 = time.perf_counter()
    templates = sc.param_templates() or baseline_templates(net, sc.solver)
    report["templates_time"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    if mode == "central":
        res = synth_centralized(net, sc.formula, plan, templates, sc.rho_hat, sc.solver)
        ctrl, tube, params = res.controllers, res.tube, res.contracts
        report["central"] = res.report
        ok = True
    else:
        res = run_distributed(net, sc.formula, plan, templates, tol=tol, max_iter=max_iter,
                              rho_hat=sc.rho_hat, options=sc.solver, gradient=sc.subgradient,
                              workers=sc.workers)
        ctrl, tube, params = res.controllers, res.tube, res.contracts
        report["distributed"] = res.report
        ok = res.success
    report["robust_time"] = time.perf_counter() - t0
    _dump(out / "contracts.json", {"scenario_hash": sc.hash, "templates": templates.to_json(),
                                   "params": params.to_json()})
    if not ok:
        report["status"] = "not_converged"
        report["message"] = f"potential did not reach tol={tol} within {max_iter} iterations"
        return EXIT_ERROR
    _dump(out / "controllers.json", {"scenario_hash": sc.hash, "start": sc.start,
                                     "controllers": ctrl.to_json()})
    _dump(out / "tube.json", {"scenario_hash": sc.hash, "tube": tube.to_json()})
    for i in range(net.eta):
        if net[i].n >= 2:
            render_tubes([tube.omega[i]], out / f"tube_{i}.svg", trajectories=[plan.states[i]],
                         title=f"subsystem {i}")
        else:
            om, tr = time_lift(tube.omega[i], plan.states[i])
            render_tubes([om], out / f"tube_{i}.svg", trajectories=[tr], title=f"subsystem {i}",
                         labels=("t", "x[0]"))
    report["status"] = "ok"
    return EXIT_OK


def _run_guarded(fn, report_path: Path, report: dict) -> int:
    try:
        code = fn()
    except ScenarioError as e:
        report.update({"status": "error", "error": e.to_json()})
        code = EXIT_ERROR
    except (SynthesisInfeasible, SpecDynamicsConflict) as e:
        report.update({"status": "error", "error": {"error": type(e).__name__, "message": str(e),
                                                    "diagnosis": e.diagnosis}})
        code = EXIT_ERROR
    except (NominalInfeasible, EncodingError, SolverError, stl.STLError, ContractViolation,
            ValueError, RuntimeError) as e:
        report.update({"status": "error", "error": {"error": type(e).__name__, "message": str(e)}})
        log.debug("%s", traceback.format_exc())
        code = EXIT_ERROR
    report["exit_code"] = code
    if report_path is not None:
        report_path.parent.mkdir(parents=True, exist_ok=True)
        _dump(report_path, report)
    return code


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    report: dict = {}
    out = Path(args.out_dir or "out")

    def go():
        sc = load_scenario(args.config)
        return synthesize(sc, args.out_dir or sc.out_dir or "out", args.mode, args.tol,
                          args.max_iter, args.export_lp, report)

    code = _run_guarded(go, None, report)
    try:
        sc_out = out if args.out_dir else Path(load_scenario(args.config).out_dir or "out")
    except ScenarioError:
        sc_out = out
    sc_out.mkdir(parents=True, exist_ok=True)
    _dump(sc_out / "report.json", report)
    print(json.dumps({"status": report.get("status"), "exit_code": code,
                      **({"error": report["error"]} if "error" in report else {})}))
    return code


def load_controllers(sc: Scenario, art: Path) -> ControllerParams:
    data = _load(art / "controllers.json")
    if data.get("scenario_hash") != sc.hash:
        raise ScenarioError("controllers.json was synthesized for a different scenario "
                            "(hash mismatch)", "/scenario_hash")
    return ControllerParams.from_json(data["controllers"])


def cmd_simulate(args) -> int:
    report: dict = {}
    art = Path(args.out_dir or "out")

    def go():
        sc = load_scenario(args.config)
        ctrl = load_controllers(sc, art)
        seed = sc.seed if args.seed is None else args.seed
        runs = sc.runs if args.runs is None else args.runs
        sampler = DisturbanceSampler(args.sampler or sc.sampler, seed)
        sim = simulate(sc.network, ctrl, sampler, runs, sc.formula, sc.start, sc.workers)
        write_trace(art / "trace.csv", sim)
        summary = sim.summary()
        summary.update({"seed": seed, "sampler": sampler.mode, "scenario_hash": sc.hash})
        report.update(summary)
        print(json.dumps(summary))
        return EXIT_OK if summary["violations"] == 0 else EXIT_ERROR

    return _run_guarded(go, art / "summary.json", report)


def cmd_monitor(args) -> int:
    try:
        text = args.spec if args.spec else Path(args.spec_file).read_text()
        f = stl.parse_formula(text)
        trajs = read_trace(args.trace)
        out = {}
        for run, tr in sorted(trajs.items()):
            out[str(run)] = {"robustness": stl.robustness(f, tr, args.start),
                             "satisfied": stl.satisfies(f, tr, args.start)}
    except (stl.STLError, ValueError, OSError, KeyError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}))
        return EXIT_ERROR
    print(json.dumps(out))
    return EXIT_OK if all(v["robustness"] >= 0 for v in out.values()) else EXIT_LEAST_VIOLATION


def symmetric_ring_plan(sc: Scenario):
    """Nominal plan for a ring of identical areas under a per-area spec template.

    With all areas on one common trajectory the couplings reduce to
    ``(sum_j A_ij) x_i``, so a single-area MILP yields a plan that is
    replicated and then re-scored on the full formula. Optimal among
    symmetric plans only.
    """
    net = sc.network
    tpl = sc.raw.get("spec_template")
    if tpl is None:
        raise ScenarioError("symmetric planning needs a spec_template", "/spec_template")
    s0 = net[0]
    A = s0.A_at(0) + sum(c.A_at(0) for c in s0.couplings.values() if c.A is not None)
    single = Network([Subsystem(A, s0.B, s0.X, s0.U, s0.W, s0.x_init)], net.horizon)
    f0 = stl.parse_formula(tpl.replace("{i}", "0"))
    p0 = synth_nominal(single, f0, sc.weights, sc.solver, sc.bigM, start=sc.start)
    states = [p0.states[0]] * net.eta
    inputs = [p0.inputs[0]] * net.eta
    return synth_nominal(net, sc.formula, sc.weights, sc.solver, sc.bigM, start=sc.start,
                         fixed=(states, inputs))


def bench(raw: dict, sizes: list, out_dir, max_iter: int = 500, tol: float = 1e-6,
          repeats: int = 3) -> list:
    """Time both robust synthesis modes for each ring size; failures are recorded.

    Only the robust (second) step is timed; the nominal plan is shared. Model
    assembly (``build_s``) is reported apart from LP solver time.
    ``per_iteration_s`` is the centralized LP solve (fastest of ``repeats``) or,
    for one distributed iteration, the sum over subsystems of the fastest
    observed local LP evaluation.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for eta in sizes:
        r = json.loads(json.dumps(raw))
        r["network"]["power_ring"]["n_areas"] = int(eta)
        try:
            sc = scenario_from_dict(r)
            plan = symmetric_ring_plan(sc)
            if plan.rho_star < 0:
                raise SynthesisInfeasible(f"nominal robustness {plan.rho_star:.3g} < 0")
            templates = sc.param_templates() or baseline_templates(sc.network, sc.solver)
        except Exception as e:  # keep benchmarking the other sizes
            for mode in ("central", "distributed"):
                rows.append({"eta": eta, "mode": mode, "status": f"failed: {e}"})
            continue
        gc.collect()  # keep earlier allocations out of the timed solves
        try:
            res = synth_centralized(sc.network, sc.formula, plan, templates, sc.rho_hat, sc.solver,
                                    diagnose=False, repeats=repeats)
            rep = res.report
            rows.append({"eta": eta, "mode": "central", "status": "ok",
                         "total_s": rep["build_time"] + rep["solve_time"],
                         "build_s": rep["build_time"], "lp_solve_s": rep["solve_time"],
                         "per_iteration_s": rep["solve_time"], "iterations": 1,
                         "lp_rows": rep["rows"], "lp_cols": rep["cols"]})
        except Exception as e:
            rows.append({"eta": eta, "mode": "central", "status": f"failed: {e}"})
        gc.collect()
        try:
            t0 = time.perf_counter()
            dres = run_distributed(sc.network, sc.formula, plan, templates, tol=tol,
                                   max_iter=max_iter, rho_hat=sc.rho_hat, options=sc.solver,
                                   monitor_convexity=False)
            dt = time.perf_counter() - t0
            rep = dres.report
            wt = rep["wall_times"]
            # one iteration solves every subsystem's potential LP once; like the
            # centralized repeats, take each LP's fastest observed solve
            per_it = float(np.sum(wt["lp_min_per_subsystem"]))
            rows.append({"eta": eta, "mode": "distributed",
                         "status": "ok" if dres.success else "not_converged",
                         "total_s": dt, "build_s": wt["build"],
                         "lp_solve_s": float(np.sum(wt["lp_per_subsystem"])),
                         "per_iteration_s": per_it, "iterations": rep["iterations"],
                         "lp_rows": rep["lp_shapes"][0][0], "lp_cols": rep["lp_shapes"][0][1]})
        except Exception as e:
            rows.append({"eta": eta, "mode": "distributed", "status": f"failed: {e}"})
    cols = ["eta", "mode", "status", "total_s", "build_s", "lp_solve_s", "per_iteration_s",
            "iterations", "lp_rows", "lp_cols"]
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in cols})
    return rows


def cmd_bench(args) -> int:
    try:
        raw = _load(Path(args.config)) if args.config else power_ring_scenario(u_bound=10.0)
        if "power_ring" not in raw.get("network", {}):
            raise ScenarioError("bench needs a power_ring scenario template", "/network")
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except (ScenarioError, ValueError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}))
        return EXIT_ERROR
    rows = bench(raw, sizes, args.out_dir or "bench", args.max_iter or 500, args.tol or 1e-6)
    for r in rows:
        print(json.dumps(r, default=float))
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_ERROR


def cmd_export_lp(args) -> int:
    try:
        sc = load_scenario(args.config)
        m, _ = build_nominal_model(sc.network, sc.formula, sc.weights, sc.bigM,
                                   quadratic=args.quadratic, start=sc.start)
        write_lp(m, args.export_lp)
    except (ScenarioError, EncodingError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}))
        return EXIT_ERROR
    print(json.dumps({"written": str(args.export_lp), "rows": m.num_rows, "cols": m.num_vars}))
    return EXIT_OK


def cmd_gen_power_ring(args) -> int:
    raw = power_ring_scenario(args.areas, args.u_bound, args.horizon, args.start,
                              args.mode or "distributed", args.seed or 0)
    text = json.dumps(raw, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stltube", description="Robust STL control synthesis for "
                                "networks of linear systems via assume-guarantee tubes.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="nominal plan + robust tubes/controllers")
    s.add_argument("--config", required=True)
    s.add_argument("--mode", choices=("central", "distributed"))
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iter", type=int)
    s.add_argument("--out-dir")
    s.add_argument("--export-lp", help="also write the nominal MILP in LP format")
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("simulate", help="Monte Carlo closed-loop validation")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", help="directory holding the synth artifacts")
    s.add_argument("--runs", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--sampler", choices=SAMPLER_MODES)
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("monitor", help="robustness of traces in a CSV file")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--spec")
    g.add_argument("--spec-file")
    s.add_argument("--trace", required=True)
    s.add_argument("--start", type=int, default=0)
    s.set_defaults(fn=cmd_monitor)

    s = sub.add_parser("bench", help="timing table over ring sizes")
    s.add_argument("--config", help="power_ring scenario template (default: |u| <= 10 ring)")
    s.add_argument("--sizes", default="4,8,12")
    s.add_argument("--out-dir")
    s.add_argument("--max-iter", type=int)
    s.add_argument("--tol", type=float)
    s.set_defaults(fn=cmd_bench)

    s = sub.add_parser("export-lp", help="write the nominal MILP in LP format")
    s.add_argument("--config", required=True)
    s.add_argument("--export-lp", required=True, metavar="PATH")
    s.add_argument("--quadratic", action="store_true", help="quadratic input cost")
    s.set_defaults(fn=cmd_export_lp)

    s = sub.add_parser("gen-power-ring", help="write a power-ring scenario")
    s.add_argument("--areas", type=int, default=5)
    s.add_argument("--u-bound", type=float, default=0.1)
    s.add_argument("--horizon", type=int, default=9)
    s.add_argument("--start", type=int, default=1)
    s.add_argument("--mode", choices=("central", "distributed"))
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_gen_power_ring)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return int(args.fn(args))


if __name__ == "__main__":
    sys.exit(main())

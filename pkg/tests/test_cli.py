import csv
import json

import pytest

from stltube.cli import EXIT_ERROR, EXIT_LEAST_VIOLATION, EXIT_OK, main
from stltube.opt import read_lp
from stltube.scenario import load_scenario, power_ring_scenario


def scalar_scenario(spec, **kw):
    sub = {"A": [[1.0]], "B": [[1.0]], "X": {"lower": [-10.0], "upper": [10.0]},
           "U": {"lower": [-1.0], "upper": [1.0]},
           "W": {"center": [0.0], "generators": [[0.05]]}, "x_init": [0.0]}
    raw = {"network": {"subsystems": [sub]}, "spec": spec, "horizon": 3, "mode": "central",
           "runs": 5, "seed": 4}
    raw.update(kw)
    return raw


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_gen_power_ring(tmp_path):
    out = tmp_path / "ring.json"
    assert main(["gen-power-ring", "--areas", "3", "--out", str(out)]) == EXIT_OK
    sc = load_scenario(out)
    assert sc.network.eta == 3 and sc.horizon == 9 and sc.start == 1
    assert json.loads(out.read_text()) == power_ring_scenario(3)


def test_malformed_json_gives_pointer(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"network": {"power_ring": {"n_areas": 3}}, ')
    assert main(["synth", "--config", str(bad), "--out-dir", str(tmp_path / "o1")]) == EXIT_ERROR
    err = last_json(capsys)["error"]
    assert err["pointer"] == "/" and "line 1" in err["message"]
    report = json.loads((tmp_path / "o1" / "report.json").read_text())
    assert report["exit_code"] == EXIT_ERROR

    raw = power_ring_scenario(3)
    raw["network"]["power_ring"]["n_areas"] = 2
    cfg = write(tmp_path / "schema.json", raw)
    assert main(["synth", "--config", cfg, "--out-dir", str(tmp_path / "o2")]) == EXIT_ERROR
    assert last_json(capsys)["error"]["pointer"] == "/network/power_ring/n_areas"


def test_unsatisfiable_spec_exits_least_violation(tmp_path, capsys):
    cfg = write(tmp_path / "s.json", scalar_scenario("F[0,2] (x0[0] >= 3)"))
    out = tmp_path / "out"
    assert main(["synth", "--config", cfg, "--out-dir", str(out)]) == EXIT_LEAST_VIOLATION
    nominal = json.loads((out / "nominal.json").read_text())
    assert nominal["rho_star"] == pytest.approx(-1.0, abs=1e-6)
    assert json.loads((out / "report.json").read_text())["status"] == "least_violation"


def test_synth_simulate_monitor_pipeline(tmp_path, capsys):
    raw = scalar_scenario("F[0,2] (x0[0] >= 1.5)")
    cfg = write(tmp_path / "s.json", raw)
    out = tmp_path / "out"
    assert main(["synth", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
    for name in ("nominal.json", "contracts.json", "controllers.json", "tube.json",
                 "report.json", "tube_0.svg"):
        assert (out / name).exists(), name
    report = json.loads((out / "report.json").read_text())
    assert report["formula_horizon"] == 2 and report["horizon"] >= 2
    assert main(["simulate", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
    first = (out / "trace.csv").read_text()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["violations"] == 0 and summary["runs"] == 5
    assert main(["simulate", "--config", cfg, "--out-dir", str(out)]) == EXIT_OK
    assert (out / "trace.csv").read_text() == first
    assert main(["monitor", "--spec", "F[0,2] (x0[0] >= 1.5)",
                 "--trace", str(out / "trace.csv")]) == EXIT_OK
    rob = last_json(capsys)
    assert len(rob) == 5 and all(v["robustness"] >= 0 for v in rob.values())

    # artifacts belong to a different scenario
    other = write(tmp_path / "o.json", dict(raw, seed=5))
    assert main(["simulate", "--config", other, "--out-dir", str(out)]) == EXIT_ERROR
    summary = json.loads((out / "summary.json").read_text())
    assert summary["error"]["pointer"] == "/scenario_hash"


def test_monitor_constant_trace(tmp_path, capsys):
    path = tmp_path / "trace.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "t", "subsystem", "x0", "x1"])
        for t in range(3):
            w.writerow([0, t, 0, 0.3, -1.0])
    spec = "G[0,2] (x0[0] <= 0.5 & x0[0] >= 0)"
    assert main(["monitor", "--spec", spec, "--trace", str(path)]) == EXIT_OK
    assert last_json(capsys)["0"]["robustness"] == pytest.approx(0.2)
    assert main(["monitor", "--spec", "F[0,2] x0[1] >= 0", "--trace", str(path)]) == EXIT_LEAST_VIOLATION
    assert last_json(capsys)["0"]["robustness"] == pytest.approx(-1.0)
    empty = tmp_path / "empty.csv"
    empty.write_text("run,t,subsystem,x0\n")
    assert main(["monitor", "--spec", spec, "--trace", str(empty)]) == EXIT_ERROR
    assert main(["monitor", "--spec", "G[0,2 (x", "--trace", str(path)]) == EXIT_ERROR


def test_export_lp(tmp_path, capsys):
    cfg = write(tmp_path / "s.json", scalar_scenario("F[0,2] (x0[0] >= 1.5)"))
    lp = tmp_path / "nominal.lp"
    assert main(["export-lp", "--config", cfg, "--export-lp", str(lp)]) == EXIT_OK
    parsed = read_lp(lp)
    assert parsed["sense"] == "max" and parsed["binaries"]
    assert main(["export-lp", "--config", cfg, "--export-lp", str(tmp_path / "q.lp"),
                 "--quadratic"]) == EXIT_OK
    assert "[" in (tmp_path / "q.lp").read_text()


def test_bench_marks_failed_sizes(tmp_path, capsys):
    cfg = write(tmp_path / "ring.json", power_ring_scenario(3, u_bound=10.0))
    out = tmp_path / "bench"
    code = main(["bench", "--config", cfg, "--sizes", "2,3", "--out-dir", str(out)])
    assert code == EXIT_ERROR  # the 2-area ring is invalid
    with open(out / "bench.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["eta"], r["mode"]) for r in rows] == [("2", "central"), ("2", "distributed"),
                                                    ("3", "central"), ("3", "distributed")]
    assert rows[0]["status"].startswith("failed")
    assert rows[2]["status"] == "ok" and rows[3]["status"] == "ok"
    assert float(rows[3]["per_iteration_s"]) > 0

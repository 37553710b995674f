import numpy as np
import pytest

from stltube.contracts import ControllerParams, synth_centralized
from stltube.network import Network, Subsystem
from stltube.runtime import (ContractViolation, DisturbanceSampler, ZetaState, advance_zeta,
                             control, initial_zeta, read_trace, simulate, simulate_run, write_trace)
from stltube.sets import HPolytope, Zonotope


def scalar_net(wrad=0.1):
    sub = Subsystem(A=np.eye(1), B=np.eye(1), X=HPolytope.box([-5], [5]), U=HPolytope.box([-2], [2]),
                    W=Zonotope([0.0], [[wrad]]), x_init=[0.0])
    return Network([sub], 2)


def deadbeat_ctrl():
    """Scalar tube: first correction cancels the first disturbance."""
    return ControllerParams(
        xbar=[[np.array([0.0]), np.array([0.5]), np.array([1.0])]],
        T=[[np.zeros((1, 0)), np.array([[0.1]]), np.array([[0.0, 0.1]])]],
        ubar=[[np.array([0.5]), np.array([0.5])]],
        M=[[np.zeros((1, 0)), np.array([[-0.1]])]],
        Gw=[[np.array([[0.1]]), np.array([[0.1]])]],
        dw=[[np.zeros(1), np.zeros(1)]],
        k=[0])


@pytest.fixture(scope="module")
def central(ring3):
    return synth_centralized(ring3.net, ring3.formula, ring3.plan, ring3.templates)


def test_zero_zeta_gives_nominal_input(central, ring3):
    ctrl = central.controllers
    for t in range(ring3.net.horizon):
        zeta = ZetaState([np.zeros(ctrl.M[i][t].shape[1]) for i in range(3)])
        for i in range(3):
            np.testing.assert_array_equal(control(i, t, zeta, ctrl), ctrl.ubar[i][t])
    with pytest.raises(ValueError):
        control(0, 1, ZetaState([np.zeros(99)] * 3), ctrl)


def test_back_solve_recovers_coefficients():
    net, ctrl = scalar_net(), deadbeat_ctrl()
    zeta = initial_zeta(net, ctrl)
    assert zeta.zeta[0].size == 0
    x, u = np.array([0.0]), control(0, 0, zeta, ctrl)
    z1 = advance_zeta(0, 0, x + u + 0.1 * 0.3, x, u, zeta, ctrl, net)
    np.testing.assert_allclose(z1.zeta[0], [0.3], atol=1e-9)
    # the feedback cancels the first disturbance in the second step
    u1 = control(0, 1, z1, ctrl)
    np.testing.assert_allclose(u1, 0.5 - 0.03)
    with pytest.raises(ContractViolation) as e:
        advance_zeta(0, 0, x + u + 0.2, x, u, zeta, ctrl, net)
    assert e.value.subsystem == 0 and e.value.t == 0 and e.value.norm > 1


def test_constant_controller_without_feedback(rng):
    net = scalar_net()
    ctrl = deadbeat_ctrl()
    ctrl.M[0][1] = np.zeros((1, 1))
    ctrl.T[0][2] = np.array([[0.1, 0.1]])
    r = simulate_run(net, ctrl, DisturbanceSampler("uniform", 3))
    np.testing.assert_array_equal(r.trajectory.inputs[0], [[0.5], [0.5]])
    assert r.in_tube.all()


def test_run_stays_on_zeta_parameterization():
    net, ctrl = scalar_net(), deadbeat_ctrl()
    for mode in ("uniform", "extreme_vertex", "adversarial_axis"):
        r = simulate_run(net, ctrl, DisturbanceSampler(mode, 1))
        x = r.trajectory.states[0][:, 0]
        assert r.ok
        # deadbeat: x(2) deviates from its center by the second disturbance only
        assert abs(x[2] - 1.0) <= 0.1 + 1e-8
        if mode != "uniform":
            assert abs(abs(x[1] - 0.5) - 0.1) <= 1e-12


def test_contract_violation_is_reported(central, ring3):
    ctrl = central.controllers
    shrunk = ControllerParams(ctrl.xbar, ctrl.T, ctrl.ubar, ctrl.M,
                              [[0.01 * G for G in Gi] for Gi in ctrl.Gw], ctrl.dw, ctrl.k)
    sim = simulate(ring3.net, shrunk, DisturbanceSampler("extreme_vertex", 0), 3, ring3.formula,
                   start=ring3.plan.start)
    s = sim.summary()
    assert s["contract_violations"] == 3 and s["violations"] == 3
    assert sim.runs[0].violation["t"] == 0


def test_ring_closed_loop_stays_in_tube(central, ring3):
    for mode in ("extreme_vertex", "adversarial_axis"):
        sim = simulate(ring3.net, central.controllers, DisturbanceSampler(mode, 7), 10,
                       ring3.formula, start=ring3.plan.start)
        s = sim.summary()
        assert s["violations"] == 0, s
        assert s["min_robustness"] >= 0 and s["max_abs_input"] <= 0.1 + 1e-9


def test_determinism(central, ring3):
    a = simulate(ring3.net, central.controllers, DisturbanceSampler("uniform", 5), 3)
    b = simulate(ring3.net, central.controllers, DisturbanceSampler("uniform", 5), 3, workers=2)
    c = simulate(ring3.net, central.controllers, DisturbanceSampler("uniform", 6), 3)
    for ra, rb, rc in zip(a.runs, b.runs, c.runs):
        for i in range(3):
            np.testing.assert_array_equal(ra.trajectory.states[i], rb.trajectory.states[i])
        assert not np.array_equal(ra.trajectory.states[0], rc.trajectory.states[0])


def test_sampler_validation():
    with pytest.raises(ValueError):
        DisturbanceSampler("gaussian")


def test_trace_round_trip(central, ring3, tmp_path):
    sim = simulate(ring3.net, central.controllers, DisturbanceSampler("uniform", 2), 2)
    path = tmp_path / "trace.csv"
    write_trace(path, sim)
    back = read_trace(path)
    assert sorted(back) == [0, 1]
    for r in sim.runs:
        for i in range(3):
            np.testing.assert_array_equal(back[r.run].states[i], r.trajectory.states[i])
            np.testing.assert_array_equal(back[r.run].inputs[i], r.trajectory.inputs[i])
    empty = tmp_path / "empty.csv"
    empty.write_text("run,t,subsystem,x0\n")
    with pytest.raises(ValueError):
        read_trace(empty)


def test_zero_disturbance_follows_centers():
    net, ctrl = scalar_net(wrad=0.0), deadbeat_ctrl()
    r = simulate_run(net, ctrl, DisturbanceSampler("uniform", 0))
    np.testing.assert_allclose(r.trajectory.states[0][:, 0], [0.0, 0.5, 1.0], atol=1e-9)
    assert np.all(r.zeta_norms <= 1e-9)

import math

import numpy as np
import pytest

from stltube.network import (Coupling, Network, PowerAreaParams, Subsystem, aggregate,
                             build_power_ring, power_area_matrices, validate)
from stltube.sets import HPolytope, Zonotope


def test_power_area_defaults():
    p = PowerAreaParams()
    assert (p.K_p, p.K_s, p.T_p, p.dt) == (110.0, 0.5, 25.0, 0.1)
    Aii, Aij, Bii, wgen = power_area_matrices(p, degree=2)
    sync = 110 * 0.5 / (2 * math.pi * 25)
    np.testing.assert_allclose(Aii, [[1.0, 0.2 * math.pi], [-0.2 * sync, 1 - 0.1 / 25]])
    np.testing.assert_allclose(Aij, [[0.0, 0.0], [0.1 * sync, 0.0]])
    np.testing.assert_allclose(Bii, [[0.0], [0.44]])
    np.testing.assert_allclose(wgen, [[0.0], [0.00044]])


def test_power_ring_structure():
    net = build_power_ring(5)
    assert net.eta == 5 and net.horizon == 8
    assert net.neighbors(0) == [1, 4]
    assert net.influenced_by(2) == [1, 3]
    assert net.signature.state_dims == (2,) * 5
    assert validate(net) == []
    with pytest.raises(ValueError):
        build_power_ring(2)
    with pytest.raises(ValueError):
        PowerAreaParams(T_p=0.0)


def test_zero_disturbance_gives_singleton():
    net = build_power_ring(3, PowerAreaParams(omega_bound=0.0))
    assert net[0].W_at(0).order == 0


def test_aggregate_single_subsystem_blocks():
    net = build_power_ring(3)
    one = Network([Subsystem(A=net[0].A, B=net[0].B, X=net[0].X, U=net[0].U, W=net[0].W,
                             x_init=net[0].x_init)], 3)
    agg = aggregate(one)
    np.testing.assert_array_equal(agg.A[0], net[0].A_at(0))
    np.testing.assert_array_equal(agg.B[0], net[0].B_at(0))


def test_aggregate_matches_per_subsystem_simulation(rng):
    net = build_power_ring(4, horizon=6)
    agg = aggregate(net)
    xs = [s.x_init.copy() for s in net.subsystems]
    X = np.concatenate(xs)
    for t in range(net.horizon):
        us = [rng.uniform(-0.1, 0.1, 1) for _ in range(4)]
        ws = [s.W_at(t).sample(rng, 1)[0] for s in net.subsystems]
        xs = net.step(t, xs, us, ws)
        X = agg.A[t] @ X + agg.B[t] @ np.concatenate(us) + np.concatenate(ws)
        np.testing.assert_allclose(np.concatenate(xs), X, atol=1e-12)


def test_time_varying_matrices():
    A = [np.eye(1) * k for k in range(1, 4)]
    s = Subsystem(A=A, B=np.ones((1, 1)), X=HPolytope.box([-1], [1]), U=HPolytope.box([-1], [1]),
                  W=Zonotope([0.0]), x_init=[0.0])
    assert s.A_at(2)[0, 0] == 3.0


def test_validate_flags_problems():
    net = build_power_ring(3)
    bad_init = Subsystem(A=net[0].A, B=net[0].B, X=net[0].X, U=net[0].U, W=net[0].W,
                         x_init=[100.0, 0.0], couplings=net[0].couplings)
    bad_shape = Subsystem(A=net[1].A, B=net[1].B, X=net[1].X, U=net[1].U, W=net[1].W,
                          x_init=net[1].x_init, couplings={0: Coupling(A=np.zeros((2, 3)))})
    issues = validate(Network([bad_init, bad_shape, net[2]], 2))
    where = [r["where"] for r in issues]
    assert "x_init[0]" in where
    assert any(w.startswith("A[1,0], t=0") for w in where)
    dangling = Subsystem(A=net[0].A, B=net[0].B, X=net[0].X, U=net[0].U, W=net[0].W,
                         x_init=net[0].x_init, couplings={7: Coupling(A=np.zeros((2, 2)))})
    assert any("coupling (0,7)" in r["where"] for r in validate(Network([dangling], 2)))

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import lp_vertex_enumeration, milp_enumeration
from stltube.opt import (AffExpr, OptModel, SolverError, Status, concatenate, hstack, kkt_report,
                         model_terms, read_lp, solve, solve_lp, solve_milp, write_lp)


def random_lp(rng, n, m):
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.5, 2.0, m)  # x = 0 is feasible
    c = rng.normal(size=n)
    lb = -rng.uniform(0.5, 2.0, n)
    ub = rng.uniform(0.5, 2.0, n)
    return c, A, b, lb, ub


def model_from(c, A, b, lb, ub, maximize=False, binary=None):
    m = OptModel()
    n = len(c)
    if binary is None:
        x = m.add_vars(n, lb=lb, ub=ub)
    else:
        # keep declaration order: one block per variable
        parts = [m.add_vars(1, binary=True) if binary[j] else m.add_vars(1, lb=lb[j], ub=ub[j])
                 for j in range(n)]
        x = concatenate(parts)
    m.add_constraints(A @ x, "<=", b)
    m.set_objective(c @ x, "max" if maximize else "min")
    return m


# -- expressions ------------------------------------------------------------

def test_affexpr_algebra_matches_numpy(rng):
    m = OptModel()
    X = m.add_vars((2, 3))
    v = rng.normal(size=6)
    A = rng.normal(size=(4, 2))
    B = rng.normal(size=(3, 2))
    Xv = v.reshape(2, 3)
    np.testing.assert_allclose((A @ X).value(v), A @ Xv)
    np.testing.assert_allclose((X @ B).value(v), Xv @ B)
    np.testing.assert_allclose((2 * X - 1).sum(axis=0).value(v), (2 * Xv - 1).sum(axis=0))
    np.testing.assert_allclose(X.T.value(v), Xv.T)
    np.testing.assert_allclose(hstack([X, np.ones((2, 1))]).value(v), np.hstack([Xv, np.ones((2, 1))]))


def test_product_of_variables_rejected():
    m = OptModel()
    x = m.add_vars(2)
    with pytest.raises(TypeError):
        _ = x * x


# -- LP against vertex enumeration -------------------------------------------

@pytest.mark.parametrize("backend", ["native", "highs"])
def test_lp_matches_vertex_enumeration(backend):
    rng = np.random.default_rng(7)
    for _ in range(25):
        n, mrows = rng.integers(2, 5), rng.integers(1, 6)
        c, A, b, lb, ub = random_lp(rng, n, mrows)
        maximize = bool(rng.integers(2))
        ref, _ = lp_vertex_enumeration(c, A, b, lb, ub, maximize)
        sol = solve_lp(model_from(c, A, b, lb, ub, maximize), {"backend": backend})
        assert sol.status == Status.OPTIMAL
        assert sol.objective == pytest.approx(ref, abs=1e-6)


def test_lp_infeasible_and_unbounded():
    m = OptModel()
    x = m.add_vars(1, lb=0.0)
    m.add_constraints(x, "<=", -1.0)
    m.set_objective(x)
    for backend in ("native", "highs"):
        assert solve_lp(m, {"backend": backend}).status == Status.INFEASIBLE
    m = OptModel()
    x = m.add_vars(1, lb=0.0)
    m.set_objective(x, "max")
    for backend in ("native", "highs"):
        assert solve_lp(m, {"backend": backend}).status == Status.UNBOUNDED


def test_equality_and_free_variables():
    m = OptModel()
    x = m.add_vars(2)
    m.add_constraints(x[0] + x[1], "==", 1.0)
    m.add_constraints(x[0] - x[1], ">=", -3.0)
    m.add_constraints(x[0], "<=", 5.0)
    m.set_objective(x[1], "max")
    for backend in ("native", "highs"):
        sol = solve_lp(m, {"backend": backend})
        assert sol.objective == pytest.approx(2.0)
        np.testing.assert_allclose(sol.x, [-1.0, 2.0], atol=1e-9)


@pytest.mark.parametrize("backend", ["native", "highs"])
def test_strong_duality_on_random_lps(backend):
    rng = np.random.default_rng(11)
    for _ in range(20):
        c, A, b, lb, ub = random_lp(rng, int(rng.integers(2, 6)), int(rng.integers(1, 6)))
        m = model_from(c, A, b, lb, ub, maximize=bool(rng.integers(2)))
        sol = solve_lp(m, {"backend": backend})
        rep = kkt_report(m, sol)
        assert rep["gap"] <= 1e-6
        assert rep["primal_residual"] <= 1e-9
        assert rep["dual_residual"] <= 1e-7


def test_duals_are_rhs_sensitivities():
    # max x0 + 2 x1  s.t.  x0 + x1 <= b0, x1 <= b1
    def build(b0, b1):
        m = OptModel()
        x = m.add_vars(2, lb=0.0)
        h = m.add_constraints(concatenate([x[0] + x[1], x[1]]), "<=", np.array([b0, b1]))
        m.set_objective(x[0] + 2 * x[1], "max")
        return m, h

    m, h = build(3.0, 1.0)
    for backend in ("native", "highs"):
        sol = solve_lp(m, {"backend": backend})
        np.testing.assert_allclose(h.dual(sol), [1.0, 1.0], atol=1e-9)
    base = solve_lp(m, {"backend": "highs"}).objective
    assert base == pytest.approx(4.0)
    up = solve_lp(build(3.001, 1.0)[0], {"backend": "highs"}).objective
    assert (up - base) / 0.001 == pytest.approx(1.0, abs=1e-6)


# -- MILP against exhaustive enumeration --------------------------------------

@pytest.mark.parametrize("backend", ["native", "highs"])
def test_milp_matches_enumeration(backend):
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(3, 7))
        binary = rng.random(n) < 0.6
        c, A, b, lb, ub = random_lp(rng, n, int(rng.integers(2, 5)))
        maximize = bool(rng.integers(2))
        ref = milp_enumeration(c, A, b, lb, ub, binary, maximize)
        sol = solve_milp(model_from(c, A, b, lb, ub, maximize, binary), {"backend": backend})
        assert ref is not None
        assert sol.objective == pytest.approx(ref, abs=1e-8)
        xb = sol.x[binary]
        np.testing.assert_array_equal(xb, np.round(xb))


def test_milp_infeasible():
    m = OptModel()
    z = m.add_vars(2, binary=True)
    m.add_constraints(z.sum(), "==", 1.5)
    m.set_objective(z.sum())
    for backend in ("native", "highs"):
        assert solve_milp(m, {"backend": backend}).status == Status.INFEASIBLE


def test_solve_dispatch_and_quadratic_guard():
    m = OptModel()
    x = m.add_vars(1, lb=0, ub=1)
    m.set_objective(x, "max")
    assert solve(m).objective == pytest.approx(1.0)
    q = OptModel()
    y = q.add_vars(1, lb=0, ub=1)
    q.set_objective(y)
    q.add_quadratic_objective({(0, 0): 1.0})
    with pytest.raises(SolverError):
        solve(q)


def test_unknown_option_rejected():
    with pytest.raises(ValueError):
        solve_lp(OptModel(), {"backend": "highs", "bogus": 1})


# -- LP file round trip -----------------------------------------------------

def test_lp_file_round_trip(tmp_path):
    m = OptModel("demo")
    x = m.add_vars(2, lb=[-1.0, 0.0], ub=[4.0, np.inf], name="x")
    z = m.add_vars(1, binary=True, name="z")
    m.add_constraints(x[0] + 2.5 * x[1] - 3 * z[0], "<=", 7.0, name="cap")
    m.add_constraints(x[0] - x[1], "==", 0.5, name="link")
    m.set_objective(x[0] - 0.25 * x[1] + 1.5, "max")
    path = tmp_path / "demo.lp"
    write_lp(m, path)
    parsed = read_lp(path)
    ref = model_terms(m)
    assert parsed["sense"] == ref["sense"]
    assert parsed["objective"] == pytest.approx(ref["objective"])
    assert parsed["objective_constant"] == pytest.approx(ref["objective_constant"])
    assert parsed["binaries"] == ref["binaries"]
    assert len(parsed["constraints"]) == len(ref["constraints"])
    for (n1, t1, s1, r1), (n2, t2, s2, r2) in zip(parsed["constraints"], ref["constraints"]):
        assert (n1, s1) == (n2, s2)
        assert t1 == pytest.approx(t2)
        assert r1 == pytest.approx(r2)
    for k, v in ref["bounds"].items():
        assert parsed["bounds"].get(k, (0.0, np.inf)) == pytest.approx(v)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_native_and_highs_agree(n, mrows, seed):
    rng = np.random.default_rng(seed)
    c, A, b, lb, ub = random_lp(rng, n, mrows)
    m = model_from(c, A, b, lb, ub)
    a = solve_lp(m, {"backend": "native"})
    h = solve_lp(m, {"backend": "highs"})
    assert a.objective == pytest.approx(h.objective, abs=1e-7)

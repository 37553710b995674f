import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from formulas import random_formula, random_trajectory
from oracles import naive_robustness
from stltube import stl
from stltube.scenario import POWER_SPEC

SIG = stl.Signature((2, 2), (1, 1))


def x(i, k):
    return stl.VarRef("x", i, k)


# -- parsing -----------------------------------------------------------------

def test_parse_simple_eventually():
    f = stl.parse_formula("F[0,8] (x0[0] <= 0.01)")
    assert f == stl.Eventually(0, 8, stl.Predicate(((x(0, 0), 1.0),), 0.01, "<="))


def test_parse_case_study_formula():
    f = stl.parse_formula(POWER_SPEC.format(i=0))
    assert isinstance(f, stl.And) and len(f.children) == 2
    g, e = f.children
    assert isinstance(g, stl.Eventually) and (g.a, g.b) == (0, 6)
    assert isinstance(g.child, stl.Always) and (g.child.a, g.child.b) == (0, 2)
    box1 = g.child.child
    assert isinstance(box1, stl.And) and len(box1.children) == 4
    bounds = sorted((p.terms[0][0].component, p.sense, p.bound) for p in box1.children)
    assert bounds == [(0, "<=", 0.26), (0, ">=", 0.14), (1, "<=", -0.04), (1, ">=", -0.16)]
    assert isinstance(e, stl.Eventually) and (e.a, e.b) == (0, 8)
    assert stl.horizon(f) == 8


@pytest.mark.parametrize("text", ["G[3,1] (x0[0] >= 0)", "F[-1,2] (x0[0] >= 0)"])
def test_malformed_interval_rejected(text):
    with pytest.raises(stl.STLError):
        stl.parse_formula(text)


def test_syntax_error_has_position():
    with pytest.raises(stl.STLSyntaxError) as e:
        stl.parse_formula("x0[0] >= ")
    assert e.value.position == 8


def test_unknown_variable_rejected():
    with pytest.raises(stl.STLError):
        stl.parse_formula("x2[0] >= 0", SIG)
    with pytest.raises(stl.STLError):
        stl.parse_formula("u0[1] >= 0", SIG)
    stl.parse_formula("x1[1] >= 0 & u1[0] <= 1", SIG)


def test_linear_predicate_terms():
    f = stl.parse_formula("2*x0[0] - 0.5*x1[1] <= 3")
    assert f.terms == ((x(0, 0), 2.0), (x(1, 1), -0.5))
    assert f.normalized() == (((x(0, 0), -2.0), (x(1, 1), 0.5)), -3.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parse_format_round_trip(seed):
    f = random_formula(np.random.default_rng(seed), negations=True)
    text = stl.format_formula(f)
    g = stl.parse_formula(text)
    assert g == f
    assert stl.parse_formula(text.replace(" ", "")) == f


# -- structure ---------------------------------------------------------------

def test_horizon_examples():
    p = stl.parse_formula("x0[0] >= 0")
    assert stl.horizon(p) == 0
    assert stl.horizon(stl.Always(0, 2, p)) == 2
    assert stl.horizon(stl.parse_formula("(x0[0] >= 0) U[1,3] F[0,2] (x0[1] >= 0)")) == 5


def test_negation_normalization_examples():
    p = stl.Predicate(((x(0, 0), 1.0),), 1.0, ">=")
    q = stl.Predicate(((x(0, 1), 1.0),), 0.0, "<=")
    assert stl.normalize_negation_free(stl.Not(p)) == stl.Predicate(p.terms, 1.0, "<=")
    assert stl.normalize_negation_free(stl.Not(stl.And((p, q)))) == stl.Or((p.negated(), q.negated()))
    assert stl.normalize_negation_free(stl.Not(stl.Always(0, 2, p))) == stl.Eventually(0, 2, p.negated())
    assert stl.normalize_negation_free(stl.Not(stl.Not(p))) == p


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_normalization_preserves_robustness(seed):
    rng = np.random.default_rng(seed)
    f = random_formula(rng, negations=True, max_horizon=6)
    s = random_trajectory(rng, stl.horizon(f))
    g = stl.normalize_negation_free(f)
    assert stl.is_negation_free(g)
    assert stl.robustness(g, s) == pytest.approx(naive_robustness(f, s), abs=1e-12)


def test_split_separable():
    f = stl.parse_formula("x0[0] >= 1 & F[0,1] x1[0] <= 2 & G[0,1] x0[1] >= 0")
    parts = stl.split_separable(f, 3)
    assert stl.subsystems_of(parts[0]) == {0} and isinstance(parts[0], stl.And)
    assert parts[1] == stl.Eventually(0, 1, stl.Predicate(((x(1, 0), 1.0),), 2.0, "<="))
    assert parts[2] is None
    with pytest.raises(stl.NotSeparable):
        stl.split_separable(stl.parse_formula("x0[0] + x1[0] >= 1"), 2)
    with pytest.raises(stl.STLError):
        stl.split_separable(stl.parse_formula("!(x0[0] >= 1)"), 2)


# -- semantics ---------------------------------------------------------------

def test_robustness_hand_values():
    s = stl.Trajectory([np.array([[0.0], [1.0], [3.0], [2.0]])])
    p = stl.parse_formula("x0[0] >= 1.5")
    assert stl.robustness(p, s) == -1.5
    assert stl.robustness(stl.Eventually(0, 3, p), s) == 1.5
    assert stl.robustness(stl.Always(1, 3, p), s) == -0.5
    assert stl.robustness(stl.Always(2, 3, p), s) == 0.5
    # the left operand must also hold at the switching instant
    until = stl.parse_formula("(x0[0] <= 2.5) U[0,3] (x0[0] >= 2.5)")
    assert stl.robustness(until, s) == pytest.approx(-0.5)
    until = stl.parse_formula("(x0[0] <= 3.5) U[0,3] (x0[0] >= 2.5)")
    assert stl.robustness(until, s) == pytest.approx(0.5)


def test_robustness_beyond_trajectory_raises():
    s = stl.Trajectory([np.zeros((3, 1))])
    with pytest.raises(stl.HorizonError):
        stl.robustness(stl.parse_formula("F[0,5] x0[0] >= 0"), s)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_robustness_matches_oracle_and_sign_agrees(seed):
    rng = np.random.default_rng(seed)
    f = random_formula(rng)
    s = random_trajectory(rng, stl.horizon(f) + 2)
    for t in (0, 2):
        r = stl.robustness(f, s, t)
        assert r == pytest.approx(naive_robustness(f, s, t), abs=1e-12)
        if r > 0:
            assert stl.satisfies(f, s, t)
        elif r < 0:
            assert not stl.satisfies(f, s, t)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_robustness_is_one_lipschitz(seed):
    rng = np.random.default_rng(seed)
    f = random_formula(rng, max_horizon=6)
    s = random_trajectory(rng, stl.horizon(f))
    d = rng.uniform(-0.1, 0.1, size=s.states[0].shape)
    s2 = stl.Trajectory([s.states[0] + d], s.inputs)
    coef = max(sum(abs(c) for _, c in p.terms) for _, p in stl.predicates(f))
    assert abs(stl.robustness(f, s2) - stl.robustness(f, s)) <= coef * np.abs(d).max() + 1e-12

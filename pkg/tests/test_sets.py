import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from formulas import certify_containment, random_zonotope
from oracles import zonotope_membership_lp, zonotope_vertices
from stltube.opt import OptModel, solve_lp
from stltube.sets import (HPolytope, Zonotope, affine_map, contains_point, directed_hausdorff,
                          encode_zono_in_polytope, interval_hull, min_inf_preimage, minkowski)


def test_zonotope_validation():
    with pytest.raises(ValueError):
        Zonotope([0.0, 0.0], np.ones((3, 1)))
    with pytest.raises(ValueError):
        Zonotope([np.inf, 0.0])
    with pytest.raises(ValueError):
        Zonotope.box([1.0], [0.0])
    z = Zonotope.box([0.0, 1.0], [2.0, 1.0])
    assert z.order == 1  # degenerate axis drops its generator
    assert Zonotope.from_dict(z.to_dict()).to_dict() == z.to_dict()


def test_minkowski_and_affine_map_act_on_points(rng):
    a, b = random_zonotope(rng, 3, 2), random_zonotope(rng, 3, 3)
    ba, bb = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 3)
    s = minkowski(a, b)
    np.testing.assert_allclose(s.point(np.r_[ba, bb]), a.point(ba) + b.point(bb))
    A, off = rng.normal(size=(2, 3)), rng.normal(size=2)
    np.testing.assert_allclose(affine_map(A, off, a).point(ba), A @ a.point(ba) + off)
    assert minkowski(a, Zonotope(np.ones(3))).order == 2


def test_interval_hull_matches_vertices(rng):
    for _ in range(20):
        z = random_zonotope(rng, 3, int(rng.integers(1, 6)))
        V = zonotope_vertices(z.center, z.generators)
        lo, hi = interval_hull(z)
        np.testing.assert_allclose(lo, V.min(axis=0))
        np.testing.assert_allclose(hi, V.max(axis=0))


# -- containment -------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_certified_containment_is_sound(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    outer = random_zonotope(rng, n, int(rng.integers(1, 5)))
    # inner: shrunken, shifted image of the outer or an unrelated zonotope
    if rng.random() < 0.6:
        inner = Zonotope(outer.center + 0.2 * rng.normal(size=n),
                         outer.generators @ rng.uniform(-0.5, 0.5, (outer.order, 2)))
    else:
        inner = random_zonotope(rng, n, 2, spread=0.3)
    cert = certify_containment(inner, outer)
    if cert is None:
        return
    assert cert.residual(inner, outer.generators, outer.center) <= 1e-7
    for x in np.vstack([inner.sample(rng, 50), inner.sample(rng, 50, "vertex")]):
        assert zonotope_membership_lp(outer.center, outer.generators, x) <= 1 + 1e-6


def test_containment_exact_for_boxes(rng):
    outer = Zonotope.box([-1.0, -2.0], [1.0, 2.0])
    for _ in range(30):
        inner = random_zonotope(rng, 2, 3, spread=0.5)
        lo, hi = interval_hull(inner)
        inside = bool(np.all(lo >= [-1 - 1e-9, -2 - 1e-9]) and np.all(hi <= [1 + 1e-9, 2 + 1e-9]))
        assert (certify_containment(inner, outer) is not None) == inside


def test_scaled_copy_is_certified(rng):
    z = random_zonotope(rng, 3, 4)
    assert certify_containment(Zonotope(z.center, 0.5 * z.generators), z) is not None
    assert certify_containment(Zonotope(z.center, 1.5 * z.generators), z) is None


def test_singleton_outer_requires_equality():
    outer = Zonotope([1.0, 2.0])
    assert certify_containment(Zonotope([1.0, 2.0]), outer) is not None
    assert certify_containment(Zonotope([1.0, 2.1]), outer) is None


def test_zonotope_in_polytope_is_exact(rng):
    P = HPolytope(rng.normal(size=(5, 2)), rng.uniform(0.5, 2.0, 5))
    for _ in range(40):
        z = random_zonotope(rng, 2, 2, spread=0.3)
        z = Zonotope(z.center, 0.4 * z.generators)
        m = OptModel()
        encode_zono_in_polytope(z, P, m)
        m.set_objective(0.0 * m.add_vars(1, lb=0, ub=0).sum())
        certified = solve_lp(m, {"backend": "highs"}).ok
        V = zonotope_vertices(z.center, z.generators)
        assert certified == bool(np.all(V @ P.H.T <= P.h + 1e-9))


# -- distances and membership ------------------------------------------------

def test_directed_hausdorff_box_targets(rng):
    lo, hi = np.array([-1.0, -0.5]), np.array([1.0, 0.5])
    Zbox, Pbox = Zonotope.box(lo, hi), HPolytope.box(lo, hi)
    for _ in range(20):
        z = random_zonotope(rng, 2, 3)
        zlo, zhi = interval_hull(z)
        ref = float(np.max(np.r_[zhi - hi, lo - zlo, 0.0]))
        assert directed_hausdorff(Pbox, z) == pytest.approx(ref, abs=1e-9)
        assert directed_hausdorff(Zbox, z) == pytest.approx(ref, abs=1e-7)


def test_directed_hausdorff_zero_iff_contained(rng):
    z = random_zonotope(rng, 2, 3)
    assert directed_hausdorff(z, Zonotope(z.center, 0.3 * z.generators)) == pytest.approx(0.0, abs=1e-9)
    assert directed_hausdorff(z, Zonotope(z.center + 10.0, z.generators)) > 1.0


def test_min_inf_preimage_recovers_coordinates(rng):
    for _ in range(20):
        G = rng.normal(size=(3, 3))
        b = rng.uniform(-1, 1, 3)
        bs, norm = min_inf_preimage(G, G @ b)
        np.testing.assert_allclose(G @ bs, G @ b, atol=1e-8)
        # equality rows carry a 1e-9 relative slack, amplified by the conditioning of G
        assert norm == pytest.approx(np.abs(b).max(), abs=1e-9 * np.linalg.cond(G) * 10)
    assert min_inf_preimage(np.zeros((2, 0)), np.ones(2))[0] is None
    assert min_inf_preimage(np.array([[1.0], [1.0]]), np.array([1.0, -1.0]))[0] is None


def test_min_inf_preimage_small_generators():
    G = np.diag([1e-4, 2e-5])
    b = np.array([1.0, -1.0])
    _, norm = min_inf_preimage(G, G @ b)
    assert abs(norm - 1.0) <= 1e-8


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_contains_point_matches_lp_oracle(seed):
    rng = np.random.default_rng(seed)
    z = random_zonotope(rng, 2, int(rng.integers(1, 5)))
    x = z.point(rng.uniform(-1.5, 1.5, z.order))
    ref = zonotope_membership_lp(z.center, z.generators, x)
    if abs(ref - 1.0) > 1e-6:
        assert contains_point(z, x) == (ref <= 1.0)
